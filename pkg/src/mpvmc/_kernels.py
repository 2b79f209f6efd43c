"""Fused numba kernel for the per-operation rounded RBM forward pass.

The kernel replicates, value for value, the canonical operation order of
precision.rbm_log_prob_plan (and of the numpy fallback in rbm._rounded_forward):
rounded left-to-right accumulation over sites, the complex log cosh as one
float64 elementary operation with rounded outputs, a rounded hidden sum, and
the rounded final doubling.  fastmath stays off so no reassociation occurs;
test_rbm asserts bitwise agreement with the plan interpreter.
"""

import math

import numpy as np
import numba
from numba import njit, prange

# the sandbox TBB is too old for numba's TBB layer; omp avoids the probe
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "omp"

_LOG2 = math.log(2.0)


_MAGIC = 1.5 * 2.0**52  # adding then subtracting rounds to integer (RNE)


@njit(cache=True, inline="always")
def _quantize(value, splitter, min_normal, inv_quantum, quantum, max_finite):
    """Round-to-nearest-even onto a reduced-precision grid, float-ops only.

    Normal range: Veltkamp splitting with C = 2^(52-M) + 1 yields exactly the
    value rounded to M+1 significant bits.  Subnormal range: scale to the
    fixed quantum 2^(emin-M) and round to integer with the magic-constant
    trick (exact for M <= 23).  Requires max_exponent <= 127 so the splitter
    product cannot overflow; wider formats use the numpy path.
    """
    if value == 0.0 or not math.isfinite(value):
        return value
    mag = abs(value)
    if mag >= min_normal:
        y = splitter * value
        r = y - (y - value)
        if abs(r) > max_finite:
            return math.copysign(np.inf, r)
        return r
    z = value * inv_quantum
    rounded = (z + _MAGIC) - _MAGIC
    return rounded * quantum


@njit(cache=True, parallel=True)
def rounded_forward(bits, a_re, a_im, b_re, b_im, w_re, w_im, spl, mn, iq, qq, maxf):
    n_batch, n_vis = bits.shape
    n_hid = b_re.shape[0]
    out_lp = np.empty(n_batch)
    out_re = np.empty(n_batch)
    out_im = np.empty(n_batch)
    for s in prange(n_batch):
        vr = 0.0
        vi = 0.0
        for k in range(n_vis):
            if bits[s, k]:
                vr = _quantize(vr + a_re[k], spl, mn, iq, qq, maxf)
                vi = _quantize(vi + a_im[k], spl, mn, iq, qq, maxf)
        hr_sum = 0.0
        hi_sum = 0.0
        for i in range(n_hid):
            tr = b_re[i]
            ti = b_im[i]
            for k in range(n_vis):
                if bits[s, k]:
                    tr = _quantize(tr + w_re[i, k], spl, mn, iq, qq, maxf)
                    ti = _quantize(ti + w_im[i, k], spl, mn, iq, qq, maxf)
            u = abs(tr)
            v = ti if tr >= 0.0 else -ti
            t = math.exp(-2.0 * u)
            wr = (1.0 + t) * math.cos(v)
            wi = (1.0 - t) * math.sin(v)
            hr = _quantize(u - _LOG2 + 0.5 * math.log(wr * wr + wi * wi), spl, mn, iq, qq, maxf)
            hi = _quantize(math.atan2(wi, wr), spl, mn, iq, qq, maxf)
            if i == 0:
                hr_sum = hr
                hi_sum = hi
            else:
                hr_sum = _quantize(hr_sum + hr, spl, mn, iq, qq, maxf)
                hi_sum = _quantize(hi_sum + hi, spl, mn, iq, qq, maxf)
        total_re = _quantize(vr + hr_sum, spl, mn, iq, qq, maxf)
        total_im = _quantize(vi + hi_sum, spl, mn, iq, qq, maxf)
        out_re[s] = total_re
        out_im[s] = total_im
        out_lp[s] = _quantize(2.0 * total_re, spl, mn, iq, qq, maxf)
    return out_lp, out_re, out_im


@njit(cache=True, parallel=True)
def rounded_log_prob(bits, a_re, b_re, b_im, w_re, w_im, spl, mn, iq, qq, maxf):
    """log-probability lane only: 2 Re log psi never touches the imaginary
    visible term, the log cosh phase, or their rounded accumulations."""
    n_batch, n_vis = bits.shape
    n_hid = b_re.shape[0]
    out_lp = np.empty(n_batch)
    for s in prange(n_batch):
        vr = 0.0
        for k in range(n_vis):
            if bits[s, k]:
                vr = _quantize(vr + a_re[k], spl, mn, iq, qq, maxf)
        hr_sum = 0.0
        for i in range(n_hid):
            tr = b_re[i]
            ti = b_im[i]
            for k in range(n_vis):
                if bits[s, k]:
                    tr = _quantize(tr + w_re[i, k], spl, mn, iq, qq, maxf)
                    ti = _quantize(ti + w_im[i, k], spl, mn, iq, qq, maxf)
            u = abs(tr)
            v = ti if tr >= 0.0 else -ti
            t = math.exp(-2.0 * u)
            wr = (1.0 + t) * math.cos(v)
            wi = (1.0 - t) * math.sin(v)
            hr = _quantize(
                u - _LOG2 + 0.5 * math.log(wr * wr + wi * wi), spl, mn, iq, qq, maxf
            )
            if i == 0:
                hr_sum = hr
            else:
                hr_sum = _quantize(hr_sum + hr, spl, mn, iq, qq, maxf)
        total_re = _quantize(vr + hr_sum, spl, mn, iq, qq, maxf)
        out_lp[s] = _quantize(2.0 * total_re, spl, mn, iq, qq, maxf)
    return out_lp
