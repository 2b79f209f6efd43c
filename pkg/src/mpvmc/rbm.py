"""RBM log-amplitudes in any precision mode, gradients, frozen-noise
wrappers, and measurement of the finite-precision error field delta(x).

log psi(x) = a.x + sum_i log cosh((W x + b)_i) with complex a, b, W.  The
flattened parameter order used by gradients and serialization is a, then b,
then W row-major.  Gradients are only ever computed in float64; reduced
precision enters through the forward pass alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import precision
from .errors import EvaluationFailureError
from .lattice import SpinConfiguration, bits_to_codes, codes_to_bits, enumerate_bits
from .precision import F64, FloatFormat, RoundingMode, make_rounder
from .rng import counter_uniform, derive_key, gaussian_field

_LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class RbmParameters:
    """Complex visible biases a (N,), hidden biases b (M,), weights w (M, N)."""

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128)
        b = np.asarray(self.b, dtype=np.complex128)
        w = np.asarray(self.w, dtype=np.complex128)
        if a.ndim != 1 or b.ndim != 1 or w.shape != (b.size, a.size):
            raise ValueError(
                f"inconsistent dimensions: a{a.shape}, b{b.shape}, w{w.shape}"
            )
        for name, arr in (("a", a), ("b", b), ("w", w)):
            if not np.all(np.isfinite(arr.view(np.float64))):
                raise ValueError(f"non-finite entries in {name}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @property
    def alpha_density(self) -> Fraction:
        return Fraction(self.n_hidden, self.n_visible)

    @property
    def n_params(self) -> int:
        return self.n_visible + self.n_hidden + self.n_visible * self.n_hidden

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.w.reshape(-1)])

    @classmethod
    def from_flat(cls, theta, n_visible: int, n_hidden: int) -> "RbmParameters":
        theta = np.asarray(theta, dtype=np.complex128)
        a = theta[:n_visible]
        b = theta[n_visible : n_visible + n_hidden]
        w = theta[n_visible + n_hidden :].reshape(n_hidden, n_visible)
        return cls(a, b, w)


def random_parameters(n_visible: int, alpha, key, scale: float = 0.01) -> RbmParameters:
    """Small random init: Re and Im parts drawn i.i.d. from N(0, scale^2)."""
    alpha = Fraction(alpha)
    n_hidden = alpha * n_visible
    if n_hidden.denominator != 1 or n_hidden <= 0:
        raise ValueError(f"alpha*N must be a positive integer, got {n_hidden}")
    n_hidden = int(n_hidden)
    count = n_visible + n_hidden + n_hidden * n_visible
    draws = scale * gaussian_field(key, np.arange(2 * count), 1.0)
    theta = draws[:count] + 1j * draws[count:]
    return RbmParameters.from_flat(theta, n_visible, n_hidden)


def round_parameters(params: RbmParameters, fmt: FloatFormat) -> RbmParameters:
    """Downcast snapshot: round Re and Im of every parameter to fmt."""
    if fmt.name == "f64":
        return params
    rnd = make_rounder(fmt)

    def q(arr):
        with np.errstate(over="ignore"):
            return rnd(arr.real) + 1j * rnd(arr.imag)

    return RbmParameters(q(params.a), q(params.b), q(params.w))


def save_parameters(params: RbmParameters, path):
    payload = {
        "format": "rbm-params-v1",
        "n_visible": params.n_visible,
        "n_hidden": params.n_hidden,
        "a": [[float(v.real), float(v.imag)] for v in params.a],
        "b": [[float(v.real), float(v.imag)] for v in params.b],
        "w": [[[float(v.real), float(v.imag)] for v in row] for row in params.w],
    }
    with open(path, "w") as handle:
        json.dump(payload, handle)


def load_parameters(path) -> RbmParameters:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format") != "rbm-params-v1":
        raise ValueError(f"unrecognized parameter file {path}")

    def decode(entries):
        arr = np.asarray(entries, dtype=np.float64)
        return arr[..., 0] + 1j * arr[..., 1]

    return RbmParameters(decode(payload["a"]), decode(payload["b"]), decode(payload["w"]))


def _logcosh_pair(re_part, im_part):
    """Complex log cosh on split real/imaginary arrays (principal branch),
    stable for large |Re|; one elementary operation in rounded evaluation."""
    u = np.abs(re_part)
    v = np.where(re_part < 0, -np.asarray(im_part, dtype=np.float64), im_part)
    t = np.exp(-2.0 * u)
    wr = (1.0 + t) * np.cos(v)
    wi = (1.0 - t) * np.sin(v)
    hr = u - _LOG2 + 0.5 * np.log(wr * wr + wi * wi)
    hi = np.arctan2(wi, wr)
    return hr, hi


def _fast_forward(params: RbmParameters, bits: np.ndarray) -> np.ndarray:
    """Plain float64 forward pass (vectorized matmul path)."""
    x = bits.astype(np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        theta = x @ params.w.T + params.b[None, :]
        hr, hi = _logcosh_pair(theta.real, theta.imag)
        vis = x @ params.a
        return vis + hr.sum(axis=1) + 1j * hi.sum(axis=1)


try:
    from . import _kernels

    _HAVE_KERNELS = True
except ImportError:  # numba not installed: numpy fallback below
    _HAVE_KERNELS = False


class _PreparedRounded:
    """Pre-rounded, re/im-stacked parameters for the emulated forward pass."""

    def __init__(self, params: RbmParameters, fmt: FloatFormat):
        snapshot = round_parameters(params, fmt)
        n_vis, n_hid = snapshot.n_visible, snapshot.n_hidden
        # column layout: theta_0..theta_{M-1}, then the visible accumulator
        weights = np.zeros((2, 1, n_hid + 1, n_vis))
        weights[0, 0, :n_hid] = snapshot.w.real
        weights[1, 0, :n_hid] = snapshot.w.imag
        weights[0, 0, n_hid] = snapshot.a.real
        weights[1, 0, n_hid] = snapshot.a.imag
        start = np.zeros((2, 1, n_hid + 1))
        start[0, 0, :n_hid] = snapshot.b.real
        start[1, 0, :n_hid] = snapshot.b.imag
        self.weights = weights
        self.start = start
        self.n_visible = n_vis
        self.n_hidden = n_hid
        self.rounder = make_rounder(fmt)
        # the fused kernel assumes kept subnormals and a narrow exponent
        # range (true for all reduced built-ins); anything else falls back
        self.use_kernel = (
            _HAVE_KERNELS and fmt.supports_subnormals and fmt.max_exponent <= 127
        )
        if self.use_kernel:
            quantum = 2.0 ** (fmt.min_exponent - fmt.significand_bits)
            self.kernel_args = (
                np.ascontiguousarray(snapshot.a.real),
                np.ascontiguousarray(snapshot.a.imag),
                np.ascontiguousarray(snapshot.b.real),
                np.ascontiguousarray(snapshot.b.imag),
                np.ascontiguousarray(snapshot.w.real),
                np.ascontiguousarray(snapshot.w.imag),
                2.0 ** (52 - fmt.significand_bits) + 1.0,
                fmt.min_normal,
                1.0 / quantum,
                quantum,
                fmt.max_finite,
            )


def _rounded_forward(prepared: _PreparedRounded, bits: np.ndarray):
    """Per-operation rounded forward pass.

    Replicates the canonical operation order of precision.rbm_log_prob_plan:
    visible term accumulated over k ascending, each theta_i over k ascending,
    hidden sum over i ascending, then total and 2*Re.  Real and imaginary
    lanes are stacked on a leading axis (their op sequences never interact)
    and the visible term rides along as one extra accumulator column, so each
    rounded add covers every independent accumulator at once.
    Multiplications by the 0/1 inputs are exact and need no rounding.
    Returns (log_psi complex, rounded log-probability).
    """
    if prepared.use_kernel:
        packed = np.ascontiguousarray(bits, dtype=np.uint8)
        log_prob, total_re, total_im = _kernels.rounded_forward(
            packed, *prepared.kernel_args
        )
        return total_re + 1j * total_im, log_prob
    rnd = prepared.rounder
    x = bits.astype(np.float64)
    n_batch = x.shape[0]
    n_hid = prepared.n_hidden
    with np.errstate(over="ignore", invalid="ignore"):
        acc = np.broadcast_to(
            prepared.start, (2, n_batch, n_hid + 1)
        ).copy()
        for k in range(prepared.n_visible):
            acc = rnd(acc + prepared.weights[:, :, :, k] * x[None, :, k, None])
        h = np.empty((2, n_batch, n_hid))
        h[0], h[1] = _logcosh_pair(acc[0, :, :n_hid], acc[1, :, :n_hid])
        h = rnd(h)
        total = h[:, :, 0]
        for i in range(1, n_hid):
            total = rnd(total + h[:, :, i])
        total = rnd(total + acc[:, :, n_hid])
        log_prob = rnd(2.0 * total[0])
    return total[0] + 1j * total[1], log_prob


def _check_finite(values, bits, what):
    finite = np.isfinite(values) if values.dtype != np.complex128 else (
        np.isfinite(values.real) & np.isfinite(values.imag)
    )
    if not finite.all():
        bad = int(np.argmin(finite))
        raise EvaluationFailureError(
            f"non-finite {what} for configuration bits {bits[bad].tolist()}",
            context={"bits": bits[bad].copy()},
        )


def log_psi_batch(
    params: RbmParameters,
    bits,
    fmt: FloatFormat = F64,
    mode: RoundingMode = RoundingMode.PER_OPERATION,
) -> np.ndarray:
    """log psi for a (B, N) bit matrix under the given precision context."""
    bits = np.atleast_2d(np.asarray(bits))
    if bits.shape[1] != params.n_visible:
        raise ValueError(
            f"bit matrix has {bits.shape[1]} sites, ansatz has {params.n_visible}"
        )
    if fmt.name == "f64":
        out = _fast_forward(params, bits)
    elif mode is RoundingMode.STORAGE_ONLY:
        out = _fast_forward(round_parameters(params, fmt), bits)
    else:
        out, _ = _rounded_forward(_PreparedRounded(params, fmt), bits)
    _check_finite(out, bits, "log psi")
    return out


def log_prob_batch(
    params: RbmParameters,
    bits,
    fmt: FloatFormat = F64,
    mode: RoundingMode = RoundingMode.PER_OPERATION,
) -> np.ndarray:
    """log p(x) = 2 Re log psi(x); in per-operation mode the doubling is a
    rounded operation of the plan, matching the emulated forward exactly."""
    bits = np.atleast_2d(np.asarray(bits))
    if bits.shape[1] != params.n_visible:
        raise ValueError(
            f"bit matrix has {bits.shape[1]} sites, ansatz has {params.n_visible}"
        )
    if fmt.name == "f64":
        out = 2.0 * _fast_forward(params, bits).real
    elif mode is RoundingMode.STORAGE_ONLY:
        out = 2.0 * _fast_forward(round_parameters(params, fmt), bits).real
    else:
        _, out = _rounded_forward(_PreparedRounded(params, fmt), bits)
    _check_finite(out, bits, "log probability")
    return out


def log_psi(params, x: SpinConfiguration, fmt=F64, mode=RoundingMode.PER_OPERATION):
    return complex(log_psi_batch(params, x.bits()[None, :], fmt, mode)[0])


def log_prob(params, x: SpinConfiguration, fmt=F64, mode=RoundingMode.PER_OPERATION):
    return float(log_prob_batch(params, x.bits()[None, :], fmt, mode)[0])


def grad_log_psi_batch(params: RbmParameters, bits) -> np.ndarray:
    """O(x) = d log psi / d theta, rows per sample, float64 only.

    Columns follow the flattened order a, b, W row-major:
    da_k = x_k, db_i = tanh(theta_i), dW_ik = tanh(theta_i) * x_k.
    """
    bits = np.atleast_2d(np.asarray(bits))
    x = bits.astype(np.float64)
    theta = x @ params.w.T + params.b[None, :]
    t = np.tanh(theta)
    n_samples = x.shape[0]
    out = np.empty((n_samples, params.n_params), dtype=np.complex128)
    n_vis, n_hid = params.n_visible, params.n_hidden
    out[:, :n_vis] = x
    out[:, n_vis : n_vis + n_hid] = t
    out[:, n_vis + n_hid :] = (t[:, :, None] * x[:, None, :]).reshape(
        n_samples, n_hid * n_vis
    )
    return out


def grad_log_psi(params, x: SpinConfiguration) -> np.ndarray:
    return grad_log_psi_batch(params, x.bits()[None, :])[0]


@dataclass(frozen=True)
class NoiseField:
    """Frozen Gaussian log-density noise: std sigma, fixed per (seed, x)."""

    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @property
    def key(self):
        return derive_key(self.seed, "noise-field")

    def zeta(self, codes) -> np.ndarray:
        """The log-density perturbation delta(x) = zeta(x) for given codes."""
        codes = np.asarray(codes, dtype=np.uint64)
        if self.sigma == 0.0:
            return np.zeros(codes.shape)
        return gaussian_field(self.key, codes, self.sigma)


def noisy_log_psi(params, x: SpinConfiguration, noise: NoiseField) -> complex:
    """log psi(x) + zeta(x)/2; the induced log-density error is exactly zeta."""
    zeta = noise.zeta(np.asarray([x.code], dtype=np.uint64))[0]
    return log_psi(params, x) + 0.5 * zeta


def log_prob_evaluator(params, fmt=F64, mode=RoundingMode.PER_OPERATION):
    """Batch log-probability callable for the sampler; parameters are
    downcast once at construction."""
    if fmt.name == "f64":

        def evaluate(bits):
            bits = np.atleast_2d(np.asarray(bits))
            out = 2.0 * _fast_forward(params, bits).real
            _check_finite(out, bits, "log probability")
            return out

        return evaluate

    if mode is RoundingMode.STORAGE_ONLY:
        snapshot = round_parameters(params, fmt)

        def evaluate(bits):
            bits = np.atleast_2d(np.asarray(bits))
            out = 2.0 * _fast_forward(snapshot, bits).real
            _check_finite(out, bits, "log probability")
            return out

        return evaluate

    prepared = _PreparedRounded(params, fmt)
    if prepared.use_kernel:
        a_re, a_im, b_re, b_im, w_re, w_im, spl, mn, iq, qq, maxf = prepared.kernel_args

        def evaluate(bits):
            bits = np.ascontiguousarray(np.atleast_2d(np.asarray(bits)), dtype=np.uint8)
            out = _kernels.rounded_log_prob(
                bits, a_re, b_re, b_im, w_re, w_im, spl, mn, iq, qq, maxf
            )
            _check_finite(out, bits, "log probability")
            return out

        return evaluate

    def evaluate(bits):
        bits = np.atleast_2d(np.asarray(bits))
        _, out = _rounded_forward(prepared, bits)
        _check_finite(out, bits, "log probability")
        return out

    return evaluate


def noisy_log_prob_evaluator(params, noise: NoiseField):
    """float64 log-probability plus the frozen noise field."""

    def evaluate(bits):
        bits = np.atleast_2d(np.asarray(bits))
        base = 2.0 * _fast_forward(params, bits).real
        return base + noise.zeta(bits_to_codes(bits))

    return evaluate


def log_psi_evaluator(params):
    """Batch float64 log-amplitude callable (for local energies)."""

    def evaluate(bits):
        return log_psi_batch(params, bits, F64)

    return evaluate


@dataclass(frozen=True)
class DeltaSummary:
    """Moments of delta over the enumerated space plus its Shapiro-Wilk W."""

    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    shapiro_wilk_w: float
    shapiro_n: int


def delta_distribution(params, fmt, mode, lattice_spec):
    """delta(x) = log p_fmt(x) - log p_f64(x) over the full enumeration.

    Returns (DeltaSummary, delta vector).  The Shapiro-Wilk statistic is
    computed on the standardized sample, deterministically subsampled to 5000
    points when the enumeration is larger.
    """
    from .normality import shapiro_wilk, standardize

    n = lattice_spec.n_sites
    bits = enumerate_bits(n)
    reference = log_prob_batch(params, bits, F64)
    perturbed = log_prob_batch(params, bits, fmt, mode)
    delta = perturbed - reference
    mean = float(delta.mean())
    std = float(delta.std())
    if std == 0.0:
        return DeltaSummary(mean, 0.0, 0.0, 0.0, float("nan"), 0), delta
    z = standardize(delta)
    skewness = float((z**3).mean())
    kurtosis = float((z**4).mean() - 3.0)
    sample = z
    if sample.size > 5000:
        order = np.argsort(counter_uniform(derive_key(0, "sw-subsample"), np.arange(sample.size)))
        sample = sample[order[:5000]]
    report = shapiro_wilk(sample)
    summary = DeltaSummary(mean, std, skewness, kurtosis, report.w, report.n)
    return summary, delta


def precision_delta(params, fmt, mode, bits) -> np.ndarray:
    """delta on an arbitrary batch (used for per-step sigma estimates)."""
    return log_prob_batch(params, bits, fmt, mode) - log_prob_batch(params, bits, F64)


def all_codes_bits(n):
    return enumerate_bits(n)


def delta_for_noise(params, noise: NoiseField, n: int) -> np.ndarray:
    """delta induced by a frozen noise field over the full enumeration."""
    codes = np.arange(1 << n, dtype=np.uint64)
    return noise.zeta(codes)


def bits_for_codes(codes, n):
    return codes_to_bits(codes, n)
