"""Software emulation of reduced-precision floating-point formats.

All emulation runs in float64 internally and quantizes with round-to-nearest,
ties-to-even.  Values that exceed a format's largest finite value map to
+-inf; subnormals are kept when the format supports them and flushed to zero
otherwise.  Two evaluation modes are exposed: storage-only (round inputs and
constants once, compute in float64) and per-operation (round after every
elementary operation, the faithful model of a low-precision forward pass).
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationFailureError


@dataclass(frozen=True)
class FloatFormat:
    """An (exponent bits, significand bits) pair; significand_bits excludes
    the implicit leading 1."""

    name: str
    exponent_bits: int
    significand_bits: int
    supports_subnormals: bool = True

    def __post_init__(self):
        if self.exponent_bits < 2 or self.significand_bits < 1:
            raise ValueError("need >= 2 exponent bits and >= 1 significand bit")
        if self.exponent_bits > 11 or self.significand_bits > 52:
            raise ValueError("formats wider than float64 cannot be emulated")

    @property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @property
    def max_exponent(self) -> int:
        return self.bias

    @property
    def min_exponent(self) -> int:
        return 1 - self.bias

    @property
    def max_finite(self) -> float:
        return (2.0 - 2.0 ** -self.significand_bits) * 2.0 ** self.max_exponent

    @property
    def min_normal(self) -> float:
        return 2.0 ** self.min_exponent

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** -(self.significand_bits + 1)


BF16 = FloatFormat("bf16", 8, 7)
F16 = FloatFormat("f16", 5, 10)
F32 = FloatFormat("f32", 8, 23)
F64 = FloatFormat("f64", 11, 52)

FORMATS = {fmt.name: fmt for fmt in (BF16, F16, F32, F64)}

_CUSTOM_RE = re.compile(r"^e(\d+)m(\d+)$")


def parse_format(name: str) -> FloatFormat:
    """Resolve a format name: one of f64/f32/f16/bf16 or custom e<E>m<M>."""
    if name in FORMATS:
        return FORMATS[name]
    match = _CUSTOM_RE.match(name)
    if match:
        return FloatFormat(name, int(match.group(1)), int(match.group(2)))
    raise ValueError(f"unknown float format {name!r}")


def relative_roundoff(fmt: FloatFormat) -> float:
    """Unit roundoff 2^-(significand_bits + 1)."""
    return fmt.unit_roundoff


def _quantize(values: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    """Branch-free round-to-nearest-even quantization of float64 arrays."""
    with np.errstate(all="ignore"):
        _, exponents = np.frexp(values)
        eu = np.maximum(exponents - 1, fmt.min_exponent)
        quantum = np.ldexp(1.0, eu - fmt.significand_bits)
        rounded = np.rint(values / quantum) * quantum
        if not fmt.supports_subnormals:
            rounded = np.where(
                np.abs(rounded) < fmt.min_normal, 0.0 * rounded, rounded
            )
        return np.where(
            np.abs(rounded) > fmt.max_finite,
            np.copysign(np.inf, rounded),
            rounded,
        )


def make_rounder(fmt: FloatFormat):
    """Array-in/array-out rounding callable with per-format fast paths.

    The f16/f32 numpy casts implement exactly round-to-nearest-even from
    float64 (verified against the generic quantizer in the test suite).
    """
    if fmt.name == "f64":
        return lambda a: a
    if fmt.name == "f32":

        def round_f32(a):
            # overflow-to-inf is intended; hot callers hold an errstate
            return np.asarray(a, dtype=np.float64).astype(np.float32).astype(np.float64)

        return round_f32
    if fmt.name == "f16":

        def round_f16(a):
            return np.asarray(a, dtype=np.float64).astype(np.float16).astype(np.float64)

        return round_f16

    def round_generic(a):
        return _quantize(np.asarray(a, dtype=np.float64), fmt)

    return round_generic


def round_to_format(value, fmt: FloatFormat):
    """Nearest representable value in fmt (ties to even); idempotent.

    Accepts scalars or arrays; overflow beyond the largest finite value
    returns +-inf (use round_to_format_ex for the overflow flag).
    """
    arr = np.asarray(value, dtype=np.float64)
    out = _quantize(arr, fmt)
    if np.isscalar(value) or arr.ndim == 0:
        return float(out)
    return out


def round_to_format_ex(value, fmt: FloatFormat):
    """Like round_to_format but also returns the overflow flag(s)."""
    arr = np.asarray(value, dtype=np.float64)
    out = _quantize(arr, fmt)
    overflow = np.isinf(out) & np.isfinite(arr)
    if np.isscalar(value) or arr.ndim == 0:
        return float(out), bool(overflow)
    return out, overflow


class RoundingMode(enum.Enum):
    """Where rounding is applied during expression evaluation."""

    STORAGE_ONLY = "storage_only"
    PER_OPERATION = "per_operation"


def parse_rounding_mode(name: str) -> RoundingMode:
    for mode in RoundingMode:
        if mode.value == name:
            return mode
    raise ValueError(f"unknown rounding mode {name!r}")


# Expression plans: a fixed sequence of elementary operations over a register
# file.  Registers 0..n_inputs-1 hold the inputs; each instruction appends one
# result register (clogcosh appends two: real then imaginary part).

_UNARY = {
    "tanh": math.tanh,
    "exp": math.exp,
    "logcosh": lambda x: abs(x) - math.log(2.0) + math.log1p(math.exp(-2.0 * abs(x))),
    "neg": lambda x: -x,
}

_BINARY = {
    "add": lambda x, y: x + y,
    "sub": lambda x, y: x - y,
    "mul": lambda x, y: x * y,
}


def _clogcosh(re_part, im_part):
    """log cosh of a complex number as one elementary operation (principal
    branch), numerically stable for large |Re|."""
    u = abs(re_part)
    v = im_part if re_part >= 0 else -im_part
    t = math.exp(-2.0 * u)
    wr = (1.0 + t) * math.cos(v)
    wi = (1.0 - t) * math.sin(v)
    return (
        u - math.log(2.0) + 0.5 * math.log(wr * wr + wi * wi),
        math.atan2(wi, wr),
    )


@dataclass(frozen=True)
class ExpressionPlan:
    """A straight-line program over float64 registers.

    ops is a tuple of (kind, arg_indices...) tuples where kind is one of
    const, add, sub, mul, tanh, exp, logcosh, neg, clogcosh.  For const the
    single argument is the literal value.  outputs names the registers whose
    final values are returned.
    """

    n_inputs: int
    ops: tuple
    outputs: tuple


def evaluate_rounded(plan: ExpressionPlan, inputs, fmt: FloatFormat, mode: RoundingMode):
    """Execute a plan under the given format and rounding mode.

    Per-operation mode rounds every loaded input, constant, and intermediate;
    storage-only mode rounds inputs and constants once and computes in
    float64.  NaN at any step raises EvaluationFailureError naming the
    offending operation index.
    """
    inputs = [float(v) for v in inputs]
    if len(inputs) != plan.n_inputs:
        raise ValueError(f"plan expects {plan.n_inputs} inputs, got {len(inputs)}")
    rnd = make_rounder(fmt)

    def scalar_round(value):
        return float(rnd(np.float64(value)))

    regs = [scalar_round(v) for v in inputs]
    per_op = mode is RoundingMode.PER_OPERATION

    def push(value, index):
        if per_op:
            value = scalar_round(value)
        if math.isnan(value):
            raise EvaluationFailureError(
                f"NaN produced at operation {index}", context={"op_index": index}
            )
        regs.append(value)

    for index, op in enumerate(plan.ops):
        kind = op[0]
        if kind == "const":
            push(scalar_round(float(op[1])), index)
        elif kind in _BINARY:
            push(_BINARY[kind](regs[op[1]], regs[op[2]]), index)
        elif kind in _UNARY:
            push(_UNARY[kind](regs[op[1]]), index)
        elif kind == "clogcosh":
            re_out, im_out = _clogcosh(regs[op[1]], regs[op[2]])
            push(re_out, index)
            push(im_out, index)
        else:
            raise ValueError(f"unknown op kind {kind!r}")

    results = tuple(regs[i] for i in plan.outputs)
    return results[0] if len(results) == 1 else results


def dot_product_plan(n: int) -> ExpressionPlan:
    """Left-to-right accumulated dot product of two length-n vectors.

    Inputs are laid out as x_0..x_{n-1}, y_0..y_{n-1}.
    """
    ops = []
    next_reg = 2 * n
    acc = None
    for k in range(n):
        ops.append(("mul", k, n + k))
        prod = next_reg
        next_reg += 1
        if acc is None:
            acc = prod
        else:
            ops.append(("add", acc, prod))
            acc = next_reg
            next_reg += 1
    return ExpressionPlan(2 * n, tuple(ops), (acc,))


def rbm_log_prob_plan(n_visible: int, n_hidden: int) -> ExpressionPlan:
    """Canonical per-operation evaluation order of the RBM log-probability.

    Inputs: bits x_0..x_{N-1}, then Re a, Im a (N each), Re b, Im b (M each),
    then W row-major as Re W_ik, Im W_ik pairs.  Output is
    2*Re[a.x + sum_i log cosh((Wx + b)_i)].  The accumulation order (visible
    term over k ascending; each theta_i over k ascending; hidden sum over i
    ascending) is the order the batched evaluator replicates.
    """
    N, M = n_visible, n_hidden
    x0 = 0
    ar0, ai0 = N, 2 * N
    br0, bi0 = 3 * N, 3 * N + M
    w0 = 3 * N + 2 * M
    n_inputs = 3 * N + 2 * M + 2 * M * N
    ops = []
    next_reg = n_inputs

    def emit(op):
        nonlocal next_reg
        ops.append(op)
        result = next_reg
        next_reg += 1
        return result

    def accumulate(acc, term):
        return emit(("add", acc, term)) if acc is not None else term

    vis_re = vis_im = None
    for k in range(N):
        vis_re = accumulate(vis_re, emit(("mul", ar0 + k, x0 + k)))
        vis_im = accumulate(vis_im, emit(("mul", ai0 + k, x0 + k)))

    hid_re = hid_im = None
    for i in range(M):
        th_re, th_im = br0 + i, bi0 + i
        for k in range(N):
            th_re = emit(("add", th_re, emit(("mul", w0 + 2 * (i * N + k), x0 + k))))
            th_im = emit(
                ("add", th_im, emit(("mul", w0 + 2 * (i * N + k) + 1, x0 + k)))
            )
        ops.append(("clogcosh", th_re, th_im))
        lc_re = next_reg
        next_reg += 2
        hid_re = accumulate(hid_re, lc_re)
        hid_im = accumulate(hid_im, lc_re + 1)

    total_re = emit(("add", vis_re, hid_re))
    two = emit(("const", 2.0))
    log_prob = emit(("mul", two, total_re))
    total_im = emit(("add", vis_im, hid_im))
    return ExpressionPlan(n_inputs, tuple(ops), (log_prob, total_re, total_im))


def rbm_plan_inputs(bits, a, b, w) -> list:
    """Flatten RBM bits and complex parameters into rbm_log_prob_plan order."""
    inputs = [float(v) for v in bits]
    inputs += [float(v) for v in np.real(a)]
    inputs += [float(v) for v in np.imag(a)]
    inputs += [float(v) for v in np.real(b)]
    inputs += [float(v) for v in np.imag(b)]
    for row in np.asarray(w):
        for entry in row:
            inputs.append(float(entry.real))
            inputs.append(float(entry.imag))
    return inputs
