import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpvmc.errors import EvaluationFailureError
from mpvmc.precision import (
    BF16,
    F16,
    F32,
    F64,
    FloatFormat,
    RoundingMode,
    dot_product_plan,
    evaluate_rounded,
    make_rounder,
    parse_format,
    relative_roundoff,
    round_to_format,
    round_to_format_ex,
)

FORMATS = [BF16, F16, F32, F64]


class TestFormatTable:
    def test_builtin_fields(self):
        assert (BF16.exponent_bits, BF16.significand_bits) == (8, 7)
        assert (F16.exponent_bits, F16.significand_bits) == (5, 10)
        assert (F32.exponent_bits, F32.significand_bits) == (8, 23)
        assert (F64.exponent_bits, F64.significand_bits) == (11, 52)

    def test_roundoff_values(self):
        assert relative_roundoff(F32) == pytest.approx(5.96e-8, rel=1e-2)
        assert relative_roundoff(F64) == pytest.approx(1.11e-16, rel=1e-2)
        assert relative_roundoff(BF16) == pytest.approx(3.91e-3, rel=1e-2)
        # 10 stored significand bits give 2^-11; the often-quoted 4.88e-5 for
        # f16 is off by a factor of ten
        assert relative_roundoff(F16) == 2.0**-11

    def test_parse(self):
        assert parse_format("f16") is F16
        custom = parse_format("e5m2")
        assert (custom.exponent_bits, custom.significand_bits) == (5, 2)
        with pytest.raises(ValueError):
            parse_format("f8")

    def test_f16_range_matches_ieee(self):
        assert F16.max_finite == 65504.0
        assert F16.min_normal == 2.0**-14


class TestRoundToFormat:
    def test_exactly_representable(self):
        assert round_to_format(1.0, F16) == 1.0

    def test_below_half_ulp(self):
        assert round_to_format(1.0 + 2.0**-12, F16) == 1.0

    def test_bf16_tenth(self):
        assert round_to_format(0.1, BF16) == 0.10009765625

    def test_f16_overflow_flag(self):
        value, flag = round_to_format_ex(70000.0, F16)
        assert value == math.inf and flag
        value, flag = round_to_format_ex(-70000.0, F16)
        assert value == -math.inf and flag
        _, flag = round_to_format_ex(1.0, F16)
        assert not flag

    def test_inf_passthrough_not_flagged(self):
        value, flag = round_to_format_ex(math.inf, F16)
        assert value == math.inf and not flag

    def test_matches_numpy_casts(self):
        # independent softfloat oracle: numpy's float16/float32 conversions
        rng = np.random.default_rng(11)
        base = rng.uniform(-7e4, 7e4, 50000)
        half = base.astype(np.float16).astype(np.float64)
        with np.errstate(all="ignore"):
            ulp = np.spacing(np.abs(half).astype(np.float16)).astype(np.float64)
        mids = half + 0.5 * ulp
        tiny = rng.uniform(-1e-6, 1e-6, 20000)
        values = np.concatenate([base, mids, mids * (1 + 2**-48), tiny])
        with np.errstate(over="ignore"):
            expected = values.astype(np.float16).astype(np.float64)
        got = round_to_format(values, F16)
        assert np.array_equal(got, expected, equal_nan=True)
        values32 = np.concatenate(
            [rng.uniform(-3e38, 3e38, 30000), rng.normal(0, 1, 30000)]
        )
        with np.errstate(over="ignore"):
            expected32 = values32.astype(np.float32).astype(np.float64)
        assert np.array_equal(round_to_format(values32, F32), expected32)

    def test_fast_paths_match_generic(self):
        rng = np.random.default_rng(5)
        values = np.concatenate(
            [rng.normal(0, 100, 20000), rng.normal(0, 1e-5, 20000), [0.0, -0.0]]
        )
        for fmt in (F16, F32):
            fast = make_rounder(fmt)(values)
            generic = round_to_format(values, fmt)
            assert np.array_equal(fast, generic)

    def test_f64_identity(self):
        rng = np.random.default_rng(7)
        values = rng.normal(0, 1e10, 1000)
        assert np.array_equal(round_to_format(values, F64), values)

    def test_subnormals(self):
        assert round_to_format(2.0**-15, F16) == 2.0**-15
        assert round_to_format(2.0**-25, F16) == 0.0  # half of min subnormal, ties to even
        assert round_to_format(1.5 * 2.0**-25, F16) == 2.0**-24

    def test_flush_to_zero_format(self):
        ftz = FloatFormat("e5m10ftz", 5, 10, supports_subnormals=False)
        assert round_to_format(2.0**-15, ftz) == 0.0
        assert round_to_format(2.0**-14, ftz) == 2.0**-14

    @given(
        st.floats(allow_nan=False, allow_infinity=False, width=64),
        st.sampled_from(FORMATS),
    )
    @settings(max_examples=300)
    def test_idempotent(self, value, fmt):
        once = round_to_format(value, fmt)
        assert round_to_format(once, fmt) == once or math.isinf(once)

    @given(
        st.floats(-1e30, 1e30),
        st.floats(-1e30, 1e30),
        st.sampled_from(FORMATS),
    )
    @settings(max_examples=300)
    def test_monotone(self, a, b, fmt):
        lo, hi = min(a, b), max(a, b)
        assert round_to_format(lo, fmt) <= round_to_format(hi, fmt)

    @given(st.floats(-1e3, 1e3), st.sampled_from([BF16, F16, F32]))
    @settings(max_examples=300)
    def test_relative_error_bound(self, value, fmt):
        if abs(value) < fmt.min_normal:
            return
        rounded = round_to_format(value, fmt)
        assert abs(rounded - value) <= fmt.unit_roundoff * abs(value)


class TestEvaluateRounded:
    def test_f64_bitwise_reference(self):
        plan = dot_product_plan(8)
        rng = np.random.default_rng(0)
        x = rng.normal(size=8)
        y = rng.normal(size=8)
        reference = 0.0
        for k in range(8):
            reference = reference + x[k] * y[k]
        for mode in RoundingMode:
            assert evaluate_rounded(plan, [*x, *y], F64, mode) == reference

    def test_single_multiply_bf16(self):
        plan = dot_product_plan(1)
        got = evaluate_rounded(
            plan, [3.0, 1.0 / 3.0], BF16, RoundingMode.PER_OPERATION
        )
        r3 = round_to_format(3.0, BF16)
        r13 = round_to_format(1.0 / 3.0, BF16)
        assert got == round_to_format(r3 * r13, BF16)

    def test_storage_mode_rounds_inputs_only(self):
        plan = dot_product_plan(1)
        got = evaluate_rounded(plan, [3.0, 1.0 / 3.0], BF16, RoundingMode.STORAGE_ONLY)
        assert got == round_to_format(3.0, BF16) * round_to_format(1.0 / 3.0, BF16)

    def test_dot_forward_error_bound(self):
        # classical bound |fl(dot) - dot| <= gamma_n sum |x_k y_k|
        rng = np.random.default_rng(42)
        n = 256
        x = rng.uniform(-1, 1, n)
        y = rng.uniform(-1, 1, n)
        plan = dot_product_plan(n)
        got = evaluate_rounded(plan, [*x, *y], F16, RoundingMode.PER_OPERATION)
        exact = float(np.dot(x, y))
        u = F16.unit_roundoff
        gamma = (n + 1) * u / (1 - (n + 1) * u)
        running = np.abs(
            round_to_format(x, F16) * round_to_format(y, F16)
        ).sum()
        assert abs(got - exact) <= gamma * running + n * u * np.abs(x * y).sum()

    def test_nan_reports_op_index(self):
        plan = dot_product_plan(1)
        with pytest.raises(EvaluationFailureError) as err:
            evaluate_rounded(plan, [math.inf, 0.0], F64, RoundingMode.PER_OPERATION)
        assert err.value.context["op_index"] == 0

    def test_deterministic(self):
        plan = dot_product_plan(16)
        rng = np.random.default_rng(1)
        inputs = rng.normal(size=32)
        first = evaluate_rounded(plan, inputs, BF16, RoundingMode.PER_OPERATION)
        second = evaluate_rounded(plan, inputs, BF16, RoundingMode.PER_OPERATION)
        assert first == second
