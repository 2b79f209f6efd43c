import numpy as np
import pytest
import scipy.stats

from mpvmc.errors import EvaluationFailureError
from mpvmc.lattice import LatticeSpec, SpinConfiguration, enumerate_bits, enumerate_states
from mpvmc.precision import (
    BF16,
    F16,
    F32,
    F64,
    RoundingMode,
    evaluate_rounded,
    rbm_log_prob_plan,
    rbm_plan_inputs,
)
from mpvmc import rbm
from mpvmc.rng import derive_key


def random_params(n, alpha=1, seed=0, scale=0.5):
    return rbm.random_parameters(n, alpha, derive_key(seed, "params"), scale)


class TestParameters:
    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            rbm.RbmParameters(np.zeros(3), np.zeros(3), np.zeros((2, 3)))

    def test_finite_validation(self):
        a = np.zeros(2, dtype=complex)
        a[0] = np.nan
        with pytest.raises(ValueError):
            rbm.RbmParameters(a, np.zeros(2), np.zeros((2, 2)))

    def test_alpha_density(self):
        params = random_params(4, alpha=2)
        assert params.alpha_density == 2
        assert params.n_hidden == 8

    def test_flatten_roundtrip(self):
        params = random_params(3, alpha=1)
        again = rbm.RbmParameters.from_flat(params.flatten(), 3, 3)
        assert np.array_equal(again.a, params.a)
        assert np.array_equal(again.w, params.w)

    def test_save_load_roundtrip(self, tmp_path):
        params = random_params(4)
        path = tmp_path / "params.json"
        rbm.save_parameters(params, path)
        loaded = rbm.load_parameters(path)
        assert np.array_equal(loaded.a, params.a)
        assert np.array_equal(loaded.b, params.b)
        assert np.array_equal(loaded.w, params.w)


class TestLogPsi:
    def test_zero_params_zero_everywhere(self):
        params = rbm.RbmParameters(
            np.zeros(4, dtype=complex), np.zeros(4, dtype=complex), np.zeros((4, 4), dtype=complex)
        )
        for x in enumerate_states(4):
            assert rbm.log_psi(params, x) == 0.0

    def test_x_independent_when_w_and_a_zero(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=3) + 1j * rng.normal(size=3)
        params = rbm.RbmParameters(np.zeros(3, dtype=complex), b, np.zeros((3, 3), dtype=complex))
        values = {rbm.log_psi(params, x) for x in enumerate_states(3)}
        assert len(values) == 1
        expected = np.sum(np.log(np.cosh(b)))
        got = values.pop()
        assert got == pytest.approx(expected, abs=1e-12)

    def test_matches_independent_summation_order(self):
        # independent oracle: reversed-order mpmath-free evaluation in python
        params = random_params(6, seed=3)
        bits = enumerate_bits(6)[37]
        got = rbm.log_psi(params, SpinConfiguration.from_bits(bits))
        x = bits.astype(float)
        theta = [complex(params.b[i]) for i in range(6)]
        for i in range(6):
            for k in reversed(range(6)):
                theta[i] += complex(params.w[i, k]) * x[k]
        total = complex(0)
        for i in reversed(range(6)):
            z = theta[i]
            total += np.log(np.cosh(z))
        for k in reversed(range(6)):
            total += complex(params.a[k]) * x[k]
        assert abs(got - total) <= 1e-13 * max(1.0, abs(total))

    def test_log_prob_identity(self):
        params = random_params(5, seed=1)
        bits = enumerate_bits(5)
        lp = rbm.log_prob_batch(params, bits)
        psi = rbm.log_psi_batch(params, bits)
        assert np.allclose(lp, 2.0 * psi.real, atol=1e-14)
        # exp(log_prob) proportional to |exp(log_psi)|^2
        assert np.allclose(np.exp(lp), np.abs(np.exp(psi)) ** 2, rtol=1e-12)

    def test_phase_only_state_is_uniform(self):
        rng = np.random.default_rng(2)
        a = 1j * rng.normal(size=4)
        params = rbm.RbmParameters(a, np.zeros(4, dtype=complex), np.zeros((4, 4), dtype=complex))
        lp = rbm.log_prob_batch(params, enumerate_bits(4))
        assert np.allclose(lp, 0.0, atol=1e-14)

    def test_hidden_unit_permutation_symmetry(self):
        params = random_params(5, seed=4)
        perm = np.array([3, 0, 4, 1, 2])
        permuted = rbm.RbmParameters(params.a, params.b[perm], params.w[perm])
        bits = enumerate_bits(5)
        assert np.allclose(
            rbm.log_psi_batch(params, bits),
            rbm.log_psi_batch(permuted, bits),
            atol=1e-12,
        )

    def test_evaluation_failure_reports_configuration(self):
        big = rbm.RbmParameters(
            np.full(2, 1e308, dtype=complex), np.zeros(2, dtype=complex), np.zeros((2, 2), dtype=complex)
        )
        with pytest.raises(EvaluationFailureError):
            rbm.log_psi(big, SpinConfiguration.from_bits([1, 1]))


class TestRoundedForward:
    def test_batch_matches_plan_bitwise(self):
        params = random_params(4, seed=5)
        plan = rbm_log_prob_plan(4, 4)
        bits = enumerate_bits(4)
        for fmt in (BF16, F16, F32):
            batch_lp = rbm.log_prob_batch(params, bits, fmt, RoundingMode.PER_OPERATION)
            batch_psi = rbm.log_psi_batch(params, bits, fmt, RoundingMode.PER_OPERATION)
            for row, lp_got, psi_got in zip(bits, batch_lp, batch_psi):
                inputs = rbm_plan_inputs(row, params.a, params.b, params.w)
                lp, re, im = evaluate_rounded(plan, inputs, fmt, RoundingMode.PER_OPERATION)
                assert lp == lp_got
                assert complex(re, im) == psi_got

    def test_f64_mode_is_reference(self):
        params = random_params(5, seed=6)
        bits = enumerate_bits(5)
        for mode in RoundingMode:
            assert np.array_equal(
                rbm.log_psi_batch(params, bits, F64, mode),
                rbm.log_psi_batch(params, bits),
            )

    def test_storage_mode_equals_rounded_params_reference(self):
        params = random_params(5, seed=7)
        bits = enumerate_bits(5)
        got = rbm.log_psi_batch(params, bits, BF16, RoundingMode.STORAGE_ONLY)
        expected = rbm.log_psi_batch(rbm.round_parameters(params, BF16), bits)
        assert np.array_equal(got, expected)

    def test_deterministic(self):
        params = random_params(6, seed=8)
        bits = enumerate_bits(6)
        one = rbm.log_prob_batch(params, bits, F16, RoundingMode.PER_OPERATION)
        two = rbm.log_prob_batch(params, bits, F16, RoundingMode.PER_OPERATION)
        assert np.array_equal(one, two)


class TestGradLogPsi:
    def test_zero_params_all_ones_input(self):
        params = rbm.RbmParameters(
            np.zeros(3, dtype=complex), np.zeros(3, dtype=complex), np.zeros((3, 3), dtype=complex)
        )
        o = rbm.grad_log_psi(params, SpinConfiguration.from_bits([1, 1, 1]))
        assert np.array_equal(o[:3], np.ones(3))
        assert np.array_equal(o[3:], np.zeros(12))

    def test_zero_input_kills_a_and_w(self):
        params = random_params(3, seed=9)
        o = rbm.grad_log_psi(params, SpinConfiguration.from_bits([0, 0, 0]))
        assert np.array_equal(o[:3], np.zeros(3))
        assert np.array_equal(o[6:], np.zeros(9))

    def test_finite_differences(self):
        params = random_params(4, alpha=1, seed=10, scale=0.3)
        x = SpinConfiguration.from_bits([1, 0, 1, 1])
        o = rbm.grad_log_psi(params, x)
        theta = params.flatten()
        step = 1e-6
        for k in range(theta.size):
            for direction in (1.0, 1j):
                plus = theta.copy()
                minus = theta.copy()
                plus[k] += step * direction
                minus[k] -= step * direction
                fd = (
                    rbm.log_psi(rbm.RbmParameters.from_flat(plus, 4, 4), x)
                    - rbm.log_psi(rbm.RbmParameters.from_flat(minus, 4, 4), x)
                ) / (2 * step * direction)
                assert abs(fd - o[k]) <= 1e-6 * max(1.0, abs(o[k]))


class TestNoise:
    def test_sigma_zero_identity(self):
        params = random_params(4, seed=11)
        noise = rbm.NoiseField(0.0, seed=1)
        x = SpinConfiguration.from_bits([1, 0, 0, 1])
        assert rbm.noisy_log_psi(params, x, noise) == rbm.log_psi(params, x)

    def test_bitwise_deterministic(self):
        params = random_params(4, seed=12)
        noise = rbm.NoiseField(0.7, seed=2)
        x = SpinConfiguration.from_bits([0, 1, 1, 0])
        assert rbm.noisy_log_psi(params, x, noise) == rbm.noisy_log_psi(params, x, noise)

    def test_delta_std_in_band(self):
        noise = rbm.NoiseField(0.5, seed=3)
        delta = rbm.delta_for_noise(random_params(10), noise, 10)
        assert 0.4 <= delta.std() <= 0.6

    def test_log_density_error_is_zeta(self):
        params = random_params(4, seed=13)
        noise = rbm.NoiseField(0.5, seed=4)
        evaluator = rbm.noisy_log_prob_evaluator(params, noise)
        bits = enumerate_bits(4)
        base = rbm.log_prob_batch(params, bits)
        zeta = noise.zeta(np.arange(16, dtype=np.uint64))
        assert np.allclose(evaluator(bits) - base, zeta, atol=1e-12)

    def test_ks_against_normal(self):
        noise = rbm.NoiseField(1.0, seed=5)
        delta = noise.zeta(np.arange(1 << 11, dtype=np.uint64))
        p_value = scipy.stats.kstest(delta, "norm").pvalue
        assert p_value >= 0.01


class TestDeltaDistribution:
    def test_f64_delta_zero(self):
        params = random_params(6, seed=14)
        summary, delta = rbm.delta_distribution(
            params, F64, RoundingMode.PER_OPERATION, LatticeSpec.chain(6)
        )
        assert summary.std == 0.0
        assert np.array_equal(delta, np.zeros(64))

    def test_f32_std_below_bf16(self):
        params = random_params(8, seed=15)
        lattice = LatticeSpec.chain(8)
        summary32, _ = rbm.delta_distribution(params, F32, RoundingMode.PER_OPERATION, lattice)
        summary16, _ = rbm.delta_distribution(params, BF16, RoundingMode.PER_OPERATION, lattice)
        assert 0.0 < summary32.std < summary16.std

    def test_std_below_one_f16(self):
        params = random_params(12, alpha=1, seed=16, scale=0.05)
        summary, delta = rbm.delta_distribution(
            params, F16, RoundingMode.PER_OPERATION, LatticeSpec.chain(12)
        )
        assert delta.size == 4096
        assert summary.std < 1.0
        assert np.isfinite(summary.shapiro_wilk_w)
