"""Variational Monte Carlo engine: local energies, forces, the quantum
geometric tensor, stochastic-reconfiguration updates, the two-copy
mixed-precision training loop, and the gradient-precision diagnostics.

The training loop keeps a float64 master copy of the parameters; each step it
publishes an immutable downcast snapshot to the sampler, collects samples
through the reduced-precision evaluator, and computes local energies,
gradients, forces, and the S-matrix in float64 on the master copy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - threadpoolctl ships with numpy stacks
    import contextlib

    def threadpool_limits(*_args, **_kwargs):
        return contextlib.nullcontext()

from . import rbm
from .bounds import pinsker_tv_bound, theorem3_gaussian_bound
from .errors import DegenerateInputError, EvaluationFailureError, SolverError
from .hamiltonians import HeisenbergSpec, TfimSpec, connected_elements
from .lattice import enumerate_bits
from .precision import F64, FloatFormat, RoundingMode, make_rounder
from .rng import derive_key
from .sampler import ChainEnsemble, Proposal, default_chain_count

F16_MIN_NORMAL = 2.0**-14
F16_MIN_SUBNORMAL = 2.0**-24
F16_MAX = 65504.0


@dataclass(frozen=True)
class LocalEnergySample:
    """One sampled configuration with its local energy and gradient row."""

    bits: np.ndarray
    epsilon: complex
    o_vector: np.ndarray


def _diagonal_energy(spec, bits: np.ndarray) -> np.ndarray:
    spins = 1.0 - 2.0 * bits.astype(np.float64)
    bonds = spec.lattice.bond_array()
    if not bonds.size:
        return np.zeros(bits.shape[0])
    return spec.j * (spins[:, bonds[:, 0]] * spins[:, bonds[:, 1]]).sum(axis=1)


def local_energies(spec, log_amplitude, bits) -> np.ndarray:
    """eps(x) = sum_{x' in C(x)} H(x, x') exp(log psi(x') - log psi(x)),
    vectorized over a (S, N) bit matrix; log_amplitude maps bit matrices to
    complex log psi values in float64."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    n_samples, n = bits.shape
    base = np.asarray(log_amplitude(bits))
    eps = _diagonal_energy(spec, bits).astype(np.complex128)
    if isinstance(spec, TfimSpec):
        if spec.h != 0.0:
            flipped = np.repeat(bits[:, None, :], n, axis=1)
            sites = np.arange(n)
            flipped[:, sites, sites] ^= 1
            flat = log_amplitude(flipped.reshape(n_samples * n, n)).reshape(
                n_samples, n
            )
            with np.errstate(over="raise"):
                try:
                    ratios = np.exp(flat - base[:, None])
                except FloatingPointError as err:
                    raise EvaluationFailureError(
                        "overflow in amplitude ratio", context={"spec": spec}
                    ) from err
            eps = eps + spec.h * ratios.sum(axis=1)
    elif isinstance(spec, HeisenbergSpec):
        bonds = spec.lattice.bond_array()
        for i, k in bonds:
            differ = bits[:, i] != bits[:, k]
            if not differ.any():
                continue
            swapped = bits[differ].copy()
            swapped[:, [i, k]] = swapped[:, [k, i]]
            partial = np.asarray(log_amplitude(swapped))
            with np.errstate(over="raise"):
                try:
                    ratios = np.exp(partial - base[differ])
                except FloatingPointError as err:
                    raise EvaluationFailureError(
                        "overflow in amplitude ratio", context={"bond": (i, k)}
                    ) from err
            eps[differ] += 2.0 * spec.j * ratios
    else:
        raise TypeError(f"unknown Hamiltonian spec {type(spec).__name__}")
    if not np.isfinite(eps.view(np.float64)).all():
        bad = int(np.argmin(np.isfinite(eps.real) & np.isfinite(eps.imag)))
        raise EvaluationFailureError(
            "non-finite local energy", context={"bits": bits[bad].copy()}
        )
    return eps


def local_energy(spec, log_amplitude, x) -> complex:
    return complex(local_energies(spec, log_amplitude, x.bits()[None, :])[0])


def lookup_log_amplitude(psi, n: int):
    """Log-amplitude evaluator backed by a dense real state vector (e.g. the
    exact ground state); negative entries carry phase i*pi."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.size != 1 << n:
        raise ValueError("state vector must have 2^n entries")
    from .lattice import bits_to_codes

    with np.errstate(divide="ignore"):
        log_mod = np.log(np.abs(psi))
    phase = np.where(psi < 0, np.pi, 0.0)

    def evaluate(bits):
        codes = bits_to_codes(bits).astype(np.int64)
        return log_mod[codes] + 1j * phase[codes]

    return evaluate


def _as_arrays(samples):
    """Accept either a list of LocalEnergySample or an (o, eps) pair."""
    if isinstance(samples, (list, tuple)) and samples and isinstance(
        samples[0], LocalEnergySample
    ):
        o = np.stack([s.o_vector for s in samples])
        eps = np.array([s.epsilon for s in samples], dtype=np.complex128)
        return o, eps
    raise TypeError("expected a list of LocalEnergySample; use forces(o=..., eps=...)")


def forces(samples=None, *, o=None, eps=None, weights=None) -> np.ndarray:
    """Force vector F_k = E[conj(O_k) eps] - E[conj(O_k)] E[eps].

    Pass either a list of LocalEnergySample or the (o, eps) arrays; weights
    switch the estimator from the sample mean to exact enumeration weights.
    """
    if samples is not None:
        o, eps = _as_arrays(samples)
    if o is None or eps is None:
        raise ValueError("forces requires samples or (o, eps)")
    o = np.asarray(o, dtype=np.complex128)
    eps = np.asarray(eps, dtype=np.complex128)
    if o.shape[0] != eps.size or eps.size == 0:
        raise DegenerateInputError("need at least one (O, eps) pair")
    if weights is None and eps.size < 2:
        raise DegenerateInputError("need >= 2 samples")
    oc = np.conj(o)
    if weights is None:
        return oc.T @ eps / eps.size - oc.mean(axis=0) * eps.mean()
    weights = np.asarray(weights, dtype=np.float64)
    return (oc * weights[:, None]).T @ eps - (weights @ oc) * (weights @ eps)


def s_matrix(samples=None, *, o=None, weights=None) -> np.ndarray:
    """Quantum geometric tensor S_nm = E[conj(O_n) O_m] - E[conj(O_n)] E[O_m],
    made exactly Hermitian by construction."""
    if samples is not None:
        o, _ = _as_arrays(samples)
    if o is None:
        raise ValueError("s_matrix requires samples or o")
    o = np.asarray(o, dtype=np.complex128)
    if o.shape[0] == 0:
        raise DegenerateInputError("empty sample set")
    if weights is None:
        if o.shape[0] < 1:
            raise DegenerateInputError("need >= 1 sample")
        centered = o - o.mean(axis=0, keepdims=True)
        s = np.conj(centered).T @ centered / o.shape[0]
    else:
        weights = np.asarray(weights, dtype=np.float64)
        mean = weights @ o
        centered = o - mean[None, :]
        s = np.conj(centered).T @ (centered * weights[:, None])
    return 0.5 * (s + np.conj(s).T)


@dataclass(frozen=True)
class SrUpdate:
    """Solved stochastic-reconfiguration step (S + lambda I) g = F."""

    g: np.ndarray
    kappa: float
    residual: float
    lambda_shift: float
    eta: float


def sr_step(f, s, lambda_shift: float, eta: float) -> SrUpdate:
    """Direct Hermitian solve of (S + lambda I) g = F with Cholesky; records
    the condition number of the shifted matrix and the solve residual."""
    if lambda_shift < 0:
        raise ValueError("lambda must be >= 0")
    if eta <= 0:
        raise ValueError("eta must be > 0")
    f = np.asarray(f, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    shifted = s + lambda_shift * np.eye(s.shape[0])
    try:
        factor = scipy.linalg.cho_factor(shifted, lower=True, check_finite=False)
        g = scipy.linalg.cho_solve(factor, f, check_finite=False)
        # one refinement pass keeps the residual near machine level even at
        # the ill-conditioned peak of early training
        g = g + scipy.linalg.cho_solve(factor, f - shifted @ g, check_finite=False)
    except scipy.linalg.LinAlgError as err:
        smallest = float(np.linalg.eigvalsh(shifted)[0])
        raise SolverError(
            f"shifted S is not positive definite (smallest eigenvalue {smallest:.3e})"
        ) from err
    eigenvalues = np.linalg.eigvalsh(shifted)
    kappa = float(eigenvalues[-1] / eigenvalues[0]) if eigenvalues[0] > 0 else float("inf")
    fn = float(np.linalg.norm(f))
    residual = float(np.linalg.norm(shifted @ g - f)) / fn if fn > 0 else 0.0
    if fn > 0 and residual > 1e-10:
        raise SolverError(f"SR solve residual {residual:.3e} exceeds 1e-10")
    return SrUpdate(g, kappa, residual, lambda_shift, eta)


@dataclass(frozen=True)
class AmplificationReport:
    kappa: float
    measured_f: float
    bound_f: float
    measured_s: float
    bound_s: float

    @property
    def holds_f(self) -> bool:
        return self.measured_f <= self.bound_f + 1e-12

    @property
    def holds_s(self) -> bool:
        return self.measured_s <= self.bound_s + 1e-12


def condition_amplification(s, f, delta_f, delta_s, lambda_shift=0.0) -> AmplificationReport:
    """Measured relative solution changes against the condition-number bounds
    kappa |dF|/|F| and (kappa |dS|/|S|) / (1 - kappa |dS|/|S|), all in the
    2-norm on A = S + lambda I."""
    s = np.asarray(s, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    delta_f = np.asarray(delta_f, dtype=np.complex128)
    delta_s = np.asarray(delta_s, dtype=np.complex128)
    a = s + lambda_shift * np.eye(s.shape[0])
    singular = np.linalg.svd(a, compute_uv=False)
    kappa = float(singular[0] / singular[-1])
    g = np.linalg.solve(a, f)
    g_norm = float(np.linalg.norm(g))
    g_f = np.linalg.solve(a, f + delta_f)
    measured_f = float(np.linalg.norm(g_f - g)) / g_norm
    bound_f = kappa * float(np.linalg.norm(delta_f)) / float(np.linalg.norm(f))
    rho = kappa * float(np.linalg.norm(delta_s, 2)) / float(singular[0])
    if rho >= 1.0:
        raise ValueError("kappa * |dS|/|S| must be < 1 for the S-perturbation bound")
    g_s = np.linalg.solve(a + delta_s, f)
    measured_s = float(np.linalg.norm(g_s - g)) / g_norm
    bound_s = rho / (1.0 - rho)
    return AmplificationReport(kappa, measured_f, bound_f, measured_s, bound_s)


@dataclass(frozen=True)
class DynamicRangeReport:
    """Fractions of |F_n| falling in the float16 bands, pooled and per step."""

    underflow: float
    subnormal: float
    normal: float
    overflow: float
    per_step: np.ndarray  # (T, 4) in the same band order


def gradient_dynamic_range(force_history) -> DynamicRangeReport:
    history = [np.abs(np.asarray(f)).ravel() for f in force_history]
    if not history:
        raise DegenerateInputError("empty force history")
    per_step = np.empty((len(history), 4))
    for t, magnitudes in enumerate(history):
        total = magnitudes.size
        under = (magnitudes < F16_MIN_SUBNORMAL).sum()
        sub = ((magnitudes >= F16_MIN_SUBNORMAL) & (magnitudes < F16_MIN_NORMAL)).sum()
        over = (magnitudes > F16_MAX).sum()
        per_step[t] = (
            under / total,
            sub / total,
            (total - under - sub - over) / total,
            over / total,
        )
    pooled = np.concatenate(history)
    total = pooled.size
    under = (pooled < F16_MIN_SUBNORMAL).sum() / total
    sub = ((pooled >= F16_MIN_SUBNORMAL) & (pooled < F16_MIN_NORMAL)).sum() / total
    over = (pooled > F16_MAX).sum() / total
    return DynamicRangeReport(
        float(under), float(sub), float(1.0 - under - sub - over), float(over), per_step
    )


def mc_error(values) -> float:
    """sqrt(sample variance / N) with the unbiased (N-1) variance; callers
    apply the x3 and sqrt(2) convention factors."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise DegenerateInputError("need >= 2 values")
    return float(np.sqrt(values.var(ddof=1) / values.size))


@dataclass
class TrainConfig:
    hamiltonian: object
    alpha: object = 1
    n_steps: int = 500
    n_samples: int = 4096
    eta: float = 0.01
    lambda_shift: float = 1e-3
    seed: int = 0
    sampling_format: FloatFormat = F64
    rounding_mode: RoundingMode = RoundingMode.PER_OPERATION
    sampling_mode: str = "mcmc"  # "mcmc" | "exact"
    proposal: Proposal = field(default_factory=lambda: Proposal("flip"))
    n_chains: int | None = None
    burn_in_sweeps: int | None = None
    reburn_sweeps: int = 2
    thin_sweeps: int = 1
    log_every: int = 1
    init_scale: float = 0.01
    gradient_protocol: str = "none"  # "none" | "o" | "eps" | "force"
    gradient_format: FloatFormat = F64
    track_forces: bool = False
    track_timings: bool = False
    reference_energy: float | None = None

    def __post_init__(self):
        if self.n_steps < 1 or self.n_samples < 2:
            raise ValueError("n_steps and n_samples must be positive")
        if self.sampling_mode not in ("mcmc", "exact"):
            raise ValueError(f"unknown sampling mode {self.sampling_mode!r}")
        if self.gradient_protocol not in ("none", "o", "eps", "force"):
            raise ValueError(f"unknown gradient protocol {self.gradient_protocol!r}")


@dataclass
class TrainResult:
    records: list
    params: rbm.RbmParameters
    force_history: list


def _rounded_grad_batch(params, bits, fmt):
    """O(x) computed in reduced precision: rounded theta accumulation, then
    the rounded tanh nonlinearity (products with the 0/1 inputs are exact)."""
    rnd = make_rounder(fmt)
    errstate = np.errstate(over="ignore", invalid="ignore")
    errstate.__enter__()
    p = rbm.round_parameters(params, fmt)
    x = np.atleast_2d(bits).astype(np.float64)
    th_re = np.broadcast_to(p.b.real, (x.shape[0], p.n_hidden)).copy()
    th_im = np.broadcast_to(p.b.imag, (x.shape[0], p.n_hidden)).copy()
    for k in range(p.n_visible):
        xk = x[:, k : k + 1]
        th_re = rnd(th_re + p.w.real[None, :, k] * xk)
        th_im = rnd(th_im + p.w.imag[None, :, k] * xk)
    t = np.tanh(th_re + 1j * th_im)
    t = rnd(t.real) + 1j * rnd(t.imag)
    n_samples = x.shape[0]
    out = np.empty((n_samples, p.n_params), dtype=np.complex128)
    out[:, : p.n_visible] = x
    out[:, p.n_visible : p.n_visible + p.n_hidden] = t
    out[:, p.n_visible + p.n_hidden :] = (t[:, :, None] * x[:, None, :]).reshape(
        n_samples, p.n_hidden * p.n_visible
    )
    errstate.__exit__(None, None, None)
    return out


def _rounded_local_energies(spec, params, bits, fmt):
    """Local energies with every step in reduced precision: rounded forward
    passes, rounded complex exp of the log-ratio, rounded multiply by the
    matrix element, and a rounded sequential sum over connected states."""
    rnd = make_rounder(fmt)
    mode = RoundingMode.PER_OPERATION

    def log_psi_fmt(b):
        return rbm.log_psi_batch(params, b, fmt, mode)

    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    n_samples, n = bits.shape
    base = log_psi_fmt(bits)

    def rounded_ratio(target_logs, base_logs):
        dre = rnd(target_logs.real - base_logs.real)
        dim = rnd(target_logs.imag - base_logs.imag)
        mag = np.exp(dre)
        re = rnd(mag * np.cos(dim))
        im = rnd(mag * np.sin(dim))
        return re, im

    acc_re = rnd(_diagonal_energy(spec, bits))
    acc_im = np.zeros(n_samples)
    if isinstance(spec, TfimSpec):
        h = float(rnd(np.float64(spec.h)))
        for site in range(n):
            flipped = bits.copy()
            flipped[:, site] ^= 1
            re, im = rounded_ratio(log_psi_fmt(flipped), base)
            acc_re = rnd(acc_re + rnd(h * re))
            acc_im = rnd(acc_im + rnd(h * im))
    elif isinstance(spec, HeisenbergSpec):
        coupling = float(rnd(np.float64(2.0 * spec.j)))
        for i, k in spec.lattice.bond_array():
            differ = bits[:, i] != bits[:, k]
            if not differ.any():
                continue
            swapped = bits.copy()
            swapped[:, [i, k]] = swapped[:, [k, i]]
            re, im = rounded_ratio(log_psi_fmt(swapped), base)
            term_re = np.where(differ, rnd(coupling * re), 0.0)
            term_im = np.where(differ, rnd(coupling * im), 0.0)
            acc_re = rnd(acc_re + term_re)
            acc_im = rnd(acc_im + term_im)
    else:
        raise TypeError(f"unknown Hamiltonian spec {type(spec).__name__}")
    return acc_re + 1j * acc_im


def _rounded_mean(values, fmt):
    """Sequentially rounded mean over axis 0, complex decomposed into real
    pairs (the faithful low-precision reduction)."""
    rnd = make_rounder(fmt)
    values = np.asarray(values)
    acc_re = rnd(np.ascontiguousarray(values[0].real))
    acc_im = rnd(np.ascontiguousarray(values[0].imag))
    for row in values[1:]:
        acc_re = rnd(acc_re + rnd(row.real))
        acc_im = rnd(acc_im + rnd(row.imag))
    count = values.shape[0]
    return rnd(acc_re / count) + 1j * rnd(acc_im / count)


def _rounded_complex_mul(a, b, fmt):
    rnd = make_rounder(fmt)
    re = rnd(rnd(a.real * b.real) - rnd(a.imag * b.imag))
    im = rnd(rnd(a.real * b.imag) + rnd(a.imag * b.real))
    return re + 1j * im


def _rounded_forces(o, eps, fmt):
    """F in reduced precision: rounded products, rounded sequential means,
    and a rounded final subtraction."""
    oc = np.conj(o)
    products = _rounded_complex_mul(oc, eps[:, None], fmt)
    mean_oe = _rounded_mean(products, fmt)
    mean_o = _rounded_mean(oc, fmt)
    mean_e = _rounded_mean(eps[:, None], fmt)[0]
    cross = _rounded_complex_mul(mean_o, np.complex128(mean_e), fmt)
    rnd = make_rounder(fmt)
    return (rnd(mean_oe.real - cross.real)) + 1j * (rnd(mean_oe.imag - cross.imag))


def train(config: TrainConfig) -> TrainResult:
    """Two-copy mixed-precision SR training.

    Per step: publish a downcast snapshot, sample through the reduced
    precision evaluator (persistent chains, re-equilibrated each step),
    compute local energies / O / F / S in float64 on the master parameters,
    then solve and update.  Logged per step: energy, MC error, acceptance,
    the measured sigma of delta on the deduplicated batch, the Pinsker and
    Gaussian-increment bound values, and the condition number of S + lambda I.
    """
    spec = config.hamiltonian
    n = spec.lattice.n_sites
    params = rbm.random_parameters(
        n, Fraction(config.alpha), derive_key(config.seed, "init"), config.init_scale
    )
    log_amp = rbm.log_psi_evaluator  # master f64 evaluator factory

    n_chains = config.n_chains or default_chain_count(config.n_samples)
    burn_in = (
        config.burn_in_sweeps if config.burn_in_sweeps is not None else 10 * n
    )
    exact_mode = config.sampling_mode == "exact"
    if exact_mode:
        all_bits = enumerate_bits(n)

    ensemble = None
    records = []
    force_history = []
    result_params = params
    # threaded BLAS thrashes on the many small solves of the update phase
    with threadpool_limits(limits=1, user_api="blas"):
        result_params = _train_loop(
            config, spec, n, params, log_amp, n_chains, burn_in, exact_mode,
            all_bits if exact_mode else None, ensemble, records, force_history,
        )
    return TrainResult(records, result_params, force_history)


def _train_loop(
    config, spec, n, params, log_amp, n_chains, burn_in, exact_mode,
    all_bits, ensemble, records, force_history,
):
    result_params = params
    if exact_mode:
        chain_ids = None
    else:
        base = config.n_samples // n_chains
        extra = config.n_samples % n_chains
        counts = np.array([base + (1 if c < extra else 0) for c in range(n_chains)])
        chain_ids = np.repeat(np.arange(n_chains), counts)
    for step in range(config.n_steps):
        t_sample = time.perf_counter()
        snapshot = rbm.round_parameters(params, config.sampling_format)
        if exact_mode:
            log_weights = rbm.log_prob_batch(params, all_bits, F64)
            weights = np.exp(log_weights - logsumexp(log_weights))
            sample_bits = all_bits
            acceptance = float("nan")
        else:
            evaluator = rbm.log_prob_evaluator(
                snapshot, config.sampling_format, config.rounding_mode
            )
            if ensemble is None:
                ensemble = ChainEnsemble(
                    n_chains, n, config.proposal, evaluator,
                    derive_key(config.seed, "chains"),
                )
                ensemble.run_sweeps(burn_in)
            else:
                ensemble.set_evaluator(evaluator)
                ensemble.run_sweeps(config.reburn_sweeps)
            ensemble.reset_counters()
            # the extra proposal per thinning interval keeps the inter-sample
            # lag odd: near-flat targets accept every flip, and even lags
            # would then freeze each chain's bit parity
            sample_bits = ensemble.collect(
                config.n_samples, config.thin_sweeps * n + 1
            )
            acceptance = ensemble.acceptance_rate
            weights = None
        t_update = time.perf_counter()

        if exact_mode:
            unique_bits, inverse = sample_bits, None
            est_weights = weights
        else:
            # estimators are exact sample means, evaluated once per distinct
            # configuration: MCMC batches concentrate on few unique states
            unique_bits, inverse, counts = np.unique(
                sample_bits, axis=0, return_inverse=True, return_counts=True
            )
            est_weights = counts / config.n_samples
        eps = local_energies(spec, log_amp(params), unique_bits)
        o = rbm.grad_log_psi_batch(params, unique_bits)
        if config.gradient_protocol == "none":
            f = forces(o=o, eps=eps, weights=est_weights)
        else:
            # the reduced-precision protocols reduce over the raw sample
            # stream (a faithful low-precision reduction has no dedup)
            o_used = (
                _rounded_grad_batch(params, sample_bits, config.gradient_format)
                if config.gradient_protocol in ("o", "force")
                else (o if inverse is None else o[inverse])
            )
            eps_used = (
                _rounded_local_energies(
                    spec, params, sample_bits, config.gradient_format
                )
                if config.gradient_protocol in ("eps", "force")
                else (eps if inverse is None else eps[inverse])
            )
            if config.gradient_protocol == "force":
                f = _rounded_forces(o_used, eps_used, config.gradient_format)
            else:
                f = forces(o=o_used, eps=eps_used, weights=weights)
        s = s_matrix(o=o, weights=est_weights)
        update = sr_step(f, s, config.lambda_shift, config.eta)
        theta = params.flatten() - config.eta * update.g
        new_params = rbm.RbmParameters.from_flat(theta, params.n_visible, params.n_hidden)

        energy = float((est_weights @ eps).real)
        if exact_mode:
            err = 0.0
        else:
            # split-chain estimator: chains are independent, so the spread of
            # per-chain means absorbs within-chain autocorrelation
            eps_stream = eps.real[inverse]
            if chain_ids is not None and n_chains > 1:
                sums = np.bincount(chain_ids, weights=eps_stream, minlength=n_chains)
                per_chain = np.bincount(chain_ids, minlength=n_chains)
                err = mc_error(sums / per_chain)
            else:
                err = mc_error(eps_stream)
        if config.track_forces:
            force_history.append(f.copy())

        if step % config.log_every == 0 or step == config.n_steps - 1:
            if config.sampling_format.name == "f64":
                sigma_hat = 0.0
            else:
                sampled_lp = rbm.log_prob_batch(
                    snapshot, unique_bits, config.sampling_format, config.rounding_mode
                )
                reference_lp = rbm.log_prob_batch(params, unique_bits, F64)
                delta = sampled_lp - reference_lp
                sigma_hat = float(delta.std(ddof=1)) if delta.size > 1 else 0.0
            record = {
                "step": step,
                "energy": energy,
                "mc_error": err,
                "acceptance": acceptance,
                "sigma_hat": sigma_hat,
                "bound_pinsker": pinsker_tv_bound(sigma_hat),
                "bound_theorem3": theorem3_gaussian_bound(sigma_hat, 0.0, 0.0),
                "kappa": update.kappa,
            }
            if config.track_timings:
                record["sampling_seconds"] = t_update - t_sample
                record["update_seconds"] = time.perf_counter() - t_update
            if config.reference_energy is not None:
                record["rel_error"] = abs(energy - config.reference_energy) / abs(
                    config.reference_energy
                )
            records.append(record)

        params = new_params
        result_params = params
    return result_params
