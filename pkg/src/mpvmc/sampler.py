"""Metropolis-Hastings chains over spin configurations, plus exact dense
kernels, stationary distributions, spectral gaps, Doeblin coefficients, and
mixing-time bounds for enumerable systems.

Chains are advanced in lockstep as a vectorized ensemble; each chain owns a
counter-based random stream keyed by (seed, chain index), so results are
bit-reproducible regardless of batching.  Every proposal consumes exactly two
stream draws (site/pair selection, then the acceptance uniform).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ReducibleKernelError, SolverError
from .lattice import SpinConfiguration, bits_to_codes, codes_to_bits
from .rng import StreamSet, derive_key

DEFAULT_SAMPLES_PER_CHAIN = 4  # default chain count is n_samples / 4


@dataclass(frozen=True)
class Proposal:
    """Single-flip or exchange proposal family.

    Single-flip proposes each of the N flip neighbors with probability 1/N.
    Exchange proposes each unordered site pair uniformly (all pairs, not only
    bonded ones) and conserves magnetization; sector_weight fixes the Hamming
    weight of the sector chains are initialized in.
    """

    kind: str
    sector_weight: int | None = None

    def __post_init__(self):
        if self.kind not in ("flip", "exchange"):
            raise ValueError(f"unknown proposal kind {self.kind!r}")


def pair_table(n: int) -> np.ndarray:
    """All unordered site pairs (i < j) in lexicographic order."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


class ChainEnsemble:
    """A batch of independent MH chains sharing one batched evaluator.

    The evaluator maps a (B, N) bit matrix to float64 log-probabilities.
    Acceptance counters cover every proposal made since the last reset.
    """

    def __init__(self, n_chains, n_sites, proposal, evaluator, key):
        self.n_chains = int(n_chains)
        self.n_sites = int(n_sites)
        self.proposal = proposal
        self._streams = StreamSet(key, self.n_chains)
        self._pairs = pair_table(self.n_sites) if proposal.kind == "exchange" else None
        self._bits = self._initial_bits()
        self._evaluator = evaluator
        self._logp = np.asarray(evaluator(self._bits), dtype=np.float64)
        self.accepted = 0
        self.proposed = 0

    def _initial_bits(self) -> np.ndarray:
        if self.proposal.kind == "flip":
            bits = np.empty((self.n_chains, self.n_sites), dtype=np.uint8)
            for k in range(self.n_sites):
                bits[:, k] = self._streams.next_uniform() < 0.5
            return bits
        weight = self.proposal.sector_weight
        if weight is None:
            weight = self.n_sites // 2
        if not 0 <= weight <= self.n_sites:
            raise ValueError(f"sector weight {weight} out of range")
        template = np.zeros(self.n_sites, dtype=np.uint8)
        template[:weight] = 1
        bits = np.tile(template, (self.n_chains, 1))
        # per-chain Fisher-Yates shuffle driven by the chain streams
        rows = np.arange(self.n_chains)
        for i in range(self.n_sites - 1, 0, -1):
            j = (self._streams.next_uniform() * (i + 1)).astype(np.int64)
            vi = bits[rows, i].copy()
            bits[rows, i] = bits[rows, j]
            bits[rows, j] = vi
        return bits

    def set_evaluator(self, evaluator):
        """Swap the target; refreshes every chain's cached log-probability."""
        self._evaluator = evaluator
        self._logp = np.asarray(evaluator(self._bits), dtype=np.float64)

    def reset_counters(self):
        self.accepted = 0
        self.proposed = 0

    @property
    def bits(self) -> np.ndarray:
        return self._bits.copy()

    @property
    def log_probs(self) -> np.ndarray:
        return self._logp.copy()

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def step(self):
        """One MH proposal per chain."""
        u_select = self._streams.next_uniform()
        proposed = self._bits.copy()
        rows = np.arange(self.n_chains)
        if self.proposal.kind == "flip":
            sites = (u_select * self.n_sites).astype(np.int64)
            proposed[rows, sites] ^= 1
        else:
            idx = (u_select * len(self._pairs)).astype(np.int64)
            left = self._pairs[idx, 0]
            right = self._pairs[idx, 1]
            vi = proposed[rows, left].copy()
            proposed[rows, left] = proposed[rows, right]
            proposed[rows, right] = vi
        logp_new = np.asarray(self._evaluator(proposed), dtype=np.float64)
        u_accept = self._streams.next_uniform()
        with np.errstate(invalid="ignore"):
            accept = np.log(u_accept) < logp_new - self._logp
        self._bits[accept] = proposed[accept]
        self._logp[accept] = logp_new[accept]
        self.accepted += int(accept.sum())
        self.proposed += self.n_chains

    def run_steps(self, n_steps: int):
        for _ in range(int(n_steps)):
            self.step()

    def run_sweeps(self, n_sweeps: int):
        self.run_steps(int(n_sweeps) * self.n_sites)

    def collect(self, n_samples: int, thin_steps: int = 1) -> np.ndarray:
        """Record n_samples total, thinned by proposal steps, merged
        chain-major.

        Chain c contributes ceil/floor(n_samples / n_chains) samples (the
        first n_samples mod n_chains chains get the extra one); sample r of
        chain c lands at row c * count + earlier chains' counts.  An odd
        thin_steps avoids parity locking on targets where every flip is
        accepted (the single-flip chain on a flat target is bipartite).
        """
        base = n_samples // self.n_chains
        extra = n_samples % self.n_chains
        counts = np.array(
            [base + (1 if c < extra else 0) for c in range(self.n_chains)]
        )
        rounds = int(counts.max()) if n_samples else 0
        per_round = []
        for _ in range(rounds):
            self.run_steps(thin_steps)
            per_round.append(self._bits.copy())
        samples = np.empty((n_samples, self.n_sites), dtype=np.uint8)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        for c in range(self.n_chains):
            for r in range(counts[c]):
                samples[offsets[c] + r] = per_round[r][c]
        return samples


@dataclass(frozen=True)
class ChainState:
    """Single-chain state: configuration, cached log-probability, stream."""

    config: SpinConfiguration
    log_prob: float
    stream_state: np.ndarray
    accepted: int = 0
    proposed: int = 0


def make_chain_state(config: SpinConfiguration, logprob, seed, chain_index=0) -> ChainState:
    streams = StreamSet(derive_key(seed, "chains"), chain_index + 1)
    state = streams.getstate()[chain_index : chain_index + 1]
    lp = float(np.asarray(logprob(config.bits()[None, :]))[0])
    return ChainState(config, lp, state)


def mh_step(state: ChainState, logprob, proposal: Proposal) -> ChainState:
    """One Metropolis-Hastings update of a single chain.

    Draw order matches ChainEnsemble.step: selection uniform, then the
    acceptance uniform.
    """
    streams = StreamSet(0, 1)
    streams.setstate(state.stream_state)
    u_select = float(streams.next_uniform()[0])
    x = state.config
    if proposal.kind == "flip":
        site = int(u_select * x.n)
        from .lattice import flip_neighbor

        candidate = flip_neighbor(x, site)
    else:
        pairs = pair_table(x.n)
        i, j = pairs[int(u_select * len(pairs))]
        from .lattice import exchange_neighbor

        candidate = exchange_neighbor(x, int(i), int(j))
    logp_new = float(np.asarray(logprob(candidate.bits()[None, :]))[0])
    u_accept = float(streams.next_uniform()[0])
    accept = np.log(u_accept) < logp_new - state.log_prob
    return ChainState(
        config=candidate if accept else x,
        log_prob=logp_new if accept else state.log_prob,
        stream_state=streams.getstate(),
        accepted=state.accepted + int(accept),
        proposed=state.proposed + 1,
    )


def run_chains(
    n_chains,
    n_samples,
    burn_in_steps,
    thin_steps,
    seed,
    logprob,
    proposal: Proposal,
    n_sites,
):
    """Run independent chains and pool samples.

    burn_in_steps and thin_steps count individual proposals (the CLI's
    sweep-based flags multiply by the site count before calling).  Returns
    (bit matrix of shape (n_samples, n_sites), acceptance rate); the rate
    pools proposals made after burn-in.  Deterministic for a fixed seed:
    chain c draws from the stream keyed by (seed, "chains", c).
    """
    if min(n_chains, n_samples) < 1 or thin_steps < 1 or burn_in_steps < 0:
        raise ValueError("counts must be positive")
    ensemble = ChainEnsemble(
        n_chains, n_sites, proposal, logprob, derive_key(seed, "chains")
    )
    ensemble.run_steps(burn_in_steps)
    ensemble.reset_counters()
    samples = ensemble.collect(n_samples, thin_steps)
    return samples, ensemble.acceptance_rate


def default_chain_count(n_samples: int) -> int:
    return max(1, n_samples // DEFAULT_SAMPLES_PER_CHAIN)


def table_log_prob(log_values, n_sites: int):
    """Evaluator backed by a dense table of (unnormalized) log-probabilities
    indexed by configuration code."""
    table = np.asarray(log_values, dtype=np.float64)
    if table.size != 1 << n_sites:
        raise ValueError("table size must be 2^n")

    def evaluate(bits):
        return table[bits_to_codes(bits).astype(np.int64)]

    return evaluate


def uniform_log_prob(n_sites: int):
    return table_log_prob(np.zeros(1 << n_sites), n_sites)


@dataclass(frozen=True)
class DenseKernel:
    """Row-stochastic transition matrix over enumerate_states order."""

    matrix: np.ndarray
    n_sites: int

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.shape != (1 << self.n_sites, 1 << self.n_sites):
            raise ValueError("kernel shape does not match 2^n")
        if (matrix < -1e-15).any():
            raise ValueError("kernel has negative entries")
        rows = matrix.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-12:
            raise ValueError("kernel rows must sum to 1 within 1e-12")
        object.__setattr__(self, "matrix", matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _neighbor_codes(n: int, proposal: Proposal) -> np.ndarray:
    """(2^n, n_neighbors) array of proposal targets per state (may include
    self-moves for exchange pairs with equal bits)."""
    codes = np.arange(1 << n, dtype=np.int64)
    if proposal.kind == "flip":
        return codes[:, None] ^ (1 << np.arange(n, dtype=np.int64))[None, :]
    pairs = pair_table(n)
    bits = codes_to_bits(codes, n).astype(np.int64)
    differ = bits[:, pairs[:, 0]] != bits[:, pairs[:, 1]]
    masks = (1 << pairs[:, 0]) | (1 << pairs[:, 1])
    return np.where(differ, codes[:, None] ^ masks[None, :], codes[:, None])


def build_kernel(logprob, proposal: Proposal, n: int) -> DenseKernel:
    """Exact MH transition matrix for an enumerable system."""
    from .lattice import ENUMERATION_LIMIT, enumerate_bits

    if n > ENUMERATION_LIMIT:
        raise ReducibleKernelError(f"kernel construction limited to n <= {ENUMERATION_LIMIT}")
    bits = enumerate_bits(n)
    lp = np.asarray(logprob(bits), dtype=np.float64)
    dim = 1 << n
    neighbors = _neighbor_codes(n, proposal)
    q = 1.0 / neighbors.shape[1]
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = np.exp(np.minimum(lp[neighbors] - lp[:, None], 0.0))
    matrix = np.zeros((dim, dim))
    codes = np.arange(dim)
    for column in range(neighbors.shape[1]):
        target = neighbors[:, column]
        moved = target != codes
        np.add.at(matrix, (codes[moved], target[moved]), q * ratios[moved, column])
    matrix[codes, codes] += 1.0 - matrix.sum(axis=1)
    return DenseKernel(matrix, n)


def _strongly_connected(matrix: np.ndarray) -> bool:
    adjacency = matrix > 0
    size = matrix.shape[0]

    def reaches_all(adj):
        seen = np.zeros(size, dtype=bool)
        frontier = np.zeros(size, dtype=bool)
        seen[0] = frontier[0] = True
        while frontier.any():
            nxt = adj[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = nxt
        return seen.all()

    return reaches_all(adjacency) and reaches_all(adjacency.T)


def stationary_distribution(kernel: DenseKernel) -> np.ndarray:
    """Left fixed point of an irreducible kernel; residual <= 1e-10 in l1."""
    matrix = kernel.matrix
    if not _strongly_connected(matrix):
        raise ReducibleKernelError("kernel is reducible")
    size = matrix.shape[0]
    stacked = np.vstack([matrix.T - np.eye(size), np.ones((1, size))])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    if pi.min() < -1e-12:
        raise SolverError("stationary solve produced negative entries")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = np.abs(pi @ matrix - pi).sum()
    if residual > 1e-10:
        raise SolverError(f"stationary residual {residual:.3e} exceeds 1e-10")
    return pi


def spectral_gap(kernel: DenseKernel, pi: np.ndarray):
    """(rho, gamma) of a reversible kernel via the symmetrized eigensolve."""
    matrix = kernel.matrix
    pi = np.asarray(pi, dtype=np.float64)
    if (pi <= 0).any():
        raise ValueError("spectral analysis requires strictly positive pi")
    flow = pi[:, None] * matrix
    asym = np.abs(flow - flow.T).max()
    if asym > 1e-10 * max(flow.max(), 1e-300):
        raise ValueError(f"kernel is not reversible w.r.t. pi (asymmetry {asym:.3e})")
    root = np.sqrt(pi)
    sym = root[:, None] * matrix / root[None, :]
    sym = 0.5 * (sym + sym.T)
    values = np.linalg.eigvalsh(sym)
    rho = float(max(abs(values[0]), abs(values[-2]))) if values.size > 1 else 0.0
    return rho, 1.0 - rho


def doeblin_coefficient(kernel: DenseKernel):
    """(xi, r): maximal Doeblin constant with nu proportional to the column
    minima; single-site proposals have xi = 0 structurally, in which case the
    caller should fall back to the spectral contraction rate."""
    xi = float(kernel.matrix.min(axis=0).sum())
    return xi, 1.0 - xi


def mixing_time_bound(gamma: float, pi_min: float, eps: float) -> float:
    """Relaxation-time mixing bound (1/gamma)(log 1/eps + 0.5 log 1/pi_min)."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    if not 0.0 < pi_min <= 1.0:
        raise ValueError("pi_min must be in (0, 1]")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    return (np.log(1.0 / eps) + 0.5 * np.log(1.0 / pi_min)) / gamma
