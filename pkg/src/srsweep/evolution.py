"""Evolution of the medium under a stream of photons.

Three interchangeable routes compute the same per-photon channel
probabilities:

* :func:`run_exact_tree` keeps every outcome history as a separate pure
  branch. Cost grows as 2**N but stays polynomial in M for few photons,
  because support never leaves the lowest N+1 sectors.
* :func:`run_kraus` traces out each departing photon and evolves the medium
  density matrix. Elastic scattering keeps the excitation number and
  inelastic scattering shifts it by one, so the mixture stays block
  diagonal over sectors.
* :func:`run_mc` unravels the same channel into independent quantum
  trajectories, each drawing its photon outcomes from a Philox stream keyed
  by ``seed ^ trajectory``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ResourceError, ShapeError, UndefinedError
from .sectors import occupation_matrix, sector_dim, to_dense
from .state import PRUNE_EPS, MediumState, ModelParams
from .sweep import PhotonSpin, sweep

#: Default atom cap of the exact density-matrix mode.
KRAUS_MAX_ATOMS = 14
#: Default atom cap of the trajectory mode.
MC_MAX_ATOMS = 20
#: Default live-branch budget of the exact tree.
TREE_MAX_BRANCHES = 1 << 16


def _spins(spins_in: Iterable) -> list[PhotonSpin]:
    return [PhotonSpin.parse(s) for s in spins_in]


def _check_initial(params: ModelParams, initial: MediumState) -> None:
    if initial.m != params.m:
        raise ShapeError(f"initial state has m={initial.m}, params m={params.m}")
    if initial.is_zero():
        raise UndefinedError("initial state is zero")


def _entropy(weights: np.ndarray) -> float:
    w = weights[weights > 0]
    return float(-np.sum(w * np.log(w))) if w.size else 0.0


def _stokes_series(spins: Sequence[PhotonSpin], p_el: np.ndarray, p_in: np.ndarray) -> np.ndarray:
    # probability that the departing photon is a Stokes photon
    is_l = np.array([s is PhotonSpin.L for s in spins], dtype=bool)
    return np.where(is_l, p_in, p_el)


@dataclass(frozen=True)
class PhotonSeries:
    """Per-photon observables shared by all modes (index ``n-1`` is photon ``n``)."""

    spins: tuple
    p_elastic: np.ndarray
    p_inelastic: np.ndarray
    mean_excitation: np.ndarray
    sector_entropy: np.ndarray
    stderr: Optional[np.ndarray] = None

    @property
    def p_stokes(self) -> np.ndarray:
        return _stokes_series(self.spins, self.p_elastic, self.p_inelastic)

    def __len__(self) -> int:
        return len(self.spins)


# ---------------------------------------------------------------------------
# exact branch tree


@dataclass(frozen=True)
class BranchNode:
    """One outcome history: exit spins of photons 1..n and the medium left behind."""

    outcome_history: tuple
    state: MediumState
    probability: float

    @property
    def flips(self) -> int:
        return sum(1 for s, o in zip(self.incoming, self.outcome_history) if s is not o)

    # set by run_exact_tree so that flips can be counted
    incoming: tuple = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class TreeResult:
    branches: list
    series: PhotonSeries

    @property
    def total_probability(self) -> float:
        return math.fsum(b.probability for b in self.branches)


def run_exact_tree(
    params: ModelParams,
    initial: MediumState,
    spins_in: Iterable,
    prune_eps: float = 0.0,
    *,
    amplitude_eps: float = PRUNE_EPS,
    max_branches: int = TREE_MAX_BRANCHES,
) -> TreeResult:
    """Expand the out-state into all outcome histories.

    Branches whose probability is zero or below ``prune_eps`` are dropped.
    Histories that differ only in which photon flipped are kept apart.

    Raises
    ------
    ResourceError
        If more than ``max_branches`` branches are alive after some photon.
    """
    if prune_eps < 0:
        raise ValueError("prune_eps must be >= 0")
    _check_initial(params, initial)
    spins = _spins(spins_in)
    n = len(spins)
    branches = [BranchNode((), initial, initial.norm2(), ())]
    p_el = np.zeros(n)
    p_in = np.zeros(n)
    mean_exc = np.zeros(n)
    entropy = np.zeros(n)
    for i, spin in enumerate(spins):
        nxt = []
        el_terms, in_terms = [], []
        for br in branches:
            res = sweep(br.state, spin, params, prune_eps=amplitude_eps)
            el_terms.append(res.p_elastic)
            in_terms.append(res.p_inelastic)
            for out_spin, st, pr in ((spin, res.elastic, res.p_elastic), (spin.flipped, res.inelastic, res.p_inelastic)):
                if pr > 0 and pr >= prune_eps:
                    nxt.append(BranchNode(br.outcome_history + (out_spin,), st, pr, br.incoming + (spin,)))
        if len(nxt) > max_branches:
            raise ResourceError(
                f"exact tree exceeds {max_branches} branches at photon {i + 1} of {n}; "
                "raise max_branches, set prune_eps > 0, or use kraus/mc mode"
            )
        branches = nxt
        p_el[i] = math.fsum(el_terms)
        p_in[i] = math.fsum(in_terms)
        weights: dict[int, float] = {}
        for br in branches:
            weights[br.state.sector] = weights.get(br.state.sector, 0.0) + br.probability
        w = np.array([weights[k] for k in sorted(weights)])
        tot = w.sum()
        mean_exc[i] = sum(k * v for k, v in weights.items()) / tot if tot else 0.0
        entropy[i] = _entropy(w / tot) if tot else 0.0
    return TreeResult(branches, PhotonSeries(tuple(spins), p_el, p_in, mean_exc, entropy))


# ---------------------------------------------------------------------------
# exact sector-blocked density matrix


@dataclass
class SectorMixture:
    """Block-diagonal medium density matrix: ``blocks[k]`` acts on sector ``k``."""

    m: int
    blocks: dict

    @classmethod
    def from_state(cls, state: MediumState) -> "SectorMixture":
        v = to_dense(state)
        v = v / math.sqrt(state.norm2())
        return cls(state.m, {state.sector: np.outer(v, v.conj())})

    def traces(self) -> dict:
        return {k: float(np.trace(b).real) for k, b in sorted(self.blocks.items())}

    @property
    def total_trace(self) -> float:
        return math.fsum(self.traces().values())

    def mean_excitation(self) -> float:
        return math.fsum(k * t for k, t in self.traces().items())

    def sector_entropy(self) -> float:
        return _entropy(np.array(list(self.traces().values())))

    def excitation_profile(self) -> np.ndarray:
        prof = np.zeros(self.m)
        for k, blk in self.blocks.items():
            prof += np.diag(blk).real @ occupation_matrix(self.m, k)
        return prof / self.total_trace

    def hermiticity_error(self) -> float:
        return max((float(np.max(np.abs(b - b.conj().T))) for b in self.blocks.values() if b.size), default=0.0)

    def min_eigenvalue(self) -> float:
        return min((float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) for b in self.blocks.values() if b.size),
                   default=0.0)


def kraus_operators(params: ModelParams, k: int, spin) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Monodromy entries restricted to sector ``k``.

    For a laser photon returns ``(A, C)`` with ``A: k -> k`` and
    ``C: k -> k+1``; for a Stokes photon ``(D, B)`` with ``B: k -> k-1``.
    The second operator is ``None`` when the target sector does not exist.
    """
    spin = PhotonSpin.parse(spin)
    m = params.m
    dim = sector_dim(m, k)
    lower = k if spin is PhotonSpin.L else k - 1
    if not 0 <= lower < m:
        return np.eye(dim, dtype=np.complex128), None
    eye = np.eye(dim, dtype=np.complex128)
    other = np.zeros((dim, sector_dim(m, k + 1 if spin is PhotonSpin.L else k - 1)), dtype=np.complex128)
    lo, hi = (eye, other) if spin is PhotonSpin.L else (other, eye)
    kernels.rotate_sweep(lo, hi, m, lower, params.b_real, params.c_imag)
    # row r holds the image of basis vector r
    if spin is PhotonSpin.L:
        return np.ascontiguousarray(lo.T), np.ascontiguousarray(hi.T)
    return np.ascontiguousarray(hi.T), np.ascontiguousarray(lo.T)


def _sweep_rows(rows: np.ndarray, params: ModelParams, k: int, spin: PhotonSpin):
    """Apply both monodromy entries to every row (a sector-``k`` vector).

    Returns ``(elastic_rows, inelastic_rows)``; the latter is ``None`` when
    the photon cannot flip.
    """
    m = params.m
    lower = k if spin is PhotonSpin.L else k - 1
    if not 0 <= lower < m:
        return rows, None
    batch = rows.shape[0]
    other = np.zeros((batch, sector_dim(m, k + 1 if spin is PhotonSpin.L else k - 1)), dtype=np.complex128)
    rows = np.ascontiguousarray(rows)
    lo, hi = (rows, other) if spin is PhotonSpin.L else (other, rows)
    kernels.rotate_sweep(lo, hi, m, lower, params.b_real, params.c_imag)
    return (lo, hi) if spin is PhotonSpin.L else (hi, lo)


def apply_channel(rho: np.ndarray, params: ModelParams, k: int, spin) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """``(K_el rho K_el^dag, K_in rho K_in^dag)`` for a Hermitian block on sector ``k``.

    Uses ``K rho K^dag = K (K rho)^dag`` with both products done by sweeping
    matrix columns, which costs O(M dim^2) instead of dense O(dim^3) products.
    """
    spin = PhotonSpin.parse(spin)
    # rows of rho.T are the columns of rho
    el1, in1 = _sweep_rows(rho.T.copy(), params, k, spin)
    if in1 is None:
        return rho.copy(), None
    el2, _ = _sweep_rows(el1.conj().T.copy(), params, k, spin)
    _, in2 = _sweep_rows(in1.conj().T.copy(), params, k, spin)
    return el2.T.copy(), in2.T.copy()


@dataclass(frozen=True)
class KrausResult:
    series: PhotonSeries
    mixture: SectorMixture
    max_trace_error: float


def run_kraus(
    params: ModelParams,
    initial: MediumState,
    spins_in: Iterable,
    *,
    max_atoms: int = KRAUS_MAX_ATOMS,
) -> KrausResult:
    """Evolve the sector-blocked density matrix photon by photon.

    Each photon maps block ``k`` to ``K_el rho K_el^dag`` in sector ``k`` plus
    ``K_in rho K_in^dag`` in the neighbouring sector, where ``K_el, K_in`` are
    the monodromy entries of :func:`kraus_operators`.

    Raises
    ------
    ResourceError
        If ``params.m`` exceeds ``max_atoms`` (pass a larger cap explicitly
        to override, or use :func:`run_mc`).
    """
    if params.m > max_atoms:
        raise ResourceError(
            f"kraus mode limited to m <= {max_atoms} (got {params.m}); largest block would be "
            f"{sector_dim(params.m, params.m // 2)}^2. Use mc mode or raise the cap explicitly."
        )
    _check_initial(params, initial)
    spins = _spins(spins_in)
    n = len(spins)
    mix = SectorMixture.from_state(initial)
    p_el = np.zeros(n)
    p_in = np.zeros(n)
    mean_exc = np.zeros(n)
    entropy = np.zeros(n)
    max_err = 0.0
    for i, spin in enumerate(spins):
        step = 1 if spin is PhotonSpin.L else -1
        new: dict = {}
        el_terms, in_terms = [], []
        for k, rho in sorted(mix.blocks.items()):
            out, out_in = apply_channel(rho, params, k, spin)
            el_terms.append(float(np.trace(out).real))
            new[k] = new[k] + out if k in new else out
            if out_in is not None:
                out = out_in
                tr = float(np.trace(out).real)
                in_terms.append(tr)
                if tr != 0.0:
                    new[k + step] = new[k + step] + out if (k + step) in new else out
        mix = SectorMixture(params.m, new)
        p_el[i] = math.fsum(el_terms)
        p_in[i] = math.fsum(in_terms)
        traces = mix.traces()
        max_err = max(max_err, abs(math.fsum(traces.values()) - 1.0))
        mean_exc[i] = math.fsum(k * t for k, t in traces.items())
        entropy[i] = _entropy(np.array(list(traces.values())))
    return KrausResult(PhotonSeries(tuple(spins), p_el, p_in, mean_exc, entropy), mix, max_err)


# ---------------------------------------------------------------------------
# Monte Carlo trajectories


@dataclass
class TrajectoryStats:
    """Counts accumulated over independent trajectories.

    Merging two instances adds the counts, so partial results can be combined
    in any grouping; profile sums are combined in chunk order.
    """

    trials: int
    seed: int
    spins: tuple
    inelastic_counts: np.ndarray
    sector_counts: np.ndarray  # (N, m+1): trajectories in sector k after photon n
    profile_sum: np.ndarray
    draws: int = 0

    @property
    def frequencies(self) -> np.ndarray:
        """Per-photon frequency of the inelastic outcome."""
        return self.inelastic_counts / self.trials

    @property
    def stderr(self) -> np.ndarray:
        f = self.frequencies
        return np.sqrt(f * (1 - f) / self.trials)

    @property
    def stokes_frequencies(self) -> np.ndarray:
        f = self.frequencies
        return _stokes_series(self.spins, 1 - f, f)

    @property
    def profile_mean(self) -> np.ndarray:
        return self.profile_sum / self.trials

    @property
    def mean_excitation(self) -> np.ndarray:
        k = np.arange(self.sector_counts.shape[1])
        return (self.sector_counts @ k) / self.trials

    def sector_entropy(self) -> np.ndarray:
        w = self.sector_counts / self.trials
        return np.array([_entropy(row) for row in w])

    def series(self) -> PhotonSeries:
        f = self.frequencies
        return PhotonSeries(self.spins, 1 - f, f, self.mean_excitation, self.sector_entropy(), self.stderr)

    def merge(self, other: "TrajectoryStats") -> "TrajectoryStats":
        if self.spins != other.spins or self.seed != other.seed:
            raise ValueError("can only merge statistics of the same run")
        return TrajectoryStats(
            self.trials + other.trials,
            self.seed,
            self.spins,
            self.inelastic_counts + other.inelastic_counts,
            self.sector_counts + other.sector_counts,
            self.profile_sum + other.profile_sum,
            self.draws + other.draws,
        )


def trajectory_uniforms(seed: int, first: int, count: int, n_photons: int) -> np.ndarray:
    """Uniform variates for trajectories ``first .. first+count-1``.

    Trajectory ``t`` reads its own Philox stream keyed by ``seed ^ t``; its
    ``i``-th variate decides the ``i``-th photon whose outcome is uncertain.
    """
    out = np.empty((count, n_photons))
    for r in range(count):
        gen = np.random.Generator(np.random.Philox(key=seed ^ (first + r)))
        out[r] = gen.random(n_photons)
    return out


def _chunk_size(m: int) -> int:
    # depends only on m, so results do not depend on the thread count
    maxdim = sector_dim(m, m // 2)
    return int(max(1, min(256, (1 << 20) // maxdim)))


def run_mc(
    params: ModelParams,
    initial: MediumState,
    spins_in: Iterable,
    trials: int,
    seed: int,
    *,
    threads: int = 1,
    max_atoms: int = MC_MAX_ATOMS,
) -> TrajectoryStats:
    """Sample ``trials`` quantum trajectories.

    Each photon's exit spin is drawn with the inelastic probability of the
    current (normalised) medium state, and the chosen branch is renormalised
    and carried forward. Outcomes that are certain consume no random number.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if params.m > max_atoms:
        raise ResourceError(f"mc mode limited to m <= {max_atoms} (got {params.m})")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    _check_initial(params, initial)
    spins = _spins(spins_in)
    codes = np.array([s.code for s in spins], dtype=np.int8)
    m = params.m
    init = to_dense(initial.normalized())
    tables = kernels.TrajectoryTables(m)
    size = _chunk_size(m)
    starts = list(range(0, trials, size))
    n = len(spins)

    def work(first: int) -> TrajectoryStats:
        count = min(size, trials - first)
        u = trajectory_uniforms(seed, first, count, n)
        inel, sec, prof, draws = kernels.mc_chunk(init, initial.sector, codes, u, params.b_real,
                                                  params.c_imag, tables)
        counts = np.zeros((n, m + 1), dtype=np.int64)
        for i in range(n):
            counts[i] = np.bincount(sec[:, i], minlength=m + 1)
        return TrajectoryStats(count, seed, tuple(spins), inel.sum(axis=0, dtype=np.int64), counts,
                               prof.sum(axis=0), int(draws.sum()))

    if threads == 1 or len(starts) == 1:
        parts = [work(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total
