"""One photon's passage through the medium.

The photon meets atoms 1..M in order. At each atom the local scattering
amplitudes are

============  ============  =====================================
photon in     atom in       outcome (amplitude)
============  ============  =====================================
L             ground        L, ground (b)  |  S, excited (c)
L             excited       L, excited (1)
S             ground        S, ground (1)
S             excited       S, excited (b) |  L, ground (c)
============  ============  =====================================

with ``b = cos J`` and ``c = i sin J``. These are the six nonzero vertex
weights of a six-vertex lattice whose rows are photons and whose columns
are atoms; a sweep is one row transfer. The photon's two spin components
are carried as a pair of medium vectors in neighbouring excitation sectors.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ShapeError, UndefinedError
from .sectors import DENSE_DIM_LIMIT, from_dense, sector_dim, to_dense
from .state import PRUNE_EPS, MediumState, ModelParams, new_all_ground

#: Sector pairs up to this combined size are swept with the dense kernel.
DENSE_SWEEP_LIMIT = 1 << 16


class PhotonSpin(enum.Enum):
    L = "L"  # laser (pump), isospin up
    S = "S"  # Stokes, isospin down

    @property
    def flipped(self) -> "PhotonSpin":
        return PhotonSpin.S if self is PhotonSpin.L else PhotonSpin.L

    @property
    def code(self) -> int:
        return 0 if self is PhotonSpin.L else 1

    @classmethod
    def parse(cls, value) -> "PhotonSpin":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"photon spin must be 'L' or 'S', got {value!r}") from None


def parse_pattern(pattern: str, n: Optional[int] = None) -> list[PhotonSpin]:
    """Expand a spin pattern.

    ``"L*"`` / ``"S*"`` repeat one spin ``n`` times; anything else is read
    literally, e.g. ``"LLSLS"``. When ``n`` is given with a literal pattern
    the lengths must agree.
    """
    pattern = pattern.strip().upper()
    if pattern.endswith("*"):
        if len(pattern) != 2:
            raise ValueError(f"repeat pattern must be 'L*' or 'S*', got {pattern!r}")
        if n is None:
            raise ValueError(f"pattern {pattern!r} needs a photon count")
        return [PhotonSpin.parse(pattern[0])] * n
    spins = [PhotonSpin.parse(ch) for ch in pattern]
    if n is not None and n != len(spins):
        raise ValueError(f"pattern {pattern!r} has {len(spins)} photons, expected {n}")
    return spins


@dataclass(frozen=True)
class VertexRules:
    """Local amplitudes of a photon meeting one atom."""

    b: complex
    c: complex

    @classmethod
    def from_params(cls, params: ModelParams) -> "VertexRules":
        return cls(params.b, params.c)

    def vertices(self) -> dict:
        """``(photon_in, atom_excited_in) -> [(photon_out, atom_excited_out, amplitude), ...]``."""
        L, S = PhotonSpin.L, PhotonSpin.S
        return {
            (L, False): [(L, False, self.b), (S, True, self.c)],
            (L, True): [(L, True, 1 + 0j)],
            (S, False): [(S, False, 1 + 0j)],
            (S, True): [(S, True, self.b), (L, False, self.c)],
        }

    def block(self) -> np.ndarray:
        """The coupled 2x2 block acting on (L, ground) and (S, excited)."""
        return np.array([[self.b, self.c], [self.c, self.b]])

    def is_unitary(self, tol: float = 1e-15) -> bool:
        u = self.block()
        return bool(np.allclose(u.conj().T @ u, np.eye(2), rtol=0, atol=tol))


@dataclass(frozen=True)
class SweepResult:
    """Branches left behind by one photon.

    ``elastic`` is the medium state (unnormalised) in which the photon left
    with its incoming spin, ``inelastic`` the one where it left flipped.
    """

    spin: PhotonSpin
    elastic: MediumState
    inelastic: MediumState
    p_elastic: float
    p_inelastic: float

    @property
    def total(self) -> float:
        return self.p_elastic + self.p_inelastic


def _check_input(state: MediumState, params: ModelParams) -> None:
    if state.m != params.m:
        raise ShapeError(f"state has m={state.m} but params have m={params.m}")
    if state.is_zero():
        raise UndefinedError("cannot sweep a zero state: both branches would be undefined")


def _empty(m: int, sector: int) -> MediumState:
    return MediumState._trusted(m, sector, {})


def _finish(spin, elastic, inelastic) -> SweepResult:
    return SweepResult(spin, elastic, inelastic, elastic.norm2(), inelastic.norm2())


def _sweep_dense(state, spin, params, prune_eps):
    m, k = state.m, state.sector
    lower = k if spin is PhotonSpin.L else k - 1
    vec = to_dense(state)[None, :]
    other = np.zeros((1, sector_dim(m, lower if spin is PhotonSpin.S else k + 1)), dtype=np.complex128)
    lo, hi = (vec, other) if spin is PhotonSpin.L else (other, vec)
    kernels.rotate_sweep(lo, hi, m, lower, params.b_real, params.c_imag)
    lo_state = from_dense(m, lower, lo[0], prune_eps)
    hi_state = from_dense(m, lower + 1, hi[0], prune_eps)
    if spin is PhotonSpin.L:
        return _finish(spin, lo_state, hi_state)
    return _finish(spin, hi_state, lo_state)


def _sweep_sparse(state, spin, params, prune_eps):
    m = state.m
    b, c = params.b, params.c
    amps = dict(state.amplitudes)
    phi_l, phi_s = (amps, {}) if spin is PhotonSpin.L else ({}, amps)
    for a in range(m):
        bit = 1 << a
        new_l: dict = {}
        new_s: dict = {}
        for mask, x in phi_l.items():
            if mask & bit:
                new_l[mask] = new_l.get(mask, 0j) + x
            else:
                new_l[mask] = new_l.get(mask, 0j) + b * x
                up = mask | bit
                new_s[up] = new_s.get(up, 0j) + c * x
        for mask, y in phi_s.items():
            if mask & bit:
                down = mask ^ bit
                new_l[down] = new_l.get(down, 0j) + c * y
                new_s[mask] = new_s.get(mask, 0j) + b * y
            else:
                new_s[mask] = new_s.get(mask, 0j) + y
        phi_l, phi_s = new_l, new_s
    k = state.sector
    sec_l, sec_s = (k, k + 1) if spin is PhotonSpin.L else (k - 1, k)
    keep = lambda d: {mk: v for mk, v in d.items() if v != 0 and abs(v) >= prune_eps}  # noqa: E731
    st_l = MediumState._trusted(m, sec_l, keep(phi_l))
    st_s = MediumState._trusted(m, sec_s, keep(phi_s))
    if spin is PhotonSpin.L:
        return _finish(spin, st_l, st_s)
    return _finish(spin, st_s, st_l)


def sweep(
    state: MediumState,
    spin,
    params: ModelParams,
    *,
    prune_eps: float = PRUNE_EPS,
    max_conversions: Optional[int] = None,
    method: str = "auto",
) -> SweepResult:
    """Send one photon of spin ``spin`` through the medium.

    Parameters
    ----------
    state : MediumState
        Medium before the photon arrives (need not be normalised).
    spin : PhotonSpin or {"L", "S"}
        Incoming photon spin.
    params : ModelParams
    prune_eps : float
        Output amplitudes below this modulus are dropped; 0 keeps all.
    max_conversions : int, optional
        Keep only paths with at most this many spin flips along the way.
        ``max_conversions=1`` removes the two-conversion sub-channel of the
        elastic branch; the result is then no longer norm preserving.
    method : {"auto", "dense", "sparse"}
        Dense sector kernel or pure-Python sparse maps. ``auto`` picks
        dense whenever the two sectors involved are small.
    """
    spin = PhotonSpin.parse(spin)
    _check_input(state, params)
    m, k = state.m, state.sector
    if max_conversions is not None:
        parts = sweep_subchannels(state, spin, params, max_conversions=max_conversions, prune_eps=0.0)
        return _combine_subchannels(state, spin, parts, prune_eps)
    lower = k if spin is PhotonSpin.L else k - 1
    if not 0 <= lower < m:
        # no partner sector (fully excited under L, empty under S): transparent medium
        flipped = k + 1 if spin is PhotonSpin.L else k - 1
        return _finish(spin, state, _empty(m, flipped))
    if method == "auto":
        size = sector_dim(m, lower) + sector_dim(m, lower + 1)
        method = "dense" if size <= DENSE_SWEEP_LIMIT else "sparse"
    if method == "dense":
        if sector_dim(m, lower) + sector_dim(m, lower + 1) > DENSE_DIM_LIMIT:
            method = "sparse"
        else:
            return _sweep_dense(state, spin, params, prune_eps)
    if method != "sparse":
        raise ValueError(f"unknown sweep method {method!r}")
    return _sweep_sparse(state, spin, params, prune_eps)


def sweep_subchannels(
    state: MediumState,
    spin,
    params: ModelParams,
    *,
    max_conversions: Optional[int] = None,
    prune_eps: float = 0.0,
) -> dict[int, MediumState]:
    """Split the outgoing state by the number of spin flips along the path.

    Entry ``n`` holds the coherent sum of all paths with exactly ``n``
    conversions; even ``n`` build the elastic branch, odd ``n`` the
    inelastic one. Their interference is what the channel probabilities
    measure.
    """
    spin = PhotonSpin.parse(spin)
    _check_input(state, params)
    m = state.m
    b, c = params.b, params.c
    nmax = m if max_conversions is None else min(max_conversions, m)
    if nmax < 0:
        raise ValueError("max_conversions must be >= 0")
    comps: list[dict] = [dict(state.amplitudes)] + [{} for _ in range(nmax)]
    for a in range(m):
        bit = 1 << a
        new: list[dict] = [{} for _ in range(nmax + 1)]
        for n, comp in enumerate(comps):
            is_l = (n % 2 == 0) == (spin is PhotonSpin.L)
            tgt = new[n]
            nxt = new[n + 1] if n < nmax else None
            for mask, x in comp.items():
                excited = bool(mask & bit)
                if is_l and not excited:
                    tgt[mask] = tgt.get(mask, 0j) + b * x
                    if nxt is not None:
                        nxt[mask | bit] = nxt.get(mask | bit, 0j) + c * x
                elif not is_l and excited:
                    tgt[mask] = tgt.get(mask, 0j) + b * x
                    if nxt is not None:
                        nxt[mask ^ bit] = nxt.get(mask ^ bit, 0j) + c * x
                else:
                    tgt[mask] = tgt.get(mask, 0j) + x
        comps = new
    k = state.sector
    step = 1 if spin is PhotonSpin.L else -1
    out = {}
    for n, comp in enumerate(comps):
        sec = k if n % 2 == 0 else k + step
        out[n] = MediumState._trusted(m, sec, {mk: v for mk, v in comp.items() if v != 0 and abs(v) >= prune_eps})
    return out


def _combine_subchannels(state, spin, parts, prune_eps) -> SweepResult:
    m, k = state.m, state.sector
    step = 1 if spin is PhotonSpin.L else -1
    el: dict = {}
    inel: dict = {}
    for n, part in sorted(parts.items()):
        tgt = el if n % 2 == 0 else inel
        for mask, v in part.amplitudes.items():
            tgt[mask] = tgt.get(mask, 0j) + v
    keep = lambda d: {mk: v for mk, v in d.items() if v != 0 and abs(v) >= prune_eps}  # noqa: E731
    return _finish(spin, MediumState._trusted(m, k, keep(el)), MediumState._trusted(m, k + step, keep(inel)))


def first_photon_wavefunction(params: ModelParams) -> np.ndarray:
    """Amplitude for each atom to be the one excited by the first photon.

    Read off the inelastic branch of a laser photon crossing the unexcited
    medium; entry ``a-1`` is ``c * b**(a-1)``.
    """
    if params.m < 1:
        raise UndefinedError("empty medium has no excitation wavefunction")
    res = sweep(new_all_ground(params.m, max_atoms=params.max_atoms), PhotonSpin.L, params, prune_eps=0.0)
    return np.array([res.inelastic.amplitude(1 << a) for a in range(params.m)], dtype=np.complex128)
