"""Dense indexing of excitation sectors.

Sector ``k`` of an ``m``-atom medium is indexed by the sorted array of masks
with popcount ``k``. Between neighbouring sectors ``k`` and ``k+1`` the atom
``a`` couples each lower mask lacking bit ``a`` to exactly one upper mask
(the same mask with bit ``a`` set); these pair tables drive the dense sweep.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import ResourceError

#: Largest sector dimension the dense routines will build.
DENSE_DIM_LIMIT = 1 << 21


def sector_dim(m: int, k: int) -> int:
    return comb(m, k) if 0 <= k <= m else 0


@lru_cache(maxsize=256)
def sector_masks(m: int, k: int) -> np.ndarray:
    """Sorted uint64 masks of sector ``k`` (read-only)."""
    dim = sector_dim(m, k)
    if dim > DENSE_DIM_LIMIT:
        raise ResourceError(f"sector (m={m}, k={k}) has dimension {dim} > {DENSE_DIM_LIMIT}")
    if dim == 0:
        out = np.zeros(0, dtype=np.uint64)
    elif k == 0:
        out = np.zeros(1, dtype=np.uint64)
    else:
        bits = [np.uint64(1) << np.uint64(a) for a in range(m)]
        out = np.fromiter(
            (int(sum(bits[a] for a in combo)) for combo in combinations(range(m), k)),
            dtype=np.uint64,
            count=dim,
        )
        out.sort()
    out.setflags(write=False)
    return out


def rank(m: int, k: int, masks) -> np.ndarray:
    """Positions of ``masks`` inside sector ``k``'s index."""
    table = sector_masks(m, k)
    masks = np.asarray(masks, dtype=np.uint64)
    idx = np.searchsorted(table, masks)
    if masks.size and (np.any(idx >= table.size) or np.any(table[np.minimum(idx, table.size - 1)] != masks)):
        raise ValueError(f"masks not in sector {k} of m={m}")
    return idx.astype(np.int64)


@lru_cache(maxsize=256)
def pair_table(m: int, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Atom-ordered pairs coupling sector ``k`` to ``k + 1``.

    Returns ``(lo, hi, start)`` where for atom ``a`` (0-based) the pairs are
    ``lo[start[a]:start[a+1]]`` (indices in sector ``k``) and the matching
    ``hi`` indices in sector ``k + 1``.
    """
    lower = sector_masks(m, k)
    upper = sector_masks(m, k + 1) if k + 1 <= m else np.zeros(0, dtype=np.uint64)
    los, his = [], []
    start = np.zeros(m + 1, dtype=np.int64)
    for a in range(m):
        bit = np.uint64(1) << np.uint64(a)
        sel = np.flatnonzero((lower & bit) == 0) if upper.size else np.zeros(0, dtype=np.int64)
        los.append(sel.astype(np.int64))
        his.append(np.searchsorted(upper, lower[sel] | bit).astype(np.int64))
        start[a + 1] = start[a] + sel.size
    lo = np.concatenate(los) if los else np.zeros(0, dtype=np.int64)
    hi = np.concatenate(his) if his else np.zeros(0, dtype=np.int64)
    for arr in (lo, hi, start):
        arr.setflags(write=False)
    return lo, hi, start


@lru_cache(maxsize=64)
def occupation_matrix(m: int, k: int) -> np.ndarray:
    """``(dim_k, m)`` 0/1 float matrix: entry ``[i, a]`` is bit ``a`` of mask ``i``."""
    masks = sector_masks(m, k)
    occ = ((masks[:, None] >> np.arange(m, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(np.float64)
    occ.setflags(write=False)
    return occ


def to_dense(state) -> np.ndarray:
    """Amplitude vector of a :class:`MediumState` over its sector index."""
    vec = np.zeros(sector_dim(state.m, state.sector), dtype=np.complex128)
    if len(state):
        keys = np.fromiter(state.amplitudes.keys(), dtype=np.uint64, count=len(state))
        vals = np.fromiter(state.amplitudes.values(), dtype=np.complex128, count=len(state))
        vec[rank(state.m, state.sector, keys)] = vals
    return vec


def from_dense(m: int, k: int, vec: np.ndarray, prune_eps: float):
    from .state import MediumState

    masks = sector_masks(m, k)
    keep = np.flatnonzero((vec != 0) & (np.abs(vec) >= prune_eps))
    amps = {int(masks[i]): complex(vec[i]) for i in keep}
    return MediumState._trusted(m, k, amps)
