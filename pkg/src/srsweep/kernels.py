"""Backend selection for the hot loops.

The compiled extension :mod:`srsweep._kernels` is used when it imports;
otherwise, or when ``SRSWEEP_BACKEND=python`` is set, the numpy versions in
:mod:`srsweep._fallback` take over. Both expose the same two operations:

* :func:`rotate_sweep` - one photon traversal of a batch of sector vectors;
* :func:`mc_chunk` - a block of Monte Carlo trajectories.
"""
from __future__ import annotations

import contextlib
import logging
import os

import numpy as np

from . import _fallback
from .sectors import occupation_matrix, pair_table, sector_dim, sector_masks

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

AVAILABLE = ("compiled", "python") if _compiled is not None else ("python",)

_requested = os.environ.get("SRSWEEP_BACKEND", "").strip().lower()
if _requested and _requested not in ("compiled", "python"):
    raise ImportError(f"SRSWEEP_BACKEND must be 'compiled' or 'python', got {_requested!r}")
if _requested == "compiled" and _compiled is None:
    raise ImportError("SRSWEEP_BACKEND=compiled but srsweep._kernels is not built")
BACKEND = _requested or AVAILABLE[0]
if _compiled is None:
    log.debug("compiled kernels unavailable, using numpy fallback")


def set_backend(name: str) -> None:
    global BACKEND
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} not available; have {AVAILABLE}")
    BACKEND = name


@contextlib.contextmanager
def backend(name: str):
    """Temporarily switch backend (benchmarks and cross-checks)."""
    old = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


def rotate_sweep(lo: np.ndarray, hi: np.ndarray, m: int, lower: int, br: float, cs: float) -> None:
    """Sweep rows of ``lo`` (sector ``lower``) and ``hi`` (sector ``lower + 1``) in place.

    Both arrays are C-contiguous complex128 with one state per row.
    """
    pl, ph, st = pair_table(m, lower)
    if BACKEND == "compiled":
        nrow = lo.shape[0]
        _compiled.rotate_sweep(
            lo.view(np.float64).reshape(nrow, -1) if lo.size else np.zeros((nrow, 0)),
            hi.view(np.float64).reshape(nrow, -1) if hi.size else np.zeros((nrow, 0)),
            pl, ph, st, br, cs,
        )
    else:
        _fallback.rotate_sweep(lo, hi, pl, ph, st, br, cs)


class TrajectoryTables:
    """Per-run lookup tables for :func:`mc_chunk`, built once per (m)."""

    def __init__(self, m: int):
        self.m = m
        self.dims = np.array([sector_dim(m, k) for k in range(m + 1)], dtype=np.int64)
        self.tables = [pair_table(m, k) for k in range(m)]
        self.occupations = [occupation_matrix(m, k) for k in range(m + 1)]
        # flattened copies for the compiled kernel
        offs = np.zeros(m + 1, dtype=np.int64)
        for k in range(m):
            offs[k + 1] = offs[k] + self.tables[k][0].size
        self.pair_lo = np.concatenate([t[0] for t in self.tables]) if m else np.zeros(0, np.int64)
        self.pair_hi = np.concatenate([t[1] for t in self.tables]) if m else np.zeros(0, np.int64)
        self.pair_start = np.zeros((max(m, 1), m + 1), dtype=np.int64)
        for k in range(m):
            self.pair_start[k] = self.tables[k][2] + offs[k]
        self.masks = np.concatenate([sector_masks(m, k) for k in range(m + 1)])
        self.mask_start = np.concatenate([[0], np.cumsum(self.dims)]).astype(np.int64)


def mc_chunk(init: np.ndarray, k0: int, spins: np.ndarray, uniforms: np.ndarray,
             br: float, cs: float, tables: TrajectoryTables):
    """Run one block of trajectories.

    Returns ``(inelastic, sectors, profile, draws)`` with shapes ``(T, N)``
    int8, ``(T, N)`` int16, ``(T, m)`` float64 and ``(T,)`` int64; ``draws``
    counts the uniforms each trajectory consumed.
    """
    ntraj, nph = uniforms.shape
    m = tables.m
    inelastic = np.zeros((ntraj, nph), dtype=np.int8)
    sectors = np.zeros((ntraj, nph), dtype=np.int16)
    profile = np.zeros((ntraj, m), dtype=np.float64)
    draws = np.zeros(ntraj, dtype=np.int64)
    init = np.ascontiguousarray(init, dtype=np.complex128)
    spins = np.ascontiguousarray(spins, dtype=np.int8)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if BACKEND == "compiled":
        _compiled.mc_chunk(
            init.view(np.float64), k0, spins, uniforms, br, cs, m,
            tables.pair_lo, tables.pair_hi, tables.pair_start, tables.dims,
            tables.masks, tables.mask_start, inelastic, sectors, profile, draws,
        )
    else:
        _fallback.mc_chunk(init, k0, spins, uniforms, br, cs, m, tables.tables, tables.dims,
                           tables.occupations, inelastic, sectors, profile, draws)
    return inelastic, sectors, profile, draws
