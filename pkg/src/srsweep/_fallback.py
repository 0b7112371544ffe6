"""Pure numpy implementations of the compiled kernels.

Signatures mirror :mod:`srsweep._kernels` but take complex arrays directly
(the compiled versions receive interleaved float64 views). The trajectory
kernel advances every trajectory of a chunk together, grouped by sector.
"""
from __future__ import annotations

import numpy as np


def rotate_sweep(lo, hi, pair_lo, pair_hi, start, br, cs):
    """In-place sweep of every row of ``lo`` (sector k) and ``hi`` (sector k+1)."""
    if lo.shape[0] != hi.shape[0]:
        raise ValueError("lo and hi must have the same number of rows")
    if len(pair_lo) == 0 or lo.shape[0] == 0:
        return
    c = 1j * cs
    for a in range(len(start) - 1):
        s, e = start[a], start[a + 1]
        if s == e:
            continue
        il = pair_lo[s:e]
        ih = pair_hi[s:e]
        x = lo[:, il]
        y = hi[:, ih]
        lo[:, il] = br * x + c * y
        hi[:, ih] = c * x + br * y


def mc_chunk(init, k0, spins, uniforms, br, cs, m, tables, dims, occupations,
             inelastic, sectors, profile, draws):
    """Run ``uniforms.shape[0]`` trajectories; results written into the output arrays.

    ``tables[k]`` is the ``(lo, hi, start)`` pair table between sectors k and
    k+1 and ``occupations[k]`` the ``(dim_k, m)`` occupation matrix.
    """
    ntraj, nph = uniforms.shape
    cursor = np.zeros(ntraj, dtype=np.int64)
    rows = np.arange(ntraj)
    groups = {k0: (rows, np.tile(init, (ntraj, 1)))}
    for n in range(nph):
        up = spins[n] == 0
        nxt: dict[int, list] = {}
        for k, (idx, cur) in groups.items():
            g = idx.size
            lower = k if up else k - 1
            if 0 <= lower < m:
                if up:
                    lo = cur
                    hi = np.zeros((g, dims[k + 1]), dtype=np.complex128)
                else:
                    hi = cur
                    lo = np.zeros((g, dims[k - 1]), dtype=np.complex128)
                pl, ph, st = tables[lower]
                rotate_sweep(lo, hi, pl, ph, st, br, cs)
                p_lo = np.sum(lo.real ** 2 + lo.imag ** 2, axis=1)
                p_hi = np.sum(hi.real ** 2 + hi.imag ** 2, axis=1)
            else:
                lo = hi = cur
                p_cur = np.sum(cur.real ** 2 + cur.imag ** 2, axis=1)
                p_lo = p_cur if up else np.zeros(g)
                p_hi = np.zeros(g) if up else p_cur
            el, inel = (lo, hi) if up else (hi, lo)
            p_el, p_in = (p_lo, p_hi) if up else (p_hi, p_lo)
            need = (p_in != 0.0) & (p_el != 0.0)
            go = p_el == 0.0
            if need.any():
                sel = idx[need]
                u = uniforms[sel, cursor[sel]]
                cursor[sel] += 1
                go[need] = u < p_in[need] / (p_el[need] + p_in[need])
            inelastic[idx, n] = go
            stay = ~go
            if stay.any():
                vec = el[stay] * (1.0 / np.sqrt(p_el[stay]))[:, None]
                nxt.setdefault(k, []).append((idx[stay], vec))
            if go.any():
                newk = k + 1 if up else k - 1
                vec = inel[go] * (1.0 / np.sqrt(p_in[go]))[:, None]
                nxt.setdefault(newk, []).append((idx[go], vec))
        groups = {}
        for k, parts in nxt.items():
            idx = np.concatenate([p[0] for p in parts])
            vec = np.concatenate([p[1] for p in parts], axis=0)
            groups[k] = (idx, vec)
            sectors[idx, n] = k
    draws[:] = cursor
    for k, (idx, cur) in groups.items():
        w = cur.real ** 2 + cur.imag ** 2
        w = w / np.sum(w, axis=1)[:, None]
        profile[idx] = w @ occupations[k]
