# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep and trajectory kernels.

Complex arrays arrive as float64 views with interleaved (re, im) pairs.
``c`` is purely imaginary, so only its imaginary part ``cs`` is passed.
"""
from libc.math cimport sqrt
from libc.string cimport memcpy, memset

import numpy as np


cdef inline void _rotate_row(double* lo, double* hi,
                             const long long* pl, const long long* ph,
                             const long long* start, int m,
                             double br, double cs) noexcept nogil:
    cdef int a
    cdef long long t, i, j
    cdef double xr, xi, yr, yi
    for a in range(m):
        for t in range(start[a], start[a + 1]):
            i = 2 * pl[t]
            j = 2 * ph[t]
            xr = lo[i]; xi = lo[i + 1]
            yr = hi[j]; yi = hi[j + 1]
            lo[i] = br * xr - cs * yi
            lo[i + 1] = br * xi + cs * yr
            hi[j] = br * yr - cs * xi
            hi[j + 1] = br * yi + cs * xr


cdef inline double _norm2(const double* v, long long dim) noexcept nogil:
    cdef double s = 0.0
    cdef long long i
    for i in range(2 * dim):
        s += v[i] * v[i]
    return s


def rotate_sweep(double[:, ::1] lo, double[:, ::1] hi,
                 const long long[::1] pair_lo, const long long[::1] pair_hi,
                 const long long[::1] start, double br, double cs):
    """In-place sweep of every row of ``lo`` (sector k) and ``hi`` (sector k+1)."""
    cdef Py_ssize_t r, nrow = lo.shape[0]
    cdef int m = start.shape[0] - 1
    if hi.shape[0] != nrow:
        raise ValueError("lo and hi must have the same number of rows")
    if pair_lo.shape[0] == 0 or nrow == 0:
        return
    with nogil:
        for r in range(nrow):
            _rotate_row(&lo[r, 0], &hi[r, 0], &pair_lo[0], &pair_hi[0], &start[0], m, br, cs)


def mc_chunk(const double[::1] init, int k0, const signed char[::1] spins,
             const double[:, ::1] uniforms, double br, double cs, int m,
             const long long[::1] pair_lo, const long long[::1] pair_hi,
             const long long[:, ::1] pair_start, const long long[::1] dims,
             const unsigned long long[::1] masks, const long long[::1] mask_start,
             signed char[:, ::1] inelastic, short[:, ::1] sectors, double[:, ::1] profile,
             long long[::1] draws):
    """Run ``uniforms.shape[0]`` independent trajectories through the photon stream.

    ``pair_start[k, a]`` indexes the pair tables coupling sector ``k`` to
    ``k + 1`` at atom ``a``. Uniforms are consumed in order, one per photon
    whose outcome is not already certain.
    """
    cdef Py_ssize_t ntraj = uniforms.shape[0]
    cdef Py_ssize_t nph = spins.shape[0]
    cdef long long maxdim = 1
    cdef int kk
    for kk in range(m + 1):
        if dims[kk] > maxdim:
            maxdim = dims[kk]
    buf_a = np.zeros(2 * maxdim, dtype=np.float64)
    buf_b = np.zeros(2 * maxdim, dtype=np.float64)
    cdef double[::1] va = buf_a
    cdef double[::1] vb = buf_b
    cdef double* cur
    cdef double* oth
    cdef double* tmp
    cdef double* lo
    cdef double* hi
    cdef double* chosen
    cdef double p_lo, p_hi, p_el, p_in, total, scale, w
    cdef Py_ssize_t t, n, cursor, i
    cdef int k, lower, newk, a
    cdef bint up, go_inel
    cdef long long dim_k, dim_new
    cdef unsigned long long mask

    with nogil:
        for t in range(ntraj):
            cur = &va[0]
            oth = &vb[0]
            memcpy(cur, &init[0], 2 * dims[k0] * sizeof(double))
            k = k0
            cursor = 0
            for n in range(nph):
                up = spins[n] == 0
                if up:
                    lower = k
                    lo = cur
                    hi = oth
                    if k < m:
                        memset(hi, 0, 2 * dims[k + 1] * sizeof(double))
                else:
                    lower = k - 1
                    hi = cur
                    lo = oth
                    if k > 0:
                        memset(lo, 0, 2 * dims[k - 1] * sizeof(double))
                if 0 <= lower < m:
                    _rotate_row(lo, hi, &pair_lo[0], &pair_hi[0], &pair_start[lower, 0], m, br, cs)
                    p_lo = _norm2(lo, dims[lower])
                    p_hi = _norm2(hi, dims[lower + 1])
                else:
                    # no partner sector: photon passes untouched
                    p_lo = _norm2(cur, dims[k]) if up else 0.0
                    p_hi = 0.0 if up else _norm2(cur, dims[k])
                if up:
                    p_el = p_lo
                    p_in = p_hi
                else:
                    p_el = p_hi
                    p_in = p_lo
                if p_in == 0.0:
                    go_inel = False
                elif p_el == 0.0:
                    go_inel = True
                else:
                    total = p_el + p_in
                    go_inel = uniforms[t, cursor] < p_in / total
                    cursor += 1
                if go_inel:
                    newk = k + 1 if up else k - 1
                    chosen = hi if up else lo
                    scale = 1.0 / sqrt(p_in)
                else:
                    newk = k
                    chosen = lo if up else hi
                    scale = 1.0 / sqrt(p_el)
                dim_new = dims[newk]
                for i in range(2 * dim_new):
                    chosen[i] = chosen[i] * scale
                if chosen != cur:
                    tmp = cur
                    cur = oth
                    oth = tmp
                k = newk
                inelastic[t, n] = 1 if go_inel else 0
                sectors[t, n] = k
            draws[t] = cursor
            dim_k = dims[k]
            total = _norm2(cur, dim_k)
            for a in range(m):
                profile[t, a] = 0.0
            for i in range(dim_k):
                w = (cur[2 * i] * cur[2 * i] + cur[2 * i + 1] * cur[2 * i + 1]) / total
                mask = masks[mask_start[k] + i]
                a = 0
                while mask:
                    if mask & 1:
                        profile[t, a] += w
                    mask >>= 1
                    a += 1
