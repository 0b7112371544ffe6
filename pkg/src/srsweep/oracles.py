"""Closed forms and brute-force references for checking the sweep engine.

Nothing here calls :mod:`srsweep.sweep`; these are the independent side of
every cross-check.
"""
from __future__ import annotations

import math
from functools import reduce

import numpy as np

from .errors import CapacityError, ConfigError, UndefinedError
from .state import ModelParams

# photon basis (L, S); atom basis (ground, excited)
_SZ = np.diag([1.0, -1.0])
_SP = np.array([[0.0, 1.0], [0.0, 0.0]])  # S -> L
_SM = _SP.T  # L -> S
_RZ = np.diag([-1.0, 1.0])
_RP = np.array([[0.0, 0.0], [1.0, 0.0]])  # ground -> excited
_RM = _RP.T
_I2 = np.eye(2)


def first_photon_elastic(params: ModelParams) -> complex:
    """Amplitude that the first laser photon leaves unconverted: ``b**M``."""
    return params.b ** params.m


def first_photon_inelastic(params: ModelParams) -> np.ndarray:
    """Amplitudes ``c * b**(a-1)`` for atom ``a`` to hold the excitation."""
    a = np.arange(params.m)
    return params.c * params.b ** a


def one_minus_p_to_m(params: ModelParams) -> float:
    """``1 - p**M`` without cancellation at small coupling."""
    if params.p == 0.0:
        return 1.0
    return -math.expm1(params.m * math.log(params.p))


def oracle_PL2(params: ModelParams) -> float:
    """Elastic probability of the second laser photon on an unexcited medium.

    Evaluates ``p**(2M) + [4 + p + M q (M q - 4) / (1 - p**M)] p**(M-1) (1 - p**M)``
    with ``q = |c|**2``, multiplying the removable ``1 - p**M`` through so
    that ``J = 0`` gives 1.
    """
    m = params.m
    if m < 1:
        raise UndefinedError("second-photon formula needs m >= 1")
    p = params.p
    q = params.c_imag ** 2
    if q == 0.0:
        return 1.0
    opm = one_minus_p_to_m(params)
    return p ** (2 * m) + ((4 + p) * opm + m * q * (m * q - 4)) * p ** (m - 1)


def oracle_PL2_sum(params: ModelParams) -> float:
    """Same probability from the sub-channel amplitudes written as a finite sum.

    The second photon meets an excitation on atom ``a1``. It either passes
    as a laser photon (amplitude ``b**(M-1)``) or converts at ``a2 < a1`` and
    converts back at ``a1``, moving the excitation to ``a2``.
    """
    m, p = params.m, params.p
    q = params.c_imag ** 2
    a = np.arange(1, m + 1)
    return p ** (2 * m) + p ** (m - 1) * q * float(np.sum(p ** (a - 1) * (1 - q * (m - a)) ** 2))


def oracle_ratio(params: ModelParams) -> tuple[float, float]:
    """``P_L(2) / P_L(1)`` and its deviation from ``1 - 2 (M J**2)**2``."""
    ratio = oracle_PL2(params) / params.p ** params.m
    x = params.m * params.j ** 2
    return ratio, ratio - (1 - 2 * x * x)


def decay_amplitude(j: float, n_photons) -> float:
    """Survival amplitude ``cos(J)**N`` of one excited atom under N Stokes photons."""
    return math.cos(j) ** n_photons


def sf_limit_amplitude(gamma: float, t: float) -> float:
    return math.exp(-0.5 * gamma * t)


def oracle_decay(params: ModelParams, n_photons: int) -> dict:
    """Closed-form decay amplitude and its superfluorescence-limit counterpart.

    ``t = N / photon_flux``; the limit value is ``exp(-gamma t / 2)``.
    """
    if params.gamma is None or params.photon_flux is None:
        raise ConfigError("decay comparison needs both gamma and photon_flux")
    amp = decay_amplitude(params.j, n_photons)
    t = n_photons / params.photon_flux
    limit = sf_limit_amplitude(params.gamma, t)
    return {"amplitude": amp, "t": t, "limit": limit, "difference": abs(amp - limit)}


# ---------------------------------------------------------------------------
# brute force


def _site_op(op_photon, op_atom, atom: int, m: int) -> np.ndarray:
    # factor order: photon, atom m, ..., atom 1 -> index = photon * 2**m + mask
    atoms = [_I2] * m
    atoms[m - atom] = op_atom
    return reduce(np.kron, [op_photon] + atoms)


def scattering_matrix(params: ModelParams, atom: int) -> np.ndarray:
    """Full ``2**(M+1)`` matrix of one photon scattering on atom ``atom``."""
    m = params.m
    one = np.eye(2 ** (m + 1))
    zz = _site_op(_SZ, _RZ, atom, m)
    flip = _site_op(_SP, _RM, atom, m) + _site_op(_SM, _RP, atom, m)
    return 0.5 * (one + zz) + 0.5 * params.b * (one - zz) + params.c * flip


def monodromy_matrix(params: ModelParams) -> np.ndarray:
    """Ordered product ``S_M ... S_1`` as a dense matrix (photon index major).

    Blocks: ``[[A, B], [C, D]]`` with photon L first.
    """
    if params.m > 10:
        raise CapacityError("brute-force monodromy limited to m <= 10")
    out = np.eye(2 ** (params.m + 1), dtype=np.complex128)
    for a in range(1, params.m + 1):
        out = scattering_matrix(params, a) @ out
    return out


def monodromy_blocks(params: ModelParams) -> dict:
    n = 2 ** params.m
    mono = monodromy_matrix(params)
    return {"A": mono[:n, :n], "B": mono[:n, n:], "C": mono[n:, :n], "D": mono[n:, n:]}


def enumerate_paths(params: ModelParams, mask: int, spin: str) -> dict:
    """Sum over every lattice path of one photon entering with ``spin``.

    Returns ``{(out_mask, out_spin, conversions): amplitude}``, each path
    weighted by the product of its local factors {1, b, c}.
    """
    m = params.m
    b, c = params.b, params.c
    out: dict = {}

    def walk(a, mk, sp, amp, flips):
        if amp == 0:
            return
        if a == m:
            key = (mk, sp, flips)
            out[key] = out.get(key, 0j) + amp
            return
        bit = 1 << a
        excited = bool(mk & bit)
        if sp == "L" and not excited:
            walk(a + 1, mk, "L", amp * b, flips)
            walk(a + 1, mk | bit, "S", amp * c, flips + 1)
        elif sp == "S" and excited:
            walk(a + 1, mk, "S", amp * b, flips)
            walk(a + 1, mk ^ bit, "L", amp * c, flips + 1)
        else:
            walk(a + 1, mk, sp, amp, flips)

    walk(0, mask, spin, 1 + 0j, 0)
    return out
