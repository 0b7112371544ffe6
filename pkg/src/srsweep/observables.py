"""Derived experiments: scaling fits, pulse shape, decay and the SF limit."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import FitError, UndefinedError
from .evolution import run_exact_tree
from .oracles import decay_amplitude, sf_limit_amplitude
from .state import ABSOLUTE_MAX_ATOMS, MAX_ATOMS, ModelParams, new_all_excited, new_all_ground
from .sweep import PhotonSpin, sweep

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingFit:
    """Ordinary least squares of ``log y`` against ``log x``."""

    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    max_residual: float
    excluded: tuple = ()
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "y": [float(v) for v in self.y],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "excluded": [float(v) for v in self.excluded],
            **{k: v for k, v in self.extras.items()},
        }


def fit_loglog(x: Sequence[float], y: Sequence[float], **extras) -> ScalingFit:
    """Fit ``log y = slope * log x + intercept``; nonpositive ``y`` points are excluded.

    Raises
    ------
    FitError
        If fewer than two usable points remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    good = (y > 0) & (x > 0) & np.isfinite(y)
    excluded = tuple(x[~good])
    if excluded:
        warnings.warn(f"excluding degenerate points at x={list(excluded)}", RuntimeWarning, stacklevel=2)
    if good.sum() < 2:
        raise FitError(f"need at least two positive points for a log-log fit, have {int(good.sum())}")
    lx, ly = np.log(x[good]), np.log(y[good])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return ScalingFit(x[good], y[good], float(slope), float(intercept), float(np.max(np.abs(resid))),
                      excluded, dict(extras))


# ---------------------------------------------------------------------------
# second photon


def second_photon_probabilities(params: ModelParams, *, max_conversions: Optional[int] = None) -> dict:
    """Channel probabilities of the first two laser photons on an unexcited medium.

    With ``max_conversions=1`` the second photon's two-conversion sub-channel
    (convert, then convert back on the excited atom) is dropped.
    Stokes probabilities are reported as ``1 - P_L``.
    """
    ground = new_all_ground(params.m, max_atoms=params.max_atoms)
    first = sweep(ground, PhotonSpin.L, params, prune_eps=0.0)
    p_l2 = 0.0
    for branch in (first.elastic, first.inelastic):
        if branch.is_zero():
            continue
        res = sweep(branch, PhotonSpin.L, params, prune_eps=0.0, max_conversions=max_conversions)
        p_l2 += res.p_elastic
    p_l1 = first.p_elastic
    return {"P_L1": p_l1, "P_L2": p_l2, "P_S1": 1 - p_l1, "P_S2": 1 - p_l2}


def tree_second_photon(params: ModelParams) -> dict:
    """First- and second-photon marginals from the exact branch tree."""
    res = run_exact_tree(params, new_all_ground(params.m, max_atoms=params.max_atoms), "LL")
    s = res.series
    return {"P_L1": s.p_elastic[0], "P_L2": s.p_elastic[1], "P_S1": s.p_inelastic[0], "P_S2": s.p_inelastic[1],
            "total": res.total_probability}


def expansion_residuals(m: int, x_values: Sequence[float]) -> ScalingFit:
    """Fit ``|P_L(2)/P_L(1) - (1 - 2 x**2)|`` against ``x = M J**2`` at fixed ``M``.

    The fitted exponent is the order of the first neglected term. The
    coefficient of ``x**2`` actually present in the ratio is reported as
    ``leading_coefficient`` (estimated at the smallest ``x``).
    """
    from .oracles import oracle_ratio

    res, coef = [], []
    for x in x_values:
        params = ModelParams(m, math.sqrt(x / m))
        ratio, r = oracle_ratio(params)
        res.append(abs(r))
        coef.append((1 - ratio) / x ** 2)
    i = int(np.argmin(x_values))
    return fit_loglog(x_values, res, leading_coefficient=float(coef[i]))


def cooperative_slope(m_values: Sequence[int], j: float) -> ScalingFit:
    """Exponent of ``P_S(2) - P_S(1)`` in ``M``, from exact two-photon trees.

    Points with a nonpositive difference are flagged and excluded. The
    ratio ``(P_S(2) - P_S(1)) / (M J**2)**2`` is reported per point as
    ``prefactors``.
    """
    m_values = [int(m) for m in m_values]
    if len(m_values) < 2:
        raise FitError("cooperative slope needs at least two atom counts")
    diffs = []
    for m in m_values:
        params = ModelParams(m, j, max_atoms=max(MAX_ATOMS, min(m, ABSOLUTE_MAX_ATOMS)))
        r = tree_second_photon(params)
        diffs.append(r["P_S2"] - r["P_S1"])
    diffs = np.array(diffs)
    if not np.any(diffs > 0):
        raise FitError(f"all Stokes-growth differences nonpositive at J={j}: {diffs.tolist()}")
    x = np.array(m_values, dtype=float)
    pref = diffs / (x * j * j) ** 2
    return fit_loglog(x, diffs, differences=diffs.tolist(), prefactors=pref.tolist(), j=j)


# ---------------------------------------------------------------------------
# decay and superfluorescence limit


def survival_amplitude(j: float, n_photons: int) -> complex:
    """Amplitude that one excited atom is still excited after ``n_photons`` Stokes photons.

    Simulated by sweeping and keeping the branch in which every photon
    stayed a Stokes photon.
    """
    params = ModelParams(1, j)
    state = new_all_excited(1)
    for _ in range(n_photons):
        res = sweep(state, PhotonSpin.S, params, prune_eps=0.0)
        state = res.elastic
        if state.is_zero():
            return 0j
    return state.amplitude(1)


def survival_series(j: float, n_photons: int) -> np.ndarray:
    """Survival amplitudes after 1..n photons (one sweep per photon)."""
    params = ModelParams(1, j)
    state = new_all_excited(1)
    out = np.zeros(n_photons, dtype=np.complex128)
    for i in range(n_photons):
        state = sweep(state, PhotonSpin.S, params, prune_eps=0.0).elastic
        if state.is_zero():
            break
        out[i] = state.amplitude(1)
    return out


def sf_limit_study(gamma: float, t: float, j_values: Sequence[float], *, simulate: bool = True) -> ScalingFit:
    """Convergence of the decay amplitude to ``exp(-gamma t / 2)`` as ``J -> 0``.

    Along ``J**2 * flux = gamma`` the photon count at time ``t`` is
    ``N = gamma t / J**2``. With ``simulate`` the amplitude at integer ``N``
    comes from repeated sweeps, otherwise from the closed form.
    """
    target = sf_limit_amplitude(gamma, t)
    diffs, closed, counts = [], [], []
    for j in j_values:
        n = gamma * t / (j * j)
        closed.append(decay_amplitude(j, n))
        if simulate:
            n_int = round(n)
            if abs(n - n_int) > 1e-9 * max(1.0, n):
                raise UndefinedError(f"gamma*t/J^2 = {n} is not an integer photon count")
            amp = abs(survival_amplitude(j, n_int))
        else:
            amp = closed[-1]
        counts.append(n)
        diffs.append(abs(amp - target))
    return fit_loglog(j_values, diffs, target=target, photon_counts=counts, closed_form=closed)


# ---------------------------------------------------------------------------
# pulse shape


@dataclass(frozen=True)
class PulseMetrics:
    series: np.ndarray
    peak_index: int
    peak_value: float
    final_value: float
    unimodal: bool
    interior_peak: bool
    truncated: bool

    @property
    def is_pulse(self) -> bool:
        return self.unimodal and self.interior_peak

    def to_dict(self) -> dict:
        return {
            "peak_index": self.peak_index,
            "peak_photon": self.peak_index + 1,
            "peak_value": self.peak_value,
            "final_value": self.final_value,
            "unimodal": self.unimodal,
            "interior_peak": self.interior_peak,
            "truncated": self.truncated,
            "is_pulse": self.is_pulse,
        }


def pulse_metrics(series: Sequence[float], *, tol: float = 1e-10, stderr: Optional[Sequence[float]] = None) -> PulseMetrics:
    """Shape summary of a per-photon Stokes probability series.

    Unimodality allows backward steps up to ``tol`` (exact modes) or, when
    ``stderr`` is given, up to twice the combined standard error of the two
    neighbouring points.
    """
    s = np.asarray(series, dtype=float)
    if s.size < 3:
        raise UndefinedError("pulse metrics need at least 3 points")
    peak = int(np.argmax(s))
    if stderr is not None:
        se = np.asarray(stderr, dtype=float)
        band = 2 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    else:
        band = np.full(s.size - 1, tol)
    steps = np.diff(s)
    rising = np.all(steps[:peak] >= -band[:peak])
    falling = np.all(steps[peak:] <= band[peak:])
    return PulseMetrics(
        s,
        peak,
        float(s[peak]),
        float(s[-1]),
        bool(rising and falling),
        0 < peak < s.size - 1,
        peak == s.size - 1,
    )
