"""Verification suites.

Every check returns a :class:`CheckResult` carrying the measured value, the
tolerance it was held to and a one-line statement of the relation checked.
The same functions back ``srsweep verify`` and ``tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import FitError
from .evolution import run_exact_tree, run_kraus, run_mc
from .observables import (
    cooperative_slope,
    expansion_residuals,
    pulse_metrics,
    second_photon_probabilities,
    sf_limit_study,
    survival_series,
)
from .oracles import (
    decay_amplitude,
    first_photon_elastic,
    first_photon_inelastic,
    monodromy_blocks,
    oracle_PL2,
)
from .state import ModelParams, basis_state, new_all_ground, random_state
from .sweep import PhotonSpin, sweep


@dataclass(frozen=True)
class CheckResult:
    name: str
    suite: str
    passed: bool
    measured: str
    tolerance: str
    relation: str
    runtime: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name:<22} measured={self.measured:<34} "
                f"tol={self.tolerance:<28} ({self.relation}) {self.runtime:.2f}s")


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# first photon


def check_first_photon(ms=range(1, 21), js=(0.05, 0.1, 0.3, 0.6), tol=1e-13, time_limit=1.0) -> CheckResult:
    def run():
        worst = 0.0
        slope_err = 0.0
        for m in ms:
            for j in js:
                params = ModelParams(m, j)
                res = sweep(new_all_ground(m), PhotonSpin.L, params, prune_eps=0.0)
                worst = max(worst, abs(res.elastic.amplitude(0) - first_photon_elastic(params)))
                phi = np.array([res.inelastic.amplitude(1 << a) for a in range(m)])
                worst = max(worst, float(np.max(np.abs(phi - first_photon_inelastic(params)))))
                if m >= 2:
                    logs = np.log(np.abs(phi))
                    slope_err = max(slope_err, float(np.max(np.abs(np.diff(logs) - math.log(math.cos(j))))))
        return worst, slope_err

    (worst, slope_err), dt = _timed(run)
    ok = worst <= tol and dt < time_limit
    return CheckResult("first-photon", "first-photon", ok, f"max|err|={worst:.2e}",
                       f"<= {tol:g}, < {time_limit:g}s", "A = b^M, phi_a = c b^(a-1)", dt,
                       f"log-slope deviation from ln cos J: {slope_err:.2e}")


def check_unitarity(n_states=1000, m_max=12, tol=1e-12, seed=2024, time_limit=5.0) -> CheckResult:
    rng = np.random.default_rng(seed)

    def run():
        worst = 0.0
        for _ in range(n_states):
            m = int(rng.integers(1, m_max + 1))
            k = int(rng.integers(0, m + 1))
            state = random_state(m, k, rng)
            params = ModelParams(m, float(rng.uniform(0, math.pi / 2)))
            for spin in (PhotonSpin.L, PhotonSpin.S):
                res = sweep(state, spin, params)
                worst = max(worst, abs(res.p_elastic + res.p_inelastic - 1.0))
        return worst

    worst, dt = _timed(run)
    ok = worst <= tol and dt < time_limit
    return CheckResult("unitarity", "first-photon", ok, f"max|P_el+P_in-1|={worst:.2e}",
                       f"<= {tol:g}, < {time_limit:g}s", "branch norms sum to input norm", dt,
                       f"{n_states} random states, m <= {m_max}, both spins")


def check_matrix_product(m_max=4, js=(0.1, 0.7, 1.3), tol=1e-13) -> CheckResult:
    def run():
        worst = 0.0
        for m in range(1, m_max + 1):
            n = 1 << m
            for j in js:
                params = ModelParams(m, j)
                blocks = monodromy_blocks(params)
                for mask in range(n):
                    st = basis_state(_cfg(mask, m))
                    for spin, el_key, in_key in ((PhotonSpin.L, "A", "C"), (PhotonSpin.S, "D", "B")):
                        res = sweep(st, spin, params, prune_eps=0.0)
                        el = np.array([res.elastic.amplitude(r) for r in range(n)])
                        inel = np.array([res.inelastic.amplitude(r) for r in range(n)])
                        worst = max(worst, float(np.max(np.abs(el - blocks[el_key][:, mask]))),
                                    float(np.max(np.abs(inel - blocks[in_key][:, mask]))))
        return worst

    worst, dt = _timed(run)
    return CheckResult("matrix-product", "first-photon", worst <= tol, f"max|err|={worst:.2e}", f"<= {tol:g}",
                       "sweep == S_M...S_1 blocks A,B,C,D", dt)


def _cfg(mask, m):
    from .state import BasisConfig

    return BasisConfig(mask, m)


# ---------------------------------------------------------------------------
# second photon


def check_second_photon(ms=range(1, 11), js=(0.1, 0.2, 0.3), tol=1e-10) -> CheckResult:
    def run():
        worst = 0.0
        m1 = 0.0
        for j in js:
            for m in ms:
                params = ModelParams(m, j)
                tree = run_exact_tree(params, new_all_ground(m), "LL")
                worst = max(worst, abs(tree.series.p_elastic[1] - oracle_PL2(params)))
                if m == 1:
                    p = params.p
                    m1 = max(m1, abs(oracle_PL2(params) - (p * p + 1 - p)),
                             abs(tree.series.p_elastic[1] - (p * p + 1 - p)))
        return worst, m1

    (worst, m1), dt = _timed(run)
    ok = worst <= tol and m1 <= tol
    return CheckResult("second-photon", "second-photon", ok, f"max|tree-closed|={worst:.2e}", f"<= {tol:g}",
                       "P_L(2) closed form vs exact tree", dt, f"M=1 vs p^2+1-p: {m1:.2e}")


def check_expansion_order(m=10, xs=(0.1, 0.05, 0.025), target=4.0, tol=0.2) -> CheckResult:
    fit, dt = _timed(lambda: expansion_residuals(m, xs))
    ok = abs(fit.slope - target) <= tol
    return CheckResult("expansion-order", "second-photon", ok, f"slope={fit.slope:.4f}", f"{target:g} +- {tol:g}",
                       "|P_L(2)/P_L(1) - (1-2(MJ^2)^2)| ~ (MJ^2)^4", dt,
                       f"fitted x^2 coefficient of 1 - ratio: {fit.extras['leading_coefficient']:.4f} (formula: 2)")


def interference_grid():
    """Weak-coupling grid (M >= 3, J <= 0.3) for the Stokes-growth inequality."""
    return [(m, j) for m in range(3, 21) for j in (0.01, 0.05, 0.1, 0.2, 0.3)]


def check_interference(grid=None) -> CheckResult:
    grid = interference_grid() if grid is None else grid

    def run():
        full_ok = trunc_ok = 0
        worst_full = math.inf
        worst_trunc = -math.inf
        for m, j in grid:
            params = ModelParams(m, j)
            full = second_photon_probabilities(params)
            trunc = second_photon_probabilities(params, max_conversions=1)
            d_full = full["P_S2"] - full["P_S1"]
            d_trunc = trunc["P_S2"] - trunc["P_S1"]
            full_ok += d_full > 0
            trunc_ok += d_trunc < 0
            worst_full = min(worst_full, d_full)
            worst_trunc = max(worst_trunc, d_trunc)
        return full_ok, trunc_ok, worst_full, worst_trunc

    (full_ok, trunc_ok, wf, wt), dt = _timed(run)
    n = len(grid)
    ok = full_ok == n and trunc_ok == n
    return CheckResult("interference", "second-photon", ok, f"full {full_ok}/{n}, truncated {trunc_ok}/{n}",
                       "all points", "P_S(2) > P_S(1); reversed without 2-flip path", dt,
                       f"min full diff {wf:.3e}, max truncated diff {wt:.3e}; grid M=3..20, J<=0.3")


# ---------------------------------------------------------------------------
# cooperative growth, pulse


def check_cooperative(ms=(8, 16, 32, 64), j=0.02, lo=1.9, hi=2.1, time_limit=10.0) -> CheckResult:
    try:
        fit, dt = _timed(lambda: cooperative_slope(ms, j))
    except FitError as exc:
        return CheckResult("cooperative-M2", "cooperative", False, "degenerate", f"[{lo}, {hi}]",
                           "P_S(2)-P_S(1) ~ M^2", 0.0, str(exc))
    ok = lo <= fit.slope <= hi and dt < time_limit
    pref = ", ".join(f"{v:.3f}" for v in fit.extras["prefactors"])
    return CheckResult("cooperative-M2", "cooperative", ok, f"slope={fit.slope:.4f}",
                       f"[{lo:g}, {hi:g}], < {time_limit:g}s", "P_S(2)-P_S(1) ~ M^2", dt,
                       f"(P_S2-P_S1)/(MJ^2)^2 = {pref}")


def check_pulse(m=10, j=0.3, n=300, time_limit=120.0) -> CheckResult:
    res, dt = _timed(lambda: run_kraus(ModelParams(m, j), new_all_ground(m), "L" * n))
    pm = pulse_metrics(res.series.p_stokes)
    final_exc = res.series.mean_excitation[-1]
    ok = pm.interior_peak and pm.final_value < 0.1 * pm.peak_value and final_exc > 0.9 * m and dt < time_limit
    return CheckResult("pulse-shape", "cooperative", ok,
                       f"peak@{pm.peak_index + 1}={pm.peak_value:.3f}, final={pm.final_value:.2e}",
                       f"final<0.1 peak, exc>{0.9 * m:g}", "Stokes pulse rises then vanishes", dt,
                       f"final mean excitation {final_exc:.4f}, unimodal={pm.unimodal}")


# ---------------------------------------------------------------------------
# decay and SF limit


def check_decay(js=(0.05, 0.1, 0.3), n_max=10_000, tol=1e-12) -> CheckResult:
    def run():
        worst = 0.0
        for j in js:
            amps = survival_series(j, n_max)
            ref = np.array([decay_amplitude(j, n) for n in range(1, n_max + 1)])
            worst = max(worst, float(np.max(np.abs(amps - ref))))
        return worst

    worst, dt = _timed(run)
    return CheckResult("decay", "decay", worst <= tol, f"max|err|={worst:.2e}", f"<= {tol:g}",
                       "A_ex(N) = (cos J)^N", dt, f"N = 1..{n_max}, J in {list(js)}")


def check_sf_limit(gamma=1.0, t=2.0, js=(0.1, 0.05, 0.025), target=2.0, tol=0.2) -> CheckResult:
    fit, dt = _timed(lambda: sf_limit_study(gamma, t, js))
    ok = abs(fit.slope - target) <= tol
    return CheckResult("sf-limit", "sf-limit", ok, f"slope={fit.slope:.4f}", f"{target:g} +- {tol:g}",
                       "(cos J)^(gt/J^2) -> exp(-gt/2)", dt,
                       "differences " + ", ".join(f"{v:.3e}" for v in fit.y))


# ---------------------------------------------------------------------------
# mode agreement


def check_modes(m=8, j=0.3, n=100, trials=10_000, seed=20240611, min_fraction=0.97,
                threads=(1, 2, 8), tree_tol=1e-10) -> CheckResult:
    from .output import series_csv

    params = ModelParams(m, j)
    ground = new_all_ground(m)
    spins = "L" * n

    def run():
        kr = run_kraus(params, ground, spins)
        tree_err = None
        if n <= 12:
            tree = run_exact_tree(params, ground, spins)
            tree_err = float(np.max(np.abs(tree.series.p_elastic - kr.series.p_elastic)))
        outputs = []
        stats = None
        for th in threads:
            st = run_mc(params, ground, spins, trials, seed, threads=th)
            stats = stats or st
            outputs.append(series_csv(st.series(), {"m": m, "j": j, "seed": seed, "trials": trials}))
        return kr, tree_err, stats, outputs

    (kr, tree_err, stats, outputs), dt = _timed(run)
    f, ref = stats.frequencies, kr.series.p_inelastic
    # standard error of the frequency under the hypothesis that MC matches the exact marginals
    se = np.sqrt(ref * (1 - ref) / trials)
    within = int(np.sum(np.abs(f - ref) <= 3 * se))
    within_plugin = int(np.sum(np.abs(f - ref) <= 3 * stats.stderr))
    identical = all(o == outputs[0] for o in outputs)
    need = math.ceil(min_fraction * n)
    ok = within >= need and identical and (tree_err is None or tree_err <= tree_tol)
    detail = (f"byte-identical at threads {list(threads)}: {identical}; "
              f"{within_plugin}/{n} within 3 plug-in SE")
    if tree_err is not None:
        detail += f"; tree vs kraus {tree_err:.2e} (tol {tree_tol:g})"
    return CheckResult("mode-agreement", "modes", ok, f"{within}/{n} within 3 SE", f">= {need}/{n}",
                       "MC frequencies vs Kraus marginals", dt, detail)


# ---------------------------------------------------------------------------

SUITES: dict[str, list[Callable[..., CheckResult]]] = {
    "first-photon": [check_first_photon, check_unitarity, check_matrix_product],
    "second-photon": [check_second_photon, check_expansion_order, check_interference],
    "cooperative": [check_cooperative, check_pulse],
    "decay": [check_decay],
    "sf-limit": [check_sf_limit],
    "modes": [check_modes],
}


def run_suite(name: str, *, modes_kwargs: Optional[dict] = None, echo: Optional[Callable[[str], None]] = None
              ) -> list[CheckResult]:
    """Run one named suite (or ``"all"``) and return its results in order."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    results = []
    for suite in names:
        for check in SUITES[suite]:
            kwargs = modes_kwargs if (check is check_modes and modes_kwargs) else {}
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = check(**kwargs)
            results.append(res)
            if echo is not None:
                echo(res.line())
    return results
