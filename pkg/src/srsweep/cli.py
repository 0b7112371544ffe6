"""Command-line interface: ``srsweep {evolve,verify,scan,sweep}``.

Exit codes: 0 success, 1 computation or verification failure, 2 usage error.
Options can also come from a JSON file given with ``--config``; keys use the
long option names (``"prune-eps"`` or ``"prune_eps"``) and command-line
flags take precedence over file values.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import CapacityError, ConfigError, ResourceError, ShapeError, SRSError, UndefinedError
from .evolution import KRAUS_MAX_ATOMS, run_exact_tree, run_kraus, run_mc
from .observables import (
    cooperative_slope,
    expansion_residuals,
    pulse_metrics,
    sf_limit_study,
)
from .output import dumps, series_csv, series_svg, summary_dict
from .state import ABSOLUTE_MAX_ATOMS, MAX_ATOMS, MediumState, ModelParams, new_all_excited, new_all_ground
from .sweep import PhotonSpin, parse_pattern, sweep, sweep_subchannels

log = logging.getLogger("srsweep")

MODES = ("auto", "tree", "kraus", "mc")
FITS = ("none", "cooperative", "sf-limit", "expansion")
TREE_AUTO_PHOTONS = 12

DEFAULTS = {
    "atoms": None,
    "coupling": None,
    "gamma": None,
    "flux": None,
    "photons": None,
    "pattern": "L*",
    "initial": "ground",
    "prune_eps": 0.0,
    "mode": "auto",
    "trials": 10_000,
    "seed": 0,
    "threads": 1,
    "tol": 1e-10,
    "out": None,
    "plot": None,
    "suite": "all",
    "scan": None,
    "fit": "none",
    "time": 2.0,
    "max_conversions": None,
}


class UsageError(Exception):
    """Bad or inconsistent options (exit code 2)."""


# ---------------------------------------------------------------------------
# option handling


def _add_model(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--atoms", "-m", type=int, help="number of atoms M")
    g.add_argument("--coupling", "-J", type=float, help="coupling J in [0, pi/2]")
    g.add_argument("--gamma", type=float, help="decay rate gamma (with --flux: checks gamma = J^2 flux)")
    g.add_argument("--flux", type=float, help="photon flux (with --gamma and no --coupling: J = sqrt(gamma/flux))")
    g.add_argument("--initial", help="'ground', 'excited' or a JSON state file")
    g.add_argument("--prune-eps", dest="prune_eps", type=float, help="drop amplitudes/branches below this")


def _add_photons(p: argparse.ArgumentParser) -> None:
    p.add_argument("--photons", "-n", help="photon count, or a literal spin string such as LLS")
    p.add_argument("--pattern", help="spin pattern: L*, S* or literal (default L*)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srsweep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"srsweep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="evolve the medium under a photon stream")
    _add_model(ev)
    _add_photons(ev)
    ev.add_argument("--mode", choices=MODES)
    ev.add_argument("--trials", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--threads", type=int)
    ev.add_argument("--tol", type=float, help="unimodality band for exact modes (default 1e-10)")
    ev.add_argument("--out", help="output prefix: writes PREFIX.csv and PREFIX.json")
    ev.add_argument("--plot", nargs="?", const="", help="write an SVG plot (default PREFIX.svg)")
    _add_common(ev)

    ve = sub.add_parser("verify", help="run verification suites")
    ve.add_argument("--suite", help="first-photon, second-photon, decay, cooperative, sf-limit, modes or all")
    _add_model(ve)
    _add_photons(ve)
    ve.add_argument("--trials", type=int)
    ve.add_argument("--seed", type=int)
    ve.add_argument("--threads", type=int)
    ve.add_argument("--out", help="write the results as JSON")
    _add_common(ve)

    sc = sub.add_parser("scan", help="scan one parameter and optionally fit a scaling law")
    sc.add_argument("--scan", help="PARAM=v1,v2,... or PARAM=a:b with PARAM in m, j, photons")
    sc.add_argument("--fit", choices=FITS)
    sc.add_argument("--time", type=float, help="time t for the sf-limit fit (default 2)")
    _add_model(sc)
    _add_photons(sc)
    sc.add_argument("--mode", choices=MODES)
    sc.add_argument("--trials", type=int)
    sc.add_argument("--seed", type=int)
    sc.add_argument("--threads", type=int)
    sc.add_argument("--out", help="output prefix: writes PREFIX.csv and PREFIX.json")
    _add_common(sc)

    sw = sub.add_parser("sweep", help="send a single photon and print both output branches")
    _add_model(sw)
    sw.add_argument("--spin", default="L", help="incoming spin, L or S")
    sw.add_argument("--max-conversions", dest="max_conversions", type=int,
                    help="also report sub-channels with up to this many conversions")
    sw.add_argument("--out", help="write JSON here instead of stdout")
    _add_common(sw)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the ``--config`` file and explicit flags (flags win)."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in data.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            opts[k] = val
    for key, val in vars(args).items():
        if key in DEFAULTS and val is not None:
            opts[key] = val
    return opts


def _cap(m) -> int:
    # the CLI accepts up to the full mask width; library calls default to MAX_ATOMS
    return min(max(MAX_ATOMS, int(m)), ABSOLUTE_MAX_ATOMS)


def _params(opts: dict, *, m: Optional[int] = None, j: Optional[float] = None) -> ModelParams:
    m = opts["atoms"] if m is None else m
    if m is None:
        raise UsageError("--atoms is required")
    gamma, flux = opts["gamma"], opts["flux"]
    if j is None:
        j = opts["coupling"]
    if j is None:
        if gamma is None or flux is None:
            raise UsageError("give --coupling, or both --gamma and --flux")
        if flux <= 0 or gamma < 0:
            raise UsageError("need gamma >= 0 and flux > 0")
        j = math.sqrt(gamma / flux)
        return ModelParams(int(m), j, gamma=gamma, photon_flux=flux, max_atoms=_cap(m))
    return ModelParams(int(m), float(j), gamma=gamma, photon_flux=flux, max_atoms=_cap(m))


def _initial(opts: dict, params: ModelParams) -> MediumState:
    choice = str(opts["initial"])
    if choice == "ground":
        return new_all_ground(params.m, max_atoms=params.max_atoms)
    if choice == "excited":
        return new_all_excited(params.m, max_atoms=params.max_atoms)
    path = Path(choice)
    if not path.exists():
        raise UsageError(f"--initial must be 'ground', 'excited' or a state file; {choice!r} not found")
    return MediumState.from_json(path.read_text(), params.m, max_atoms=params.max_atoms)


def _spins(opts: dict) -> list[PhotonSpin]:
    photons = opts["photons"]
    pattern = str(opts["pattern"])
    if photons is None:
        if pattern.endswith("*"):
            raise UsageError("--photons is required with a repeat pattern")
        return parse_pattern(pattern)
    text = str(photons).strip()
    if text.isdigit():
        n = int(text)
        if n < 1:
            raise UsageError("--photons must be >= 1")
        return parse_pattern(pattern, n)
    if opts["pattern"] not in (None, "L*"):
        raise UsageError("give a literal spin string either via --photons or --pattern, not both")
    return parse_pattern(text)


def _pick_mode(mode: str, params: ModelParams, n: int) -> str:
    if mode != "auto":
        return mode
    if n <= TREE_AUTO_PHOTONS:
        return "tree"
    return "kraus" if params.m <= KRAUS_MAX_ATOMS else "mc"


def _pattern_text(spins) -> str:
    text = "".join(s.value for s in spins)
    return text[0] + "*" if len(set(text)) == 1 and len(text) > 1 else text


def _echo(opts: dict, params: ModelParams, mode: str, spins) -> dict:
    out = {"mode": mode, "m": params.m, "j": params.j, "photons": len(spins),
           "pattern": _pattern_text(spins), "initial": str(opts["initial"]),
           "prune_eps": opts["prune_eps"]}
    if params.gamma is not None:
        out["gamma"] = params.gamma
    if params.photon_flux is not None:
        out["flux"] = params.photon_flux
    if mode == "mc":
        out.update(trials=opts["trials"], seed=opts["seed"])
    return out


def _simulate(opts: dict, params: ModelParams, spins, mode: str):
    initial = _initial(opts, params)
    mode = _pick_mode(mode, params, len(spins))
    if mode == "tree":
        return mode, run_exact_tree(params, initial, spins, prune_eps=float(opts["prune_eps"])).series
    if mode == "kraus":
        return mode, run_kraus(params, initial, spins).series
    stats = run_mc(params, initial, spins, int(opts["trials"]), int(opts["seed"]), threads=int(opts["threads"]))
    return mode, stats.series()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _prefix(out: str) -> Path:
    p = Path(out)
    return p.with_suffix("") if p.suffix in (".csv", ".json", ".svg") else p


# ---------------------------------------------------------------------------
# commands


def cmd_evolve(opts: dict) -> int:
    params = _params(opts)
    spins = _spins(opts)
    mode, series = _simulate(opts, params, spins, opts["mode"])
    echo = _echo(opts, params, mode, spins)
    pulse = None
    if len(series) >= 3:
        pulse = pulse_metrics(series.p_stokes, tol=float(opts["tol"]),
                              stderr=series.stderr if mode == "mc" else None)
    csv = series_csv(series, echo)
    summary = summary_dict(series, echo, pulse=pulse)
    if opts["out"]:
        prefix = _prefix(opts["out"])
        _write(prefix.with_suffix(".csv"), csv)
        _write(prefix.with_suffix(".json"), dumps(summary))
    else:
        sys.stdout.write(csv)
    if opts["plot"] is not None:
        if opts["plot"]:
            target = Path(opts["plot"])
        elif opts["out"]:
            target = _prefix(opts["out"]).with_suffix(".svg")
        else:
            raise UsageError("--plot without a path needs --out")
        _write(target, series_svg(series, f"M={params.m}, J={params.j:g}, {mode}"))
    if pulse is not None:
        print(f"peak at photon {pulse.peak_index + 1}: P_stokes={pulse.peak_value:.6g}; "
              f"final {pulse.final_value:.6g}; pulse={pulse.is_pulse}", file=sys.stderr)
    return 0


def cmd_verify(opts: dict) -> int:
    from .verify import SUITES, run_suite

    suite = str(opts["suite"])
    if suite != "all" and suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(list(SUITES) + ['all'])}")
    # explicitly given model options resize the modes suite
    modes_kwargs = {}
    for src, dst, conv in (("atoms", "m", int), ("coupling", "j", float), ("photons", "n", int),
                           ("trials", "trials", int), ("seed", "seed", int)):
        if opts[src] is not None and opts[src] != DEFAULTS[src]:
            modes_kwargs[dst] = conv(opts[src])
    if opts["threads"] != DEFAULTS["threads"]:
        modes_kwargs["threads"] = (1, int(opts["threads"]))
    results = run_suite(suite, modes_kwargs=modes_kwargs or None, echo=print)
    for r in results:
        if r.detail:
            print(f"       {r.name}: {r.detail}")
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    if opts["out"]:
        _write(Path(opts["out"]), dumps([r.__dict__ for r in results]))
    return 0 if n_pass == len(results) else 1


def parse_scan(text: Optional[str]) -> tuple[str, list]:
    """``"m=8,16,32"`` or ``"m=1:6"`` (inclusive integer range)."""
    if not text or "=" not in text:
        raise UsageError("--scan must look like PARAM=v1,v2,... (PARAM in m, j, photons)")
    name, _, vals = text.partition("=")
    name = name.strip().lower()
    if name not in ("m", "j", "photons"):
        raise UsageError(f"cannot scan {name!r}; use m, j or photons")
    conv = float if name == "j" else int
    vals = vals.strip()
    try:
        if ":" in vals:
            a, b = (int(v) for v in vals.split(":"))
            values = list(range(a, b + 1))
        else:
            values = [conv(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad scan values {vals!r}") from None
    if not values:
        raise UsageError("scan list is empty")
    return name, values


def _rows_csv(header: list, rows: list, echo: dict) -> str:
    lines = [f"# srsweep {__version__}", "# params: " + json.dumps(echo, sort_keys=True), ",".join(header)]
    for r in rows:
        lines.append(",".join(("%.17g" % v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def cmd_scan(opts: dict) -> int:
    name, values = parse_scan(opts["scan"])
    fit_kind = opts["fit"]
    echo = {"scan": name, "values": values, "fit": fit_kind}
    fit = None
    status = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            header, rows, fit = _scan_rows(opts, name, values, fit_kind, echo)
        finally:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    text = _rows_csv(header, rows, echo)
    result = {"params": echo}
    if fit is not None:
        result["fit"] = fit.to_dict()
        print(f"fit {fit_kind}: slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
              f"max_residual={fit.max_residual:.3g}", file=sys.stderr)
        if fit.excluded:
            result["flagged"] = [float(x) for x in fit.excluded]
    if opts["out"]:
        prefix = _prefix(opts["out"])
        _write(prefix.with_suffix(".csv"), text)
        _write(prefix.with_suffix(".json"), dumps(result))
    else:
        sys.stdout.write(text)
    return status


def _scan_rows(opts, name, values, fit_kind, echo):
    from .errors import FitError

    if fit_kind == "cooperative":
        if name != "m":
            raise UsageError("the cooperative fit scans m")
        j = opts["coupling"]
        if j is None:
            raise UsageError("--coupling is required")
        echo["j"] = float(j)
        fit = cooperative_slope(values, float(j))
        d, pref = fit.extras["differences"], fit.extras["prefactors"]
        rows = [[m, float(d[i]), float(pref[i])] for i, m in enumerate(values)]
        return ["m", "P_S2_minus_P_S1", "prefactor"], rows, fit
    if fit_kind == "sf-limit":
        if name != "j":
            raise UsageError("the sf-limit fit scans j")
        gamma = 1.0 if opts["gamma"] is None else float(opts["gamma"])
        t = float(opts["time"])
        echo.update(gamma=gamma, t=t)
        fit = sf_limit_study(gamma, t, values)
        target = fit.extras["target"]
        rows = [[float(j), float(fit.extras["photon_counts"][i]), float(fit.extras["closed_form"][i]),
                 float(target), float(fit.y[i]) if i < len(fit.y) else math.nan]
                for i, j in enumerate(values)]
        return ["j", "photons", "closed_form", "limit", "difference"], rows, fit
    if fit_kind == "expansion":
        if name != "j":
            raise UsageError("the expansion fit scans j at fixed --atoms")
        if opts["atoms"] is None:
            raise UsageError("--atoms is required")
        m = int(opts["atoms"])
        echo["m"] = m
        xs = [m * j * j for j in values]
        fit = expansion_residuals(m, xs)
        rows = [[float(j), float(x), float(fit.y[i]) if i < len(fit.y) else math.nan] for i, (j, x) in
                enumerate(zip(values, xs))]
        return ["j", "x", "abs_residual"], rows, fit

    # plain scan: one evolution per value
    rows = []
    for v in values:
        sub = dict(opts)
        if name == "m":
            sub["atoms"] = v
        elif name == "j":
            sub["coupling"] = v
        else:
            sub["photons"] = v
        params = _params(sub)
        spins = _spins(sub)
        mode, series = _simulate(sub, params, spins, sub["mode"])
        s = series.p_stokes
        peak = int(np.argmax(s))
        rows.append([v, params.m, params.j, len(spins), mode, float(s[0]), float(s[-1]), math.fsum(s), peak + 1,
                     float(s[peak]), float(series.mean_excitation[-1])])
    header = [name, "m", "j", "photons", "mode", "P_stokes_first", "P_stokes_last", "expected_stokes",
              "peak_photon", "peak_value", "final_mean_excitation"]
    if fit_kind != "none":  # pragma: no cover - argparse restricts choices
        raise FitError(f"unknown fit {fit_kind}")
    return header, rows, None


def cmd_sweep(opts: dict, spin_text: str) -> int:
    params = _params(opts)
    state = _initial(opts, params)
    spin = PhotonSpin.parse(spin_text)
    res = sweep(state, spin, params, prune_eps=float(opts["prune_eps"]))
    out = {
        "m": params.m, "j": params.j, "spin": spin.value, "input_sector": state.sector,
        "p_elastic": res.p_elastic, "p_inelastic": res.p_inelastic,
        "elastic": _branch(res.elastic), "inelastic": _branch(res.inelastic),
    }
    if opts["max_conversions"] is not None:
        parts = sweep_subchannels(state, spin, params, max_conversions=int(opts["max_conversions"]))
        out["subchannels"] = {str(k): {"probability": v.norm2(), **_branch(v)} for k, v in sorted(parts.items())}
    text = dumps(out)
    if opts["out"]:
        _write(Path(opts["out"]), text)
    else:
        sys.stdout.write(text)
    return 0


def _branch(state: MediumState) -> dict:
    return {"sector": state.sector,
            "amplitudes": [{"config": str(cfg), **rec} for cfg, rec in zip(state.configs(), state.to_records())]}


# ---------------------------------------------------------------------------


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        if args.command == "evolve":
            return cmd_evolve(opts)
        if args.command == "verify":
            return cmd_verify(opts)
        if args.command == "scan":
            return cmd_scan(opts)
        return cmd_sweep(opts, args.spin)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"srsweep: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, CapacityError, ShapeError) as exc:
        print(f"srsweep: error: {exc}", file=sys.stderr)
        return 2
    except (ResourceError, UndefinedError, SRSError) as exc:
        print(f"srsweep: failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"srsweep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
