"""Serialisation of photon series: CSV, JSON summary and a standalone SVG plot."""
from __future__ import annotations

import json
import math
from typing import Optional

import numpy as np

from .evolution import PhotonSeries

CSV_COLUMNS = ("n", "P_elastic", "P_stokes", "stderr_if_mc", "mean_excitation", "sector_entropy")


def _g(x: float) -> str:
    return "%.17g" % x


def _version() -> str:
    from . import __version__

    return __version__


def header_lines(params: dict) -> list[str]:
    return [f"# srsweep {_version()}", "# params: " + json.dumps(params, sort_keys=True)]


def series_csv(series: PhotonSeries, params: dict) -> str:
    """CSV text with a commented header echoing ``params``.

    Floats are written with 17 significant digits so files round-trip
    exactly; ``stderr_if_mc`` is empty for the exact modes.
    """
    lines = header_lines(params)
    lines.append(",".join(CSV_COLUMNS))
    stokes = series.p_stokes
    for i in range(len(series)):
        se = "" if series.stderr is None else _g(series.stderr[i])
        lines.append(",".join([
            str(i + 1), _g(series.p_elastic[i]), _g(stokes[i]), se,
            _g(series.mean_excitation[i]), _g(series.sector_entropy[i]),
        ]))
    return "\n".join(lines) + "\n"


def read_series_csv(text: str) -> dict:
    """Parse :func:`series_csv` output back into column arrays plus ``params``."""
    params = {}
    rows = []
    header = None
    for line in text.splitlines():
        if line.startswith("# params: "):
            params = json.loads(line[len("# params: "):])
        elif line.startswith("#") or not line.strip():
            continue
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    cols = {name: np.array([float(r[i]) if r[i] else math.nan for r in rows]) for i, name in enumerate(header)}
    cols["params"] = params
    return cols


def summary_dict(series: PhotonSeries, params: dict, *, pulse=None, extra: Optional[dict] = None) -> dict:
    """Run summary: parameters, totals and pulse metrics (no timings, so reruns compare equal)."""
    stokes = series.p_stokes
    out = {
        "version": _version(),
        "params": params,
        "photons": len(series),
        "expected_stokes_photons": math.fsum(stokes),
        "final_mean_excitation": float(series.mean_excitation[-1]) if len(series) else 0.0,
        "final_sector_entropy": float(series.sector_entropy[-1]) if len(series) else 0.0,
    }
    if pulse is not None:
        out["pulse"] = pulse.to_dict()
    if extra:
        out.update(extra)
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def series_svg(series: PhotonSeries, title: str = "", width: int = 640, height: int = 360) -> str:
    """Line plot of P_stokes against photon index (with a 2 SE band for MC runs)."""
    y = np.asarray(series.p_stokes, dtype=float)
    n = y.size
    pad_l, pad_r, pad_t, pad_b = 56, 16, 28, 40
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    ymax = max(float(np.max(y)) if n else 1.0, 1e-12) * 1.05

    def px(i):
        return pad_l + (pw * i / max(n - 1, 1))

    def py(v):
        return pad_t + ph * (1 - v / ymax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
    ]
    for frac in (0, 0.25, 0.5, 0.75, 1.0):
        v = ymax * frac / 1.05
        parts.append(f'<text x="{pad_l - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for i in sorted({0, (n - 1) // 2, n - 1}):
        if n:
            parts.append(f'<text x="{px(i):.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{i + 1}</text>')
    parts.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">photon n</text>')
    parts.append(f'<text x="14" y="{pad_t + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">P_stokes</text>')
    if series.stderr is not None and n:
        se = 2 * np.asarray(series.stderr)
        upper = [f"{px(i):.2f},{py(min(y[i] + se[i], ymax)):.2f}" for i in range(n)]
        lower = [f"{px(i):.2f},{py(max(y[i] - se[i], 0.0)):.2f}" for i in reversed(range(n))]
        parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="#9ecae1" fill-opacity="0.5"/>')
    if n:
        pts = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#08519c" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
