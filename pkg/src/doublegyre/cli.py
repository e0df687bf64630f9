"""Command-line front end: ``doublegyre {manifolds,melnikov,folds,horseshoe}``.

Every output file starts with one ``#`` line holding the resolved run
configuration and package version as JSON, so a file can be traced back
to (and regenerated from) the run that produced it.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .flow import FlowParams
from .geometry import (
    REFERENCE_P,
    DegenerateFit,
    DegenerateTangent,
    InsufficientFolds,
    analytic_curvature_profile,
    arclength,
    detect_curvature_peaks,
    discrete_curvature,
    find_fold_points,
    fold_spacing_regression,
)
from .horseshoe import GeometryFailure, build_region_A, horseshoe_sweep
from .integrator import NoConvergence, RefinementPolicy, StepUnderflow, VertexBudgetExceeded
from .manifold_analytic import manifold_curve
from .manifold_numeric import grow_stable_manifold, grow_unstable_manifold
from .melnikov import flux_quantities, melnikov_amplitude, melnikov_closed_form, melnikov_full, melnikov_zeros
from .polyline import PolylineCurve
from .quadrature import QuadratureNonConvergence

log = logging.getLogger("doublegyre")

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

DOMAIN_ERRORS = (InsufficientFolds, DegenerateFit, DegenerateTangent, GeometryFailure, ValueError)
NUMERIC_ERRORS = (NoConvergence, QuadratureNonConvergence, StepUnderflow, VertexBudgetExceeded)


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; serialises to flat JSON."""

    command: str = "melnikov"
    A: float = 1.0
    eps: float = 0.1
    omega: float = 40.0
    t: float = 0.0
    p_min: float | None = None
    p_max: float | None = None
    n_samples: int = 401
    N: int | None = None
    length: float = 3.0
    delta: float = 0.05
    depth: float = 0.4
    n_max: int = 12
    count: int = 10
    analytic: bool = False
    numeric: bool = False
    log_column: bool = False
    audit: bool = False
    out: str = "out"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def params(self) -> FlowParams:
        return FlowParams(self.A, self.eps, self.omega)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _header(config: RunConfig) -> str:
    return "# " + json.dumps({"config": config.to_dict(), "version": __version__}, sort_keys=True)


def write_csv(path: Path, config: RunConfig, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header(config) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_json(path: Path, config: RunConfig, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config": config.to_dict(), "version": __version__, **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not serialisable: {type(obj)}")


# ---------------------------------------------------------------- manifolds


def _analytic_rows(which, config):
    params = config.params
    p_min = -1.5 if config.p_min is None else config.p_min
    p_max = 1.5 if config.p_max is None else config.p_max
    if config.n_samples <= 0 or p_min > p_max:
        return []
    p = np.linspace(p_min, p_max, config.n_samples)
    c = manifold_curve(which, p, config.t, params, p_min=min(p_min, -1.5), p_max=max(p_max, 1.5))
    sp = np.hypot(c.dx1, c.dx2)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.abs(c.d2x2 * c.dx1 - c.d2x1 * c.dx2) / sp**3
    ref = REFERENCE_P if which == "stable" else -REFERENCE_P
    # arclength from the reference point, measured away from the anchor
    start = p[-1] if which == "stable" else p[0]
    s0 = arclength(ref, start, config.t, params, which)
    legs = 0.5 * (sp[1:] + sp[:-1]) * np.diff(p)
    if which == "stable":
        s = s0 + np.concatenate([np.cumsum(legs[::-1])[::-1], [0.0]])
    else:
        s = s0 + np.concatenate([[0.0], np.cumsum(legs)])
    rows = []
    for i in range(len(p)):
        row = [p[i], c.x1[i], c.x2[i], kappa[i], s[i]]
        if config.log_column:
            row.append(math.log(1.0 - c.x2[i]) if c.x2[i] < 1.0 else -math.inf)
        rows.append(row)
    return rows


def _numeric_rows(curve: PolylineCurve, config):
    if config.N:
        s_new = np.linspace(0.0, curve.length, config.N)
        verts = np.column_stack([np.interp(s_new, curve.arclengths, curve.x1), np.interp(s_new, curve.arclengths, curve.x2)])
        prm = np.interp(s_new, curve.arclengths, curve.params) if curve.params is not None else s_new
        curve = PolylineCurve(verts, curve.t, False, prm).dedup()
    prof = discrete_curvature(curve)
    prm = curve.params if curve.params is not None else np.full(len(curve), np.nan)
    rows = []
    for i in range(len(curve)):
        x2 = curve.x2[i]
        row = [prm[i], curve.x1[i], x2, prof.kappa[i], prof.arclength[i]]
        if config.log_column:
            row.append(math.log(1.0 - x2) if x2 < 1.0 else -math.inf)
        rows.append(row)
    return rows


def cmd_manifolds(config: RunConfig) -> list[Path]:
    out = Path(config.out)
    cols = ["p", "x1", "x2", "kappa", "s"] + (["ln_1_minus_x2"] if config.log_column else [])
    files = []
    if config.analytic or not config.numeric:
        for which in ("stable", "unstable"):
            files.append(write_csv(out / f"manifold_analytic_{which}.csv", config, cols, _analytic_rows(which, config)))
    if config.numeric:
        params = config.params
        for which, grow in (("stable", grow_stable_manifold), ("unstable", grow_unstable_manifold)):
            curve = grow(config.t, config.length, params)
            files.append(write_csv(out / f"manifold_numeric_{which}.csv", config, cols, _numeric_rows(curve, config)))
    return files


# ---------------------------------------------------------------- melnikov


def cmd_melnikov(config: RunConfig) -> list[Path]:
    params = config.params
    out = Path(config.out)
    p_min = -2.0 if config.p_min is None else config.p_min
    p_max = 2.0 if config.p_max is None else config.p_max
    n = max(config.n_samples, 0)
    p_grid = np.linspace(p_min, p_max, n) if p_min <= p_max else np.zeros(0)
    t_grid = config.t + params.period * np.arange(4) / 4.0
    rows = []
    worst = 0.0
    for t in t_grid:
        for p in p_grid:
            r = melnikov_full(float(p), float(t), params)
            diff = abs(r.value - r.closed_form)
            worst = max(worst, diff)
            rows.append([p, t, r.closed_form, r.value, diff])
    f1 = write_csv(out / "melnikov_grid.csv", config, ["p", "t", "closed_form", "quadrature", "abs_diff"], rows)
    m = np.arange(-5, 6)
    zeros = melnikov_zeros(config.t, params, m)
    table = []
    for mi, z in zip(m, zeros):
        table.append({
            "m": int(mi),
            "zero_p": float(z),
            "t_minus_m_pi_over_omega": config.t - mi * math.pi / params.omega,
            "M_at_zero": float(melnikov_closed_form(z, config.t, params)),
        })
    summary = {
        "R_omega": melnikov_amplitude(params),
        **{k: (v if params.eps != 0 else 0.0) for k, v in flux_quantities(params).items()},
        "max_discrepancy": worst,
        "self_check_passed": bool(worst < 1e-8),
        "zeros": table,
    }
    f2 = write_json(out / "melnikov_summary.json", config, summary)
    return [f1, f2]


# ---------------------------------------------------------------- folds


def cmd_folds(config: RunConfig) -> list[Path]:
    params = config.params
    out = Path(config.out)
    p_min = -1.0 if config.p_min is None else config.p_min
    p_max = 0.0 if config.p_max is None else config.p_max
    folds = find_fold_points((p_min, p_max), config.t, params, config.count)
    fit = fold_spacing_regression(folds)
    n = max(config.n_samples, 3)
    prof = analytic_curvature_profile(np.linspace(p_min, p_max, n), config.t, params)
    peaks = detect_curvature_peaks(prof)
    step = (p_max - p_min) / (n - 1)
    agreement = []
    for f in folds:
        near = min(peaks, key=lambda q: abs(q.p - f.p), default=None)
        agreement.append({
            "fold_p": f.p,
            "peak_p": None if near is None else near.p,
            "offset": None if near is None else abs(near.p - f.p),
            "within_two_steps": bool(near is not None and abs(near.p - f.p) <= 2 * step),
        })
    f1 = write_csv(out / "curvature_profile.csv", config, ["p", "s", "log10_kappa"],
                   zip(prof.p, prof.arclength, prof.log_kappa))
    payload = {
        "folds": [dataclasses.asdict(f) for f in folds],
        "regression": fit._asdict(),
        "reference_p": REFERENCE_P,
        "curvature_peaks": [dataclasses.asdict(q) for q in peaks],
        "method_agreement": agreement,
        "sampling_step": step,
    }
    f2 = write_json(out / "folds.json", config, payload)
    return [f1, f2]


# ---------------------------------------------------------------- horseshoe


def cmd_horseshoe(config: RunConfig) -> list[Path]:
    params = config.params
    out = Path(config.out)
    region = build_region_A(config.t, config.delta, params, depth=config.depth)
    base = RefinementPolicy()
    rep = horseshoe_sweep(region, config.n_max, params, refine=base, seed=config.seed)
    payload = {"region": region.construction, "area_A": region.area, "sweep": rep.to_dict()}
    verdict = rep.verdict
    if config.audit and rep.first_n is not None:
        fine = RefinementPolicy(max_gap=base.max_gap / 2, max_vertices=2 * base.max_vertices)
        audit = horseshoe_sweep(region, rep.first_n, params, refine=fine, seed=config.seed)
        row = audit.rows[-1] if audit.rows else None
        payload["audit"] = {
            "n": rep.first_n,
            "strips_base": rep.rows[rep.first_n - 1].strips,
            "strips_fine": None if row is None else row.strips,
            "not_decreased": bool(row is not None and row.strips >= rep.rows[rep.first_n - 1].strips),
            "budget_error": audit.budget_error,
        }
        verdict = verdict and payload["audit"]["not_decreased"]
    payload["verdict"] = verdict
    payload["summary"] = f">=2 strips found at n={rep.first_n}" if rep.verdict else "no n with >=2 strips"
    return [write_json(out / "horseshoe.json", config, payload)]


COMMANDS = {
    "manifolds": cmd_manifolds,
    "melnikov": cmd_melnikov,
    "folds": cmd_folds,
    "horseshoe": cmd_horseshoe,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that config-file values survive unless overridden
    common.add_argument("--A", type=float, default=None)
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--omega", type=float, default=None)
    common.add_argument("--t", type=float, default=None)
    common.add_argument("--p-min", dest="p_min", type=float, default=None)
    common.add_argument("--p-max", dest="p_max", type=float, default=None)
    common.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    common.add_argument("--N", type=int, default=None, help="resample numeric curves to N points")
    common.add_argument("--delta", type=float, default=None)
    common.add_argument("--n-max", dest="n_max", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON config file mirroring the flags")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="doublegyre", description="Double-gyre manifold and chaos experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("manifolds", parents=[common], help="analytic/numeric manifold polylines")
    p.add_argument("--analytic", action="store_true", default=None)
    p.add_argument("--numeric", action="store_true", default=None)
    p.add_argument("--length", type=float, default=None, help="arclength of numeric manifolds")
    p.add_argument("--log-column", dest="log_column", action="store_true", default=None)

    sub.add_parser("melnikov", parents=[common], help="Melnikov grid and flux summary")

    p = sub.add_parser("folds", parents=[common], help="fold points and spacing regression")
    p.add_argument("--count", type=int, default=None)

    p = sub.add_parser("horseshoe", parents=[common], help="strip-count sweep")
    p.add_argument("--depth", type=float, default=None)
    p.add_argument("--audit", action="store_true", default=None, help="repeat at doubled resolution")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    data["command"] = args.command
    for key, val in vars(args).items():
        if key in ("config", "verbose", "command") or val is None:
            continue
        data[key] = val
    cfg = RunConfig.from_dict(data)
    cfg.params  # validates
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        files = COMMANDS[config.command](config)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DOMAIN_ERRORS as exc:
        print(f"domain error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
