"""``ruelle`` command-line entry point.

Every subcommand reads a map file (JSON), optionally a ``--config`` JSON whose
values are overridden by explicit flags, and writes its artifact atomically.
Exit status: 0 success, 2 validation failure, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .determinant import determinant_coefficients, determinant_zeros, resonances_from_determinant
from .errors import DegenerateSeries, LefschetzMismatch, ParseError, RuelleError
from .family_sweep import load_plan, run_sweep
from .galerkin import EscapeWeight, assemble, eigenvalues, operator_trace_power, resonances_from_galerkin, singular_values
from .periodic_orbits import enumerate_fixed_points, lefschetz_check, trace_sequence
from .spectral_analysis import NotEstimable, counting_function, hausdorff_distance, weyl_bound_check
from .torus_maps import load_map

COMMANDS = ("orbits", "traces", "det", "galerkin", "count", "svd", "sweep", "validate")
EMIT = ("eigenvalues", "singular", "matrix")
SOURCES = ("galerkin", "determinant")
MATRIX_FLOOR = 1e-14
EXIT_OK, EXIT_ERROR, EXIT_VALIDATION = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    map: str | None = None
    plan: str | None = None
    n: int | None = None
    order: int = 10
    cutoff: int = 12
    gamma: float = 0.5
    sigma: float = 1.0
    r_min: float = 0.05
    r_grid: tuple[float, ...] | None = None
    emit: str = "eigenvalues"
    source: str = "galerkin"
    max_period: int = 6
    output: str = "-"
    summary: str | None = None
    seed: int = 0

    def grid(self) -> np.ndarray:
        if self.r_grid is not None:
            return np.asarray(self.r_grid, dtype=np.float64)
        return np.geomspace(self.r_min, 0.5, 10) if self.r_min < 0.5 else np.array([self.r_min])


FILE_KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def _parse_grid(text) -> tuple[float, ...]:
    """``"a:b:n"`` (geometric, inclusive) or a comma list."""
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    text = str(text)
    if ":" in text:
        a, b, n = text.split(":")
        return tuple(np.geomspace(float(a), float(b), int(n)).tolist())
    return tuple(float(x) for x in text.split(",") if x.strip())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message, location="command line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ruelle", description="Ruelle resonances of analytic Anosov maps of the 2-torus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file of defaults; flags override it")
        p.add_argument("--map", default=S, help="map definition JSON")
        p.add_argument("--output", "-o", default=S, help="output path, '-' for stdout")
        p.add_argument("--seed", type=int, default=S)

    def spectral(p, orders=True):
        if orders:
            p.add_argument("--order", "-N", type=int, default=S, help="trace order")
        p.add_argument("--cutoff", "-K", type=int, default=S)
        p.add_argument("--gamma", type=float, default=S)
        p.add_argument("--sigma", type=float, default=S)
        p.add_argument("--r-min", dest="r_min", type=float, default=S)

    p = sub.add_parser("orbits", help="fixed points of F^n as CSV")
    common(p)
    p.add_argument("-n", "--period", dest="n", type=int, default=S)

    p = sub.add_parser("traces", help="orbit sums t_1..t_N as JSON")
    common(p)
    p.add_argument("--order", "-N", type=int, default=S)

    p = sub.add_parser("det", help="determinant series, zeros and resonances as JSON")
    common(p)
    p.add_argument("--order", "-N", type=int, default=S)
    p.add_argument("--r-min", dest="r_min", type=float, default=S)

    p = sub.add_parser("galerkin", help="weighted Galerkin spectrum or matrix as JSON")
    common(p)
    spectral(p, orders=False)
    p.add_argument("--emit", choices=EMIT, default=S)

    p = sub.add_parser("count", help="counting function CSV plus JSON summary")
    common(p)
    spectral(p)
    p.add_argument("--r-grid", dest="r_grid", default=S, help="'a:b:n' geometric or comma list")
    p.add_argument("--source", choices=SOURCES, default=S)
    p.add_argument("--summary", default=S, help="path of the JSON summary")

    p = sub.add_parser("svd", help="singular values with the exponential-class fit")
    common(p)
    spectral(p, orders=False)

    p = sub.add_parser("sweep", help="pipeline along a one-parameter family")
    common(p)
    p.add_argument("--plan", default=S, help="sweep-plan JSON")

    p = sub.add_parser("validate", help="cross-check battery with a pass/fail table")
    common(p)
    spectral(p)
    p.add_argument("--max-period", dest="max_period", type=int, default=S)
    return parser


def _check(cfg: RunConfig, key: str, ok: bool, message: str, location: str):
    if not ok:
        raise ParseError(message, key=key, location=location)


def validate_config(cfg: RunConfig, location: str = "config") -> RunConfig:
    loc = location
    _check(cfg, "order", 1 <= cfg.order <= 25, "trace order must lie in [1, 25]", loc)
    _check(cfg, "cutoff", 0 <= cfg.cutoff <= 35, "cutoff must lie in [0, 35] (dimension budget 5041)", loc)
    _check(cfg, "gamma", cfg.gamma > 0, "gamma must be positive", loc)
    _check(cfg, "sigma", cfg.sigma >= 1, "sigma must be >= 1", loc)
    _check(cfg, "r_min", 0 < cfg.r_min < 1, "r_min must lie in (0, 1)", loc)
    _check(cfg, "emit", cfg.emit in EMIT, f"emit must be one of {EMIT}", loc)
    _check(cfg, "source", cfg.source in SOURCES, f"source must be one of {SOURCES}", loc)
    _check(cfg, "max_period", 1 <= cfg.max_period <= 20, "max_period must lie in [1, 20]", loc)
    if cfg.r_grid is not None:
        g = cfg.r_grid
        _check(cfg, "r_grid", len(g) > 0 and all(b > a for a, b in zip(g, g[1:])),
               "r_grid must be non-empty and strictly increasing", loc)
        _check(cfg, "r_grid", g[0] >= cfg.r_min, "r_grid must start at or above r_min", loc)
    if cfg.command == "sweep":
        _check(cfg, "plan", cfg.plan is not None, "the 'sweep' command needs a sweep plan (--plan)", loc)
    else:
        _check(cfg, "map", cfg.map is not None, f"the '{cfg.command}' command needs a map file (--map)", loc)
    if cfg.command == "orbits":
        _check(cfg, "n", cfg.n is not None, "the 'orbits' command needs the period n (-n)", loc)
        _check(cfg, "n", cfg.n >= 1, "period n must be positive", loc)
    return cfg


def _coerce(key: str, value, location: str):
    types = {"n": int, "order": int, "cutoff": int, "max_period": int, "seed": int,
             "gamma": float, "sigma": float, "r_min": float}
    try:
        if key == "r_grid":
            return _parse_grid(value)
        if key in types:
            if isinstance(value, bool) or (types[key] is int and isinstance(value, float)):
                raise TypeError
            return types[key](value)
        return None if value is None else str(value)
    except (TypeError, ValueError):
        raise ParseError(f"bad value {value!r}", key=key, location=location) from None


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, the optional ``--config`` file, and explicit flags (highest priority)."""
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config: {exc}", key="config", location=ns.config) from None
        if not isinstance(data, dict):
            raise ParseError("config must be a JSON object", key="config", location=ns.config)
        # K and N are accepted as aliases for the cutoff and trace order
        aliases = {"K": "cutoff", "N": "order", "mapFile": "map", "rMin": "r_min", "rGrid": "r_grid"}
        for raw, value in data.items():
            key = aliases.get(raw, raw)
            if key not in FILE_KEYS:
                raise ParseError(f"unknown config key {raw!r}", key=raw, location=ns.config)
            values[key] = _coerce(key, value, ns.config)
    for key, value in vars(ns).items():
        if key in FILE_KEYS:
            values[key] = _coerce(key, value, "command line")
    cfg = RunConfig(command=ns.command, **values)
    return validate_config(cfg, ns.config or "command line")


# -- output -------------------------------------------------------------------

def write_atomic(path: str, text: str) -> None:
    """Write via a temporary sibling and rename; ``-`` means standard output."""
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _cx(z) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _fmt(x: float) -> str:
    return repr(float(x))


# -- commands -------------------------------------------------------------------

def cmd_orbits(cfg: RunConfig) -> int:
    fmap, g = load_map(cfg.map)
    fps = enumerate_fixed_points(fmap, cfg.n, g=g)
    check = lefschetz_check(fps, fmap.linear, cfg.n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "x1", "x2", "sign", "detFactor", "weight_re", "weight_im", "residual"])
    pts, det, sgn, wp, res = fps.points, fps.det_factor, fps.signs, fps.weight_product, fps.residual
    for i in range(len(fps)):
        w.writerow([cfg.n, _fmt(pts[i, 0]), _fmt(pts[i, 1]), int(sgn[i]), _fmt(det[i]),
                    _fmt(wp[i].real), _fmt(wp[i].imag), _fmt(res[i])])
    if not check:
        raise LefschetzMismatch(f"n={cfg.n}: signed count {check.signed_sum} != det(I - A^n) = {check.expected}")
    write_atomic(cfg.output, buf.getvalue())
    return EXIT_OK


def cmd_traces(cfg: RunConfig) -> int:
    fmap, g = load_map(cfg.map)
    ts = trace_sequence(fmap, g, cfg.order)
    write_atomic(cfg.output, _dumps({"order": ts.order, "traces": [_cx(t) for t in ts.values]}))
    return EXIT_OK


def cmd_det(cfg: RunConfig) -> int:
    fmap, g = load_map(cfg.map)
    series = determinant_coefficients(trace_sequence(fmap, g, cfg.order))
    try:
        zeros = determinant_zeros(series)
    except DegenerateSeries:
        zeros = np.zeros(0, dtype=np.complex128)
    r_min = max(cfg.r_min, 1.0 / series.reliability_radius)
    res = resonances_from_determinant(series, r_min)
    out = {"coefficients": [_cx(c) for c in series.coefficients],
           "reliability_radius": series.reliability_radius,
           "zeros": [_cx(z) for z in zeros],
           "resonances": res.to_json(),
           "r_min": r_min}
    write_atomic(cfg.output, _dumps(out))
    return EXIT_OK


def _operator(cfg: RunConfig):
    fmap, g = load_map(cfg.map)
    weight = EscapeWeight.for_matrix(fmap.linear, cfg.gamma, cfg.sigma)
    return fmap, g, assemble(fmap, g, cfg.cutoff, weight)


def cmd_galerkin(cfg: RunConfig) -> int:
    _, _, op = _operator(cfg)
    out = {"cutoff": op.cutoff, "dimension": op.dimension, "quadrature_grid": op.quadrature_grid,
           "gamma": cfg.gamma, "sigma": cfg.sigma, "underflow_count": op.underflow_count}
    if cfg.emit == "eigenvalues":
        out["eigenvalues"] = [_cx(z) for z in eigenvalues(op)]
    elif cfg.emit == "singular":
        out["singular_values"] = [float(a) for a in singular_values(op).values]
    else:
        rows, cols = np.nonzero(np.abs(op.matrix) > MATRIX_FLOOR)
        out["entries"] = [[op.modes[i].tolist(), op.modes[j].tolist(),
                           float(op.matrix[i, j].real), float(op.matrix[i, j].imag)]
                          for i, j in zip(rows, cols)]
    write_atomic(cfg.output, _dumps(out))
    return EXIT_OK


def cmd_svd(cfg: RunConfig) -> int:
    _, _, op = _operator(cfg)
    fit = singular_values(op)
    out = {"cutoff": op.cutoff, "singular_values": [float(a) for a in fit.values],
           "fitted_C": fit.fitted_C, "violation_fraction": fit.violation_fraction,
           "exponent": fit.exponent, "rate": fit.rate}
    write_atomic(cfg.output, _dumps(out))
    return EXIT_OK


def _resonance_set(cfg: RunConfig, fmap, g):
    if cfg.source == "determinant":
        series = determinant_coefficients(trace_sequence(fmap, g, cfg.order))
        return resonances_from_determinant(series, max(cfg.r_min, 1.0 / series.reliability_radius))
    op = assemble(fmap, g, cfg.cutoff, EscapeWeight.for_matrix(fmap.linear, cfg.gamma, cfg.sigma))
    return resonances_from_galerkin(op, cfg.r_min)


def cmd_count(cfg: RunConfig) -> int:
    fmap, g = load_map(cfg.map)
    rs = _resonance_set(cfg, fmap, g)
    curve = counting_function(rs, cfg.grid())
    weyl = weyl_bound_check(curve, 2.0 * cfg.sigma)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "N", "logN", "loglog_inv_r"])
    for r, n, ln, llr in curve.rows():
        w.writerow([_fmt(r), n, _fmt(ln), _fmt(llr)])
    est = curve.exponent_estimate
    summary = {"exponent": None if isinstance(est, NotEstimable) else est.value,
               "ci": None if isinstance(est, NotEstimable) else [est.ci_low, est.ci_high],
               "weyl_pass": weyl.passed, "fitted_C": weyl.fitted_C,
               "source": cfg.source, "r_min": rs.r_min, "total_multiplicity": rs.total_multiplicity}
    if isinstance(est, NotEstimable):
        summary["not_estimable"] = est.reason
    if cfg.summary:
        summary_path = cfg.summary
    elif cfg.output == "-":
        summary_path = None
    else:
        summary_path = str(Path(cfg.output).with_suffix(".summary.json"))
    write_atomic(cfg.output, buf.getvalue())
    if summary_path is None:
        sys.stderr.write(_dumps(summary))
    else:
        write_atomic(summary_path, _dumps(summary))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    plan = load_plan(cfg.plan)
    result = run_sweep(plan)
    if cfg.output == "-":
        write_atomic("-", _dumps(result.to_json()))
    else:
        out = Path(cfg.output)
        for i, rep in enumerate(result.reports):
            write_atomic(str(out / f"report_{i:03d}.json"), _dumps(rep.to_json()))
        write_atomic(str(out / "summary.csv"), result.summary_csv())
    return EXIT_OK


def run_validation(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """Lefschetz counts, trace formula, two-route agreement and Weyl bound for one map."""
    fmap, g = load_map(cfg.map)
    rows = []
    for n in range(1, cfg.max_period + 1):
        check = lefschetz_check(enumerate_fixed_points(fmap, n, g=g), fmap.linear, n)
        rows.append((f"lefschetz n={n}", check.passed, f"{check.signed_sum} vs {check.expected}"))
    ts = trace_sequence(fmap, g, cfg.order)
    op = assemble(fmap, g, cfg.cutoff, EscapeWeight.for_matrix(fmap.linear, cfg.gamma, cfg.sigma))
    for n in range(1, min(3, cfg.order) + 1):
        err = abs(operator_trace_power(op, n) - ts.values[n - 1])
        rows.append((f"trace formula n={n}", err <= 1e-4, f"|diff| = {err:.3e}"))
    series = determinant_coefficients(ts)
    floor = max(cfg.r_min, 1.0 / series.reliability_radius)
    det_set = resonances_from_determinant(series, floor)
    gal_set = resonances_from_galerkin(op, cfg.r_min)
    gal = gal_set.expanded()
    h = hausdorff_distance(det_set.expanded(), gal[np.abs(gal) >= floor])
    rows.append(("two-route agreement", h <= 1e-3, f"Hausdorff {h:.3e} above |lambda| >= {floor:.4g}"))
    weyl = weyl_bound_check(counting_function(gal_set, cfg.grid()), 2.0 * cfg.sigma)
    rows.append(("weyl bound", weyl.passed, f"C = {weyl.fitted_C:.4g}"))
    return rows


def cmd_validate(cfg: RunConfig) -> int:
    rows = run_validation(cfg)
    width = max(len(name) for name, _, _ in rows)
    lines = [f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}" for name, ok, detail in rows]
    table = "\n".join(lines) + "\n"
    if cfg.output == "-":
        sys.stdout.write(table)
    else:
        sys.stdout.write(table)
        write_atomic(cfg.output, _dumps([{"check": n, "passed": ok, "detail": d} for n, ok, d in rows]))
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_VALIDATION


HANDLERS = {"orbits": cmd_orbits, "traces": cmd_traces, "det": cmd_det, "galerkin": cmd_galerkin,
            "count": cmd_count, "svd": cmd_svd, "sweep": cmd_sweep, "validate": cmd_validate}


def run(cfg: RunConfig) -> int:
    np.random.seed(cfg.seed)
    return HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except LefschetzMismatch as exc:
        sys.stderr.write(f"validation failure [{exc.code}]: {exc}\n")
        return EXIT_VALIDATION
    except RuelleError as exc:
        sys.stderr.write(f"error [{exc.code}]: {exc}\n")
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error [{type(exc).__name__}]: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
