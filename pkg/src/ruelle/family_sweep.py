"""Full pipeline along one-parameter families ``F_t = A x + v0(x) + t w(x)``."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .determinant import determinant_coefficients, resonances_from_determinant
from .errors import RuelleError
from .galerkin import EscapeWeight, assemble, resonances_from_galerkin
from .periodic_orbits import trace_sequence
from .spectral_analysis import NotEstimable, counting_function, hausdorff_distance, weyl_bound_check
from .torus_maps import TorusMap, TrigPolynomial, map_from_dict, map_to_dict, verify_cone_condition

CONTINUITY_STEP = 0.01
CONTINUITY_TOL = 0.1
LEADING_TOL = 1e-6
SUMMARY_LEADING = 3


@dataclass(frozen=True)
class PipelineConfig:
    trace_order: int = 10
    cutoff: int = 12
    gamma: float = 0.5
    sigma: float = 1.0
    r_min: float = 0.05
    r_grid: tuple[float, ...] = tuple(np.geomspace(0.05, 0.5, 10).tolist())

    def __post_init__(self):
        if not 1 <= self.trace_order <= 25:
            raise ValueError("trace_order must lie in [1, 25]")
        if not 1 <= self.cutoff <= 35:
            raise ValueError("cutoff must lie in [1, 35]")
        if self.gamma <= 0 or self.sigma < 1 or self.r_min <= 0:
            raise ValueError("need gamma > 0, sigma >= 1, r_min > 0")
        grid = tuple(float(r) for r in self.r_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])) or (grid and grid[0] < self.r_min):
            raise ValueError("r_grid must be strictly increasing and start at or above r_min")
        object.__setattr__(self, "r_grid", grid)

    KEYS = ("trace_order", "cutoff", "gamma", "sigma", "r_min", "r_grid")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown pipeline keys {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: (list(getattr(self, k)) if k == "r_grid" else getattr(self, k)) for k in self.KEYS}


@dataclass(frozen=True)
class SweepPlan:
    """One-parameter family; ``g_t = g + t * g_direction`` (``g_direction`` optional)."""

    base_map: TorusMap
    direction: tuple[TrigPolynomial, TrigPolynomial]
    t_values: tuple[float, ...]
    g: TrigPolynomial = field(default_factory=lambda: TrigPolynomial.constant(1.0))
    g_direction: TrigPolynomial | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        object.__setattr__(self, "t_values", tuple(float(t) for t in self.t_values))

    def map_at(self, t: float) -> TorusMap:
        return self.base_map.perturbed(self.direction, t)

    def weight_at(self, t: float) -> TrigPolynomial:
        if self.g_direction is None:
            return self.g
        return self.g + self.g_direction.scale(t)

    KEYS = ("map", "direction", "t_values", "g", "g_direction", "pipeline", "name", "description")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SweepPlan":
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown sweep-plan keys {sorted(unknown)}")
        fmap, g = map_from_dict(data["map"])
        direction = data.get("direction", [[], []])
        if len(direction) != 2:
            raise ValueError("'direction' must list coefficients for exactly two components")
        w = tuple(TrigPolynomial.from_json(c, real_valued=True) for c in direction)
        if "g" in data:
            g = TrigPolynomial.from_json(data["g"])
        gd = TrigPolynomial.from_json(data["g_direction"]) if data.get("g_direction") else None
        pipe = PipelineConfig.from_dict(data.get("pipeline", {}))
        return cls(fmap, w, tuple(data["t_values"]), g, gd, pipe)

    def to_dict(self) -> dict:
        out = {"map": map_to_dict(self.base_map, self.g),
               "direction": [c.to_json() for c in self.direction],
               "t_values": list(self.t_values),
               "pipeline": self.pipeline.to_dict()}
        if self.g_direction is not None:
            out["g_direction"] = self.g_direction.to_json()
        return out


@dataclass
class TReport:
    t: float
    status: str                      # ok | skipped | error
    error: str | None = None
    traces: list[complex] = field(default_factory=list)
    coefficients: list[complex] = field(default_factory=list)
    reliability_radius: float | None = None
    determinant_floor: float | None = None
    determinant_resonances: list[dict] = field(default_factory=list)
    galerkin_resonances: list[dict] = field(default_factory=list)
    exponent: float | None = None
    exponent_ci: tuple[float, float] | None = None
    weyl_pass: bool | None = None
    weyl_C: float | None = None
    cross_validation: float | None = None
    leading: list[complex] = field(default_factory=list)
    underflow_count: int = 0

    def to_json(self) -> dict:
        def cx(z):
            return {"re": float(np.real(z)), "im": float(np.imag(z))}
        return {
            "t": self.t, "status": self.status, "error": self.error,
            "traces": [cx(z) for z in self.traces],
            "coefficients": [cx(z) for z in self.coefficients],
            "reliability_radius": self.reliability_radius,
            "determinant_floor": self.determinant_floor,
            "determinant_resonances": self.determinant_resonances,
            "galerkin_resonances": self.galerkin_resonances,
            "exponent": self.exponent,
            "exponent_ci": list(self.exponent_ci) if self.exponent_ci else None,
            "weyl_pass": self.weyl_pass, "weyl_C": self.weyl_C,
            "cross_validation": self.cross_validation,
            "leading": [cx(z) for z in self.leading],
            "underflow_count": self.underflow_count,
        }


def run_single(fmap: TorusMap, g: TrigPolynomial, cfg: PipelineConfig, t: float = 0.0) -> TReport:
    """Traces, determinant, Galerkin spectrum and counting diagnostics for one map."""
    cert = verify_cone_condition(fmap)
    if not cert.passed:
        return TReport(t, "skipped", f"torus_maps.ConeCertificateMissing: worst expansion "
                                     f"{cert.worst_expansion:.4g}")
    try:
        traces = trace_sequence(fmap, g, cfg.trace_order)
        series = determinant_coefficients(traces)
        floor = max(cfg.r_min, 1.0 / series.reliability_radius)
        det_set = resonances_from_determinant(series, floor)
        op = assemble(fmap, g, cfg.cutoff, EscapeWeight.for_matrix(fmap.linear, cfg.gamma, cfg.sigma))
        gal_set = resonances_from_galerkin(op, cfg.r_min)
        curve = counting_function(gal_set, cfg.r_grid)
        weyl = weyl_bound_check(curve, 2.0 * cfg.sigma)
        gal_vals = gal_set.expanded()
        xval = hausdorff_distance(det_set.expanded(), gal_vals[np.abs(gal_vals) >= floor])
    except RuelleError as exc:
        return TReport(t, "error", f"{exc.code}: {exc}")
    est = curve.exponent_estimate
    return TReport(
        t, "ok", None, list(traces.values), list(series.coefficients), series.reliability_radius, floor,
        det_set.to_json(), gal_set.to_json(),
        None if isinstance(est, NotEstimable) else est.value,
        None if isinstance(est, NotEstimable) else (est.ci_low, est.ci_high),
        weyl.passed, weyl.fitted_C, xval, list(gal_set.values[:SUMMARY_LEADING]), op.underflow_count)


@dataclass
class SweepResult:
    plan: SweepPlan
    reports: list[TReport]
    continuity_flags: list[tuple[float, float, float]]

    def summary_rows(self) -> list[dict]:
        """One row per t, ordered by exponent estimate (non-estimable last), then t."""
        def key(r):
            return (r.exponent is None, r.exponent if r.exponent is not None else 0.0, r.t)
        rows = []
        for r in sorted(self.reports, key=key):
            row = {"t": r.t, "status": r.status}
            for i in range(SUMMARY_LEADING):
                row[f"leading_{i + 1}"] = (f"{r.leading[i].real:.12g}{r.leading[i].imag:+.12g}j"
                                           if i < len(r.leading) else "")
            row["exponent"] = "" if r.exponent is None else f"{r.exponent:.12g}"
            row["weyl_pass"] = "" if r.weyl_pass is None else str(r.weyl_pass).lower()
            rows.append(row)
        return rows

    def summary_csv(self) -> str:
        rows = self.summary_rows()
        buf = io.StringIO()
        fields = ["t", "status"] + [f"leading_{i + 1}" for i in range(SUMMARY_LEADING)] + ["exponent", "weyl_pass"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"plan": self.plan.to_dict(),
                "reports": [r.to_json() for r in self.reports],
                "continuity_flags": [list(f) for f in self.continuity_flags]}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RUELLE_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(plan: SweepPlan, workers: int | None = None) -> SweepResult:
    """Process every ``t`` independently; reports come back in ``plan.t_values`` order.

    Failures are recorded per ``t`` and never abort the sweep.  Neighbouring
    parameters closer than 0.01 whose resonance sets differ by more than 0.1
    in Hausdorff distance are flagged (not raised).
    """
    workers = min(workers or _threads(), max(1, len(plan.t_values)))

    def job(t):
        try:
            return run_single(plan.map_at(t), plan.weight_at(t), plan.pipeline, t)
        except Exception as exc:  # noqa: BLE001 - a sweep never aborts on one t
            return TReport(t, "error", f"{type(exc).__name__}: {exc}")

    if workers == 1:
        reports = [job(t) for t in plan.t_values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, plan.t_values))

    flags = []
    ok = sorted((r for r in reports if r.status == "ok"), key=lambda r: r.t)
    for a, b in zip(ok, ok[1:]):
        if 0 < b.t - a.t <= CONTINUITY_STEP + 1e-12:
            d = hausdorff_distance([complex(e["re"], e["im"]) for e in a.galerkin_resonances],
                                   [complex(e["re"], e["im"]) for e in b.galerkin_resonances])
            if d > CONTINUITY_TOL:
                flags.append((a.t, b.t, d))
    return SweepResult(plan, reports, flags)


def load_plan(path) -> SweepPlan:
    with open(path) as fh:
        return SweepPlan.from_dict(json.load(fh))
