"""Taylor series of the dynamical determinant and its zeros.

The series ``d(z) = exp(-sum_n t_n z^n / n)`` is built from the orbit sums by
the log-derivative recursion ``m c_m = -sum_{j=1..m} t_j c_{m-j}``.  Zeros are
the inverse resonances; only those inside the reliability radius (where the
truncated series is trusted) are used downstream.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .errors import DegenerateSeries, GridBelowValidityFloor
from .periodic_orbits import TraceSequence

CLUSTER_TOL = 1e-6
TAIL_RATIO = 1e-8
STRIP_TOL = 1e-13
# geometric grid searched for the reliability radius
RADIUS_GRID = np.logspace(-2, 6, 321)


@dataclass(frozen=True)
class DeterminantSeries:
    coefficients: np.ndarray
    reliability_radius: float

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128).ravel()
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        return evaluate_determinant(self, z)


@dataclass(frozen=True)
class Resonance:
    value: complex
    multiplicity: int
    source: str
    residual: float


@dataclass(frozen=True)
class ResonanceSet:
    entries: tuple[Resonance, ...]
    r_min: float

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(sorted(self.entries, key=lambda e: -abs(e.value))))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries], dtype=np.complex128)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity for e in self.entries], dtype=np.int64)

    @property
    def total_multiplicity(self) -> int:
        return int(self.multiplicities.sum()) if self.entries else 0

    def expanded(self) -> np.ndarray:
        """Values repeated by multiplicity."""
        if not self.entries:
            return np.zeros(0, dtype=np.complex128)
        return np.repeat(self.values, self.multiplicities)

    def to_json(self) -> list[dict]:
        return [{"re": e.value.real, "im": e.value.imag, "modulus": abs(e.value),
                 "multiplicity": e.multiplicity, "source": e.source, "residual": e.residual}
                for e in self.entries]


def reliability_radius(coefficients, grid=RADIUS_GRID, ratio: float = TAIL_RATIO) -> float:
    """Largest grid radius where the upper half of the series is negligible against the lower half.

    Coefficients below the round-off floor ``STRIP_TOL * max|c|`` count as zero,
    the same floor the zero finder strips at.
    """
    c = np.abs(np.asarray(coefficients))
    c = np.where(c < STRIP_TOL * c.max(), 0.0, c) if len(c) else c
    M = len(c) - 1
    if M < 1:
        return float(grid[0])
    m = np.arange(M + 1)
    head = m <= M / 2
    best = float(grid[0])
    for R in grid:
        with np.errstate(over="ignore", under="ignore"):
            logs = np.where(c > 0, np.log(np.where(c > 0, c, 1.0)) + m * np.log(R), -np.inf)
        top = logs[head].max()
        tail = logs[~head].max() if (~head).any() else -np.inf
        if tail <= np.log(ratio) + top:
            best = float(R)
        else:
            break
    return best


def determinant_coefficients(traces: TraceSequence) -> DeterminantSeries:
    """Coefficients ``c_0 .. c_N`` of ``exp(-sum t_n z^n / n)`` truncated at the trace order.

    Coefficients below ``STRIP_TOL * max|c|`` are recursion round-off and are
    set to zero, so evaluation agrees with the reliability radius.
    """
    t = np.asarray(traces.values if isinstance(traces, TraceSequence) else traces, dtype=np.complex128)
    M = len(t)
    if M < 1:
        raise ValueError("need at least one trace")
    c = np.zeros(M + 1, dtype=np.complex128)
    c[0] = 1.0
    for m in range(1, M + 1):
        c[m] = -np.dot(t[:m], c[m - 1::-1]) / m
    c[np.abs(c) < STRIP_TOL * np.abs(c).max()] = 0.0
    return DeterminantSeries(c, reliability_radius(c))


def recursion_residual(series: DeterminantSeries, traces) -> float:
    """``max_m |m c_m + sum_j t_j c_{m-j}|`` over the computed orders."""
    t = np.asarray(traces.values if isinstance(traces, TraceSequence) else traces, dtype=np.complex128)
    c = series.coefficients
    return float(max((abs(m * c[m] + np.dot(t[:m], c[m - 1::-1])) for m in range(1, len(c))), default=0.0))


def evaluate_determinant(series: DeterminantSeries, z):
    """Horner evaluation of the truncated series."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(z) > series.reliability_radius * (1 + 1e-12)):
        warnings.warn("evaluating the determinant outside its reliability radius", RuntimeWarning,
                      stacklevel=2)
    out = np.zeros_like(z)
    for coef in series.coefficients[::-1]:
        out = out * z + coef
    return out if out.ndim else complex(out)


def _stripped(c: np.ndarray) -> np.ndarray:
    scale = np.abs(c).max()
    keep = len(c)
    while keep > 1 and abs(c[keep - 1]) < STRIP_TOL * scale:
        keep -= 1
    return c[:keep]


def companion_roots(coefficients) -> np.ndarray:
    """Roots of ``sum_m c_m z^m`` as eigenvalues of the companion matrix."""
    c = _stripped(np.asarray(coefficients, dtype=np.complex128))
    deg = len(c) - 1
    if deg < 1:
        return np.zeros(0, dtype=np.complex128)
    comp = np.zeros((deg, deg), dtype=np.complex128)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


def determinant_zeros(series: DeterminantSeries) -> np.ndarray:
    """Zeros inside the reliability disk.

    Raises
    ------
    DegenerateSeries
        If every coefficient beyond ``c_0`` is negligible.
    """
    c = _stripped(series.coefficients)
    if len(c) < 2:
        raise DegenerateSeries("all coefficients c_m, m >= 1, are below threshold")
    roots = companion_roots(c)
    roots = roots[np.abs(roots) <= series.reliability_radius]
    return roots[np.argsort(np.abs(roots), kind="stable")]


def cluster_values(values, tol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
    """Single-linkage clusters of nearby points as ``(mean, count)`` pairs."""
    values = np.asarray(values, dtype=np.complex128)
    if len(values) == 0:
        return []
    if len(values) == 1:
        return [(complex(values[0]), 1)]
    pts = np.column_stack([values.real, values.imag])
    labels = fcluster(linkage(pts, method="single"), t=tol, criterion="distance")
    out = []
    for lab in np.unique(labels):
        members = values[labels == lab]
        out.append((complex(members.mean()), len(members)))
    return out


def resonances_from_determinant(series: DeterminantSeries, r_min: float) -> ResonanceSet:
    """Inverse zeros ``1/z`` with ``|1/z| >= r_min``, multiplicities by clustering."""
    if r_min * series.reliability_radius < 1 - 1e-12:
        raise GridBelowValidityFloor(
            f"r_min={r_min} is below the validity floor 1/R = {1 / series.reliability_radius:.4g}")
    try:
        zeros = determinant_zeros(series)
    except DegenerateSeries:
        if np.all(series.coefficients[1:] == 0):
            return ResonanceSet((), r_min)
        raise
    entries = []
    scale = np.abs(series.coefficients).max()
    for z, mult in cluster_values(zeros):
        lam = 1.0 / z
        if abs(lam) >= r_min:
            resid = abs(evaluate_determinant(series, z)) / scale
            entries.append(Resonance(lam, mult, "determinant", float(resid)))
    return ResonanceSet(tuple(entries), r_min)


@dataclass(frozen=True)
class GrowthProfile:
    radii: np.ndarray
    max_log_abs: np.ndarray
    slope: float | None
    intercept: float | None


def growth_profile(series: DeterminantSeries, radii, angles: int = 256) -> GrowthProfile:
    """``max_{|z|=r} log|d(z)|`` per radius, with the order-of-growth regression.

    The slope of ``log(max log|d|)`` against ``log log(1 + r)`` is fitted over
    the radii where ``max log|d| > 0``; ``None`` if fewer than two qualify.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii > series.reliability_radius * (1 + 1e-12)):
        raise ValueError("radii must lie inside the reliability radius")
    theta = 2 * np.pi * np.arange(angles) / angles
    z = radii[:, None] * np.exp(1j * theta)[None, :]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = np.abs(evaluate_determinant(series, z))
        logs = np.log(vals).max(axis=1)
    use = logs > 0
    slope = intercept = None
    if use.sum() >= 2:
        x = np.log(np.log1p(radii[use]))
        y = np.log(logs[use])
        slope, intercept = np.polyfit(x, y, 1)
        slope, intercept = float(slope), float(intercept)
    return GrowthProfile(radii, logs, slope, intercept)
