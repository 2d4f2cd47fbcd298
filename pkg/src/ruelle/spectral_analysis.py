"""Resonance counting function and the ``|log r|^d`` growth diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .determinant import ResonanceSet
from .errors import GridBelowValidityFloor

MIN_POINTS = 4
WEYL_ANCHOR = 0.5


@dataclass(frozen=True)
class NotEstimable:
    """Flag value: the curve has too few points with ``N(r) >= 2`` for a regression."""

    reason: str
    points: int

    def __bool__(self):
        return False


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    ci_low: float
    ci_high: float
    points: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass(frozen=True)
class CountingCurve:
    moduli: np.ndarray
    r_grid: np.ndarray
    values: np.ndarray
    exponent_estimate: ExponentEstimate | NotEstimable | None = None
    fitted_C: float | None = None

    def __len__(self):
        return len(self.r_grid)

    @property
    def empty(self) -> bool:
        return len(self.moduli) == 0

    def rows(self):
        """``(r, N, log N, log|log r|)`` per grid point; ``log N`` is ``-inf`` when ``N = 0``."""
        with np.errstate(divide="ignore"):
            logn = np.log(self.values.astype(np.float64))
            llr = np.log(np.abs(np.log(self.r_grid)))
        return list(zip(self.r_grid.tolist(), self.values.tolist(), logn.tolist(), llr.tolist()))


def _moduli(resonances) -> np.ndarray:
    if isinstance(resonances, ResonanceSet):
        vals = np.abs(resonances.expanded())
    else:
        vals = np.abs(np.asarray(resonances, dtype=np.complex128).ravel())
    return np.sort(vals)[::-1]


def count_at(moduli: np.ndarray, r) -> np.ndarray:
    """``#{|lambda| >= r}`` for sorted-decreasing moduli."""
    asc = moduli[::-1]
    return len(asc) - np.searchsorted(asc, np.asarray(r, dtype=np.float64), side="left")


def counting_function(resonances, r_grid, r_min: float | None = None) -> CountingCurve:
    """Step function ``N(r)`` on the grid, with the exponent regression attached.

    Raises
    ------
    GridBelowValidityFloor
        If a grid point lies below the set's validity floor.
    ValueError
        If the grid is not strictly increasing.
    """
    r_grid = np.asarray(r_grid, dtype=np.float64).ravel()
    if len(r_grid) and np.any(np.diff(r_grid) <= 0):
        raise ValueError("r grid must be strictly increasing")
    if r_min is None and isinstance(resonances, ResonanceSet):
        r_min = resonances.r_min
    if r_min is not None and len(r_grid) and r_grid[0] < r_min * (1 - 1e-12):
        raise GridBelowValidityFloor(f"grid starts at {r_grid[0]:.4g}, below the validity floor {r_min:.4g}")
    moduli = _moduli(resonances)
    values = count_at(moduli, r_grid).astype(np.int64)
    curve = CountingCurve(moduli, r_grid, values)
    est = exponent_estimate(curve)
    return CountingCurve(moduli, r_grid, values, est, None)


def exponent_estimate(curve: CountingCurve, level: float = 0.95):
    """Slope of ``log N`` against ``log|log r|`` where ``N >= 2``, with a t-interval.

    Returns :class:`NotEstimable` with fewer than four usable points.
    """
    r = curve.r_grid
    use = (curve.values >= 2) & (r < 1)
    k = int(use.sum())
    if k < MIN_POINTS:
        return NotEstimable(f"only {k} grid points with N >= 2", k)
    x = np.log(np.abs(np.log(r[use])))
    y = np.log(curve.values[use].astype(np.float64))
    if np.ptp(x) == 0:
        return NotEstimable("degenerate abscissa", k)
    fit = stats.linregress(x, y)
    q = stats.t.ppf(0.5 + level / 2, k - 2)
    half = q * fit.stderr
    return ExponentEstimate(float(fit.slope), float(fit.slope - half), float(fit.slope + half), k)


@dataclass(frozen=True)
class WeylCheck:
    passed: bool
    fitted_C: float
    anchor: float | None
    worst_ratio: float


def weyl_bound_check(curve: CountingCurve, alpha_inverse: float = 2.0, anchor: float = WEYL_ANCHOR) -> WeylCheck:
    """``N(r) <= C |log r|^(1/alpha)`` on the whole grid, ``C`` fitted at one point.

    ``C`` is taken from the largest grid point ``r <= anchor`` with ``N >= 1``;
    an empty curve passes vacuously.  The bound is a small-``r`` statement
    (it degenerates as ``r -> 1``), so grid points above the anchor are not
    checked.
    """
    r, N = curve.r_grid, curve.values
    cand = np.flatnonzero((r <= anchor) & (N >= 1))
    if curve.empty or len(cand) == 0:
        return WeylCheck(True, 0.0, None, 0.0)
    i = cand[-1]
    C = float(N[i] / np.abs(np.log(r[i])) ** alpha_inverse)
    inner = r <= anchor
    bound = C * np.abs(np.log(r[inner])) ** alpha_inverse
    ok = N[inner] <= bound * (1 + 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, N[inner] / bound, np.where(N[inner] > 0, np.inf, 0.0))
    return WeylCheck(bool(ok.all()), C, float(r[i]), float(ratio.max()) if len(ratio) else 0.0)


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets in C; ``inf`` if exactly one is empty."""
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    D = np.abs(a[:, None] - b[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
