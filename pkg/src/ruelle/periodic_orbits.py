"""Fixed points of F^n, periodic-orbit trace sums and the Fourier-trace identity.

Every fixed point of ``F^n`` is labelled by the fixed point of the linear
model ``A^n`` it continues from.  Those are the points ``x* = c / D`` with
``D = |det(A^n - I)|`` and ``c`` running over one residue class each, so the
seeding is exact: one seed per expected fixed point.  Seeds are grouped into
``A``-orbits and each orbit is solved once by multiple-shooting Newton on the
cycle ``F(u_j) = u_{j+1} + p_j``; all its points are then read off the cycle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from collections.abc import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .errors import BudgetExceeded, LefschetzMismatch, LocalDiffeoViolation, NewtonDivergence
from .torus_maps import IntMatrix2, TorusMap, TrigPolynomial, evaluate, jacobian, require_certificate

ORBIT_BUDGET = 25.0          # n * log(lambda) ceiling
MAX_CLASSES = 3_000_000_000  # keeps class arithmetic inside int64
DEDUP_TOL = 1e-9
MAX_NEWTON_ITER = 60


@dataclass(frozen=True)
class FixedPointRecord:
    point: np.ndarray
    jacobian_power: np.ndarray
    det_factor: float
    sign: int
    weight_product: complex
    residual: float


@dataclass(frozen=True)
class TraceSequence:
    """Orbit sums ``t_1 .. t_N``."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128).ravel()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def order(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


# -- residue classes of the linear model -------------------------------------

def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """``(g, s, t)`` with ``s*a + t*b = g = gcd(a, b) >= 0``."""
    old_r, r, old_s, s, old_t, t = a, b, 1, 0, 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def residue_classes(A: IntMatrix2, n: int) -> tuple[int, np.ndarray, np.ndarray]:
    """Fixed points of the linear model ``A^n`` on T^2.

    Returns ``(D, c, m)`` where ``D = |det(A^n - I)|``, row ``c[i]`` gives the
    fixed point ``c[i] / D`` in ``[0, 1)^2`` and ``m[i] = (A^n - I) c[i] / D``
    is its integer lift label.
    """
    P = A.power(n)
    b11, b12, b21, b22 = P.a - 1, P.b, P.c, P.d - 1
    det = b11 * b22 - b12 * b21
    D = abs(det)
    if D == 0:
        raise ValueError("A^n - I is singular")
    if D > MAX_CLASSES:
        raise BudgetExceeded(f"{D} fixed points exceed the enumeration budget")
    # Hermite form of B: B U = [[h11, 0], [h21, h22]]; coset reps are (i, j), 0<=i<h11, 0<=j<h22
    g, s, t = _xgcd(b11, b12)
    h11 = g
    h22 = abs(det // g)
    i = np.repeat(np.arange(h11, dtype=np.int64), h22)
    j = np.tile(np.arange(h22, dtype=np.int64), h11)
    sgn = 1 if det > 0 else -1
    # adj(B) * m, reduced mod D
    adj = [[b22 * sgn % D, -b12 * sgn % D], [-b21 * sgn % D, b11 * sgn % D]]
    c1 = (adj[0][0] * i % D + adj[0][1] * j % D) % D
    c2 = (adj[1][0] * i % D + adj[1][1] * j % D) % D
    c = np.stack([c1, c2], axis=1)
    m1 = (b11 * c1 + b12 * c2) // D
    m2 = (b21 * c1 + b22 * c2) // D
    return D, c, np.stack([m1, m2], axis=1)


def _apply_mod(A: np.ndarray, c: np.ndarray, D: int) -> np.ndarray:
    return (c @ A.T) % D


def _orbit_structure(A: IntMatrix2, c: np.ndarray, D: int, n: int):
    """Representative (lexicographically smallest) class of each A-orbit and its period."""
    Ai = A.as_array()
    codes = c[:, 0] * D + c[:, 1]
    best = codes.copy()
    period = np.zeros(len(c), dtype=np.int64)
    cur = c
    for k in range(1, n + 1):
        cur = _apply_mod(Ai, cur, D)
        code = cur[:, 0] * D + cur[:, 1]
        np.minimum(best, code, out=best)
        period[(period == 0) & (code == codes)] = k
    is_rep = codes == best
    return np.flatnonzero(is_rep), period


def _seed_cycles(A: IntMatrix2, c0: np.ndarray, D: int, n: int):
    """Linear-model cycles: points ``c_j / D`` and integer offsets ``p_j``."""
    Ai = A.as_array()
    cs = np.empty((len(c0), n + 1, 2), dtype=np.int64)
    cs[:, 0] = c0
    for j in range(n):
        cs[:, j + 1] = _apply_mod(Ai, cs[:, j], D)
    p = (cs[:, :-1] @ Ai.T - cs[:, 1:]) // D
    return cs[:, :-1] / D, p.astype(np.float64)


# -- orbit solving ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Cycles:
    """Orbit-level solution data for one (map, n)."""

    n: int
    D: int
    lefschetz: int
    cycles: np.ndarray       # (P, n, 2) solved cycle points (lifted near [0, 1)^2)
    periods: np.ndarray      # (P,) minimal period
    labels: np.ndarray       # (P, 2) integer label m of the representative
    residual: np.ndarray     # (P,) max shooting defect
    jacobians: np.ndarray    # (P, n, 2, 2)
    det_value: np.ndarray    # (P,) det(I - DF^n), signed
    duplicates: int = 0


def _product(jac: np.ndarray, start: int) -> np.ndarray:
    """``J_{start+n-1} ... J_{start}`` (indices mod n), batched."""
    n = jac.shape[1]
    out = np.broadcast_to(np.eye(2), (jac.shape[0], 2, 2)).copy()
    for k in range(n):
        out = jac[:, (start + k) % n] @ out
    return out


@lru_cache(maxsize=64)
def _solve_cycles(fmap: TorusMap, n: int, newton_tol: float) -> _Cycles:
    A = fmap.linear
    D, c, m = residue_classes(A, n)
    reps, periods = _orbit_structure(A, c, D, n)
    u0, p = _seed_cycles(A, c[reps], D, n)
    v = [(comp.freqs, comp.coeffs) for comp in fmap.displacement]
    u, res, _, conv = _backend.shoot_orbits(
        u0, p, A.as_array().astype(np.float64), v[0], v[1], MAX_NEWTON_ITER, newton_tol)
    if not conv.all():
        bad = int(np.flatnonzero(~conv)[0])
        label = tuple(int(q) for q in m[reps[bad]])
        raise NewtonDivergence(
            f"shooting Newton did not converge for n={n}, seed m={label} "
            f"(residual {res[bad]:.3g})", m=label)
    jac = jacobian(fmap, u)
    phi = _product(jac, 0)
    det_phi = np.prod(np.linalg.det(jac), axis=1)
    det_value = 1.0 - (phi[:, 0, 0] + phi[:, 1, 1]) + det_phi
    cyc = _Cycles(n=n, D=D, lefschetz=A.lefschetz_number(n), cycles=u, periods=periods[reps],
                  labels=m[reps], residual=res, jacobians=jac, det_value=det_value)
    return _deduplicate(cyc)


def _deduplicate(cyc: _Cycles) -> _Cycles:
    pts, orbit, _ = _record_points(cyc)
    if len(pts) < 2:
        return cyc
    pairs = cKDTree(pts, boxsize=1.0).query_pairs(DEDUP_TOL, output_type="ndarray")
    if not len(pairs):
        return cyc
    a, b = orbit[pairs[:, 0]], orbit[pairs[:, 1]]
    drop = np.unique(np.maximum(a, b)[a != b])
    if not len(drop):
        return cyc
    keep = np.setdiff1d(np.arange(len(cyc.periods)), drop)
    return _Cycles(n=cyc.n, D=cyc.D, lefschetz=cyc.lefschetz, cycles=cyc.cycles[keep],
                   periods=cyc.periods[keep], labels=cyc.labels[keep], residual=cyc.residual[keep],
                   jacobians=cyc.jacobians[keep], det_value=cyc.det_value[keep],
                   duplicates=len(drop))


def _wrap(x: np.ndarray) -> np.ndarray:
    x = np.mod(x, 1.0)
    x[x >= 1.0] = 0.0
    return x


def _record_points(cyc: _Cycles):
    """Distinct fixed points (one per shift below the minimal period) and their orbit ids."""
    n = cyc.n
    shift = np.arange(n)
    mask = shift[None, :] < cyc.periods[:, None]
    orbit, sh = np.nonzero(mask)
    return _wrap(cyc.cycles[orbit, sh]), orbit, sh


class FixedPoints(Sequence):
    """All fixed points of ``F^n`` with their orbit data.

    Behaves as a sequence of :class:`FixedPointRecord`, sorted
    lexicographically by point; columnar arrays are exposed as attributes.
    """

    def __init__(self, cyc: _Cycles, g: TrigPolynomial):
        self._cyc = cyc
        self.n = cyc.n
        self.g = g
        vals = g(cyc.cycles)
        self._orbit_weight = np.prod(np.asarray(vals, dtype=np.complex128), axis=1)

    def with_weight(self, g: TrigPolynomial) -> "FixedPoints":
        return FixedPoints(self._cyc, g)

    @property
    def lefschetz_number(self) -> int:
        return self._cyc.lefschetz

    @property
    def duplicates_merged(self) -> int:
        return self._cyc.duplicates

    @cached_property
    def _layout(self):
        cyc = self._cyc
        pts, orbit, shift = _record_points(cyc)
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        return pts[order], orbit[order], shift[order]

    @property
    def points(self) -> np.ndarray:
        return self._layout[0]

    @property
    def orbit_index(self) -> np.ndarray:
        return self._layout[1]

    @property
    def det_factor(self) -> np.ndarray:
        return np.abs(self._cyc.det_value[self.orbit_index])

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self._cyc.det_value[self.orbit_index]).astype(np.int64)

    @property
    def weight_product(self) -> np.ndarray:
        return self._orbit_weight[self.orbit_index]

    @property
    def residual(self) -> np.ndarray:
        return self._cyc.residual[self.orbit_index]

    @cached_property
    def jacobian_power(self) -> np.ndarray:
        cyc = self._cyc
        _, orbit, shift = self._layout
        out = np.empty((len(orbit), 2, 2))
        for s in np.unique(shift):
            sel = shift == s
            out[sel] = _product(cyc.jacobians[orbit[sel]], int(s))
        return out

    def orbit_sum(self) -> complex:
        """``sum weight / |det(I - DF^n)|`` over all fixed points."""
        cyc = self._cyc
        return complex(np.sum(cyc.periods * self._orbit_weight / np.abs(cyc.det_value)))

    def __len__(self) -> int:
        return int(self._cyc.periods.sum())

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        o = self.orbit_index[i]
        return FixedPointRecord(
            point=self.points[i], jacobian_power=self.jacobian_power[i],
            det_factor=float(abs(self._cyc.det_value[o])),
            sign=int(np.sign(self._cyc.det_value[o])),
            weight_product=complex(self._orbit_weight[o]),
            residual=float(self._cyc.residual[o]))


def check_budget(fmap: TorusMap, n: int) -> None:
    from .torus_maps import splitting

    lam = splitting(fmap.linear).lambda_expanding
    if n < 1:
        raise ValueError("n must be positive")
    if n * math.log(lam) > ORBIT_BUDGET:
        raise BudgetExceeded(f"n*log(lambda) = {n * math.log(lam):.2f} exceeds {ORBIT_BUDGET}")


def enumerate_fixed_points(fmap: TorusMap, n: int, newton_tol: float = 1e-11,
                           g: TrigPolynomial | None = None) -> FixedPoints:
    """Every solution of ``F^n(x) = x`` on T^2.

    ``g`` only sets the orbit weights carried by the records (default 1).

    Raises
    ------
    ConeCertificateMissing
        The map fails the cone check.
    BudgetExceeded
        ``n * log(lambda) > 25``.
    NewtonDivergence
        A seed did not converge within 60 iterations.
    """
    require_certificate(fmap)
    check_budget(fmap, n)
    cyc = _solve_cycles(fmap, int(n), float(newton_tol))
    return FixedPoints(cyc, g if g is not None else TrigPolynomial.constant(1.0))


@dataclass(frozen=True)
class LefschetzResult:
    passed: bool
    signed_sum: int
    expected: int

    def __bool__(self):
        return self.passed


def lefschetz_check(records, A: IntMatrix2, n: int) -> LefschetzResult:
    """Signed fixed-point count against ``det(I - A^n)``."""
    if isinstance(records, FixedPoints):
        total = int(records.signs.sum())
    else:
        total = int(sum(int(r.sign) for r in records))
    expected = A.lefschetz_number(n)
    return LefschetzResult(total == expected, total, expected)


def trace_sum(fmap: TorusMap, g: TrigPolynomial, n: int, newton_tol: float = 1e-11) -> complex:
    """``t_n = sum over F^n x = x of prod_k g(F^k x) / |det(I - D_x F^n)|``."""
    fps = enumerate_fixed_points(fmap, n, newton_tol, g=g)
    check = lefschetz_check(fps, fmap.linear, n)
    if not check:
        raise LefschetzMismatch(
            f"n={n}: signed count {check.signed_sum} != det(I - A^n) = {check.expected}")
    return fps.orbit_sum()


def trace_sequence(fmap: TorusMap, g: TrigPolynomial, order: int,
                   newton_tol: float = 1e-11) -> TraceSequence:
    return TraceSequence([trace_sum(fmap, g, n, newton_tol) for n in range(1, order + 1)])


# -- Fourier-trace identity ---------------------------------------------------

def _next_pow2(x: float) -> int:
    return 1 << max(2, math.ceil(math.log2(max(x, 4))))


def default_fourier_grid(fmap: TorusMap, n: int, mode_cutoff: int) -> int:
    """Grid resolving the integrand's oscillation ``|(A^n - I)^T m|`` plus a spread margin."""
    P = fmap.linear.power(n)
    rows = max(abs(P.a - 1) + abs(P.c), abs(P.b) + abs(P.d - 1))
    return _next_pow2(max(4 * mode_cutoff, 2 * mode_cutoff * rows + 32))


def fourier_trace(fmap: TorusMap, g: TrigPolynomial, n: int, mode_cutoff: int,
                  grid_size: int | None = None, diffeo_tol: float = 1e-8) -> complex:
    """Partial sum ``sum_{|m| <= cutoff} <L^n e_m, e_m>`` of diagonal Fourier matrix elements.

    Each term is the grid average of ``prod_k g(F^k x) * exp(2 pi i m.(F^n x - x))``.
    """
    if grid_size is None:
        grid_size = default_fourier_grid(fmap, n, mode_cutoff)
    if grid_size & (grid_size - 1) or grid_size < 4 * mode_cutoff:
        raise ValueError("grid_size must be a power of two >= 4 * mode_cutoff")
    s = np.arange(grid_size) / grid_size
    x = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)

    y = x.copy()
    weight = np.ones(len(x), dtype=np.complex128)
    jac = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
    for _ in range(n):
        weight *= g(y)
        jac = jacobian(fmap, y) @ jac
        y = np.mod(evaluate(fmap, y), 1.0)
    gap = jac - np.eye(2)
    if np.min(np.abs(np.linalg.det(gap))) <= diffeo_tol:
        raise LocalDiffeoViolation(f"det(DF^{n} - I) vanishes on the grid")

    # phase m.(F^n x - x) modulo integers
    delta = y - x
    modes = np.arange(-mode_cutoff, mode_cutoff + 1)
    e1 = np.exp(2j * np.pi * modes[:, None] * delta[None, :, 0])
    e2 = np.exp(2j * np.pi * modes[:, None] * delta[None, :, 1])
    diag = (e1 * weight) @ e2.T / len(x)
    return complex(diag.sum())
