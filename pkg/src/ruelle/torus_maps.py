"""Analytic Anosov maps of the 2-torus.

A map is stored through its lift ``F(x) = A x + v(x)`` on R^2, where ``A`` is a
hyperbolic matrix in SL(2, Z) and ``v`` is a Z^2-periodic displacement whose
two components are real trigonometric polynomials.  Points are numpy arrays
whose last axis has length 2; every routine here broadcasts over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import NotHyperbolic

TWO_PI = 2.0 * math.pi

# relative tolerance for the conjugate-symmetry test of real polynomials
_REAL_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class IntMatrix2:
    """Row-major integer 2x2 matrix ``[[a, b], [c, d]]`` with determinant 1."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in "abcd":
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"matrix entry {name}={value!r} is not an integer")
            object.__setattr__(self, name, int(value))
        if self.det != 1:
            raise ValueError(f"linear part must have det 1, got det={self.det}")

    @classmethod
    def from_rows(cls, rows) -> "IntMatrix2":
        (a, b), (c, d) = rows
        return cls(a, b, c, d)

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> int:
        return self.a + self.d

    @property
    def is_hyperbolic(self) -> bool:
        return abs(self.trace) > 2

    def rows(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def as_array(self) -> np.ndarray:
        return np.array(self.rows(), dtype=np.int64)

    def transpose(self) -> "IntMatrix2":
        return IntMatrix2(self.a, self.c, self.b, self.d)

    def __matmul__(self, other: "IntMatrix2") -> "IntMatrix2":
        return IntMatrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def power(self, n: int) -> "IntMatrix2":
        """Exact ``A**n`` for ``n >= 0`` (Python integers, no overflow)."""
        if n < 0:
            raise ValueError("negative powers are not supported")
        result = IntMatrix2(1, 0, 0, 1)
        base = self
        while n:
            if n & 1:
                result = result @ base
            base = base @ base
            n >>= 1
        return result

    def lefschetz_number(self, n: int) -> int:
        """``det(I - A**n)``, the signed number of fixed points of ``A**n`` on T^2."""
        p = self.power(n)
        return (1 - p.a) * (1 - p.d) - p.b * p.c


class TrigPolynomial:
    """Finite Fourier sum ``x -> sum_k c_k exp(2 pi i k.x)`` on T^2.

    ``real_valued=None`` infers the flag from conjugate symmetry; passing
    ``True`` enforces it and raises ``ValueError`` on violation.
    """

    __slots__ = ("freqs", "coeffs", "real_valued")

    def __init__(self, terms: Mapping[tuple[int, int], complex] | None = None,
                 real_valued: bool | None = None):
        merged: dict[tuple[int, int], complex] = {}
        for k, c in (terms or {}).items():
            k1, k2 = (int(k[0]), int(k[1]))
            if (k1, k2) != tuple(k):
                raise ValueError(f"frequency {k!r} is not an integer pair")
            merged[(k1, k2)] = merged.get((k1, k2), 0.0) + complex(c)
        merged = {k: c for k, c in merged.items() if c != 0}
        keys = sorted(merged)
        freqs = np.array(keys, dtype=np.int64).reshape(-1, 2)
        coeffs = np.array([merged[k] for k in keys], dtype=np.complex128)
        freqs.flags.writeable = False
        coeffs.flags.writeable = False
        symmetric = _is_conjugate_symmetric(merged)
        if real_valued is None:
            real_valued = symmetric
        elif real_valued and not symmetric:
            raise ValueError("real_valued polynomial needs c[-k] == conj(c[k]) for every k")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "real_valued", bool(real_valued))

    def __setattr__(self, name, value):
        raise AttributeError("TrigPolynomial is immutable")

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, value: complex = 1.0) -> "TrigPolynomial":
        return cls({(0, 0): value})

    @classmethod
    def zero(cls) -> "TrigPolynomial":
        return cls({}, real_valued=True)

    @classmethod
    def cosine(cls, k, amplitude: float = 1.0) -> "TrigPolynomial":
        """``amplitude * cos(2 pi k.x)``."""
        k = (int(k[0]), int(k[1]))
        return cls({k: amplitude / 2, (-k[0], -k[1]): amplitude / 2}, real_valued=True)

    @classmethod
    def sine(cls, k, amplitude: float = 1.0) -> "TrigPolynomial":
        """``amplitude * sin(2 pi k.x)``."""
        k = (int(k[0]), int(k[1]))
        return cls({k: -0.5j * amplitude, (-k[0], -k[1]): 0.5j * amplitude}, real_valued=True)

    # -- algebra -----------------------------------------------------------
    def terms(self) -> dict[tuple[int, int], complex]:
        return {(int(k[0]), int(k[1])): complex(c) for k, c in zip(self.freqs, self.coeffs)}

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        merged = self.terms()
        for k, c in other.terms().items():
            merged[k] = merged.get(k, 0.0) + c
        real = None if self.real_valued and other.real_valued else False
        return TrigPolynomial(merged, real_valued=real)

    def scale(self, factor: complex) -> "TrigPolynomial":
        real = None if (self.real_valued and complex(factor).imag == 0) else False
        return TrigPolynomial({k: c * factor for k, c in self.terms().items()}, real_valued=real)

    def __mul__(self, other):
        if isinstance(other, TrigPolynomial):
            out: dict[tuple[int, int], complex] = {}
            for k, c in self.terms().items():
                for q, e in other.terms().items():
                    key = (k[0] + q[0], k[1] + q[1])
                    out[key] = out.get(key, 0.0) + c * e
            return TrigPolynomial(out)
        return self.scale(other)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        return (self.real_valued == other.real_valued
                and np.array_equal(self.freqs, other.freqs)
                and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.freqs.tobytes(), self.coeffs.tobytes(), self.real_valued))

    def __repr__(self) -> str:
        return f"TrigPolynomial({self.terms()!r}, real_valued={self.real_valued})"

    @property
    def is_constant(self) -> bool:
        return not np.any(self.freqs)

    def sup_bound(self) -> float:
        """Upper bound ``sum |c_k|`` for the sup norm on real points."""
        return float(np.abs(self.coeffs).sum())

    def max_frequency(self) -> int:
        return int(np.abs(self.freqs).max()) if len(self.freqs) else 0

    # -- evaluation --------------------------------------------------------
    def _modes(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.exp(1j * TWO_PI * (x @ self.freqs.T.astype(np.float64)))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if not len(self.coeffs):
            shape = x.shape[:-1]
            return np.zeros(shape) if self.real_valued else np.zeros(shape, complex)
        value = self._modes(x) @ self.coeffs
        return value.real if self.real_valued else value

    def gradient(self, x) -> np.ndarray:
        """Exact gradient, shape ``x.shape``; real for real polynomials."""
        x = np.asarray(x, dtype=np.float64)
        if not len(self.coeffs):
            out = np.zeros(x.shape)
            return out if self.real_valued else out.astype(complex)
        weighted = (1j * TWO_PI) * self.coeffs[:, None] * self.freqs
        grad = self._modes(x) @ weighted
        return grad.real if self.real_valued else grad

    # -- serialization -----------------------------------------------------
    def to_json(self) -> list[dict]:
        return [{"k": [int(k[0]), int(k[1])], "re": float(c.real), "im": float(c.imag)}
                for k, c in zip(self.freqs, self.coeffs)]

    @classmethod
    def from_json(cls, entries: Iterable[Mapping], real_valued: bool | None = None) -> "TrigPolynomial":
        terms: dict[tuple[int, int], complex] = {}
        for i, entry in enumerate(entries):
            unknown = set(entry) - {"k", "re", "im"}
            if unknown:
                raise ValueError(f"coefficient entry {i}: unknown keys {sorted(unknown)}")
            k = entry["k"]
            if len(k) != 2 or any(isinstance(q, bool) or int(q) != q for q in k):
                raise ValueError(f"coefficient entry {i}: frequency must be two integers, got {k!r}")
            key = (int(k[0]), int(k[1]))
            terms[key] = terms.get(key, 0.0) + complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
        return cls(terms, real_valued=real_valued)


def _is_conjugate_symmetric(terms: Mapping[tuple[int, int], complex]) -> bool:
    if not terms:
        return True
    scale = max(abs(c) for c in terms.values())
    for (k1, k2), c in terms.items():
        partner = terms.get((-k1, -k2), 0.0)
        if abs(partner - c.conjugate()) > _REAL_SYMMETRY_TOL * scale:
            return False
    return True


@dataclass(frozen=True)
class HyperbolicSplitting:
    """Eigen-data of ``A^T``: expanding/contracting unit eigenvectors.

    ``eigenvalue_expanding`` carries the sign of ``trace(A)``;
    ``lambda_expanding`` is its modulus.
    """

    lambda_expanding: float
    u_expand: np.ndarray
    u_contract: np.ndarray
    eigenvalue_expanding: float
    eigenvalue_contracting: float

    def coordinates(self, k) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of frequency vectors ``k`` in the basis (u_expand, u_contract)."""
        basis = np.column_stack([self.u_expand, self.u_contract])
        coords = np.linalg.solve(basis, np.asarray(k, dtype=np.float64).reshape(-1, 2).T)
        shape = np.shape(k)[:-1]
        return coords[0].reshape(shape), coords[1].reshape(shape)


@dataclass(frozen=True)
class ConeCertificate:
    passed: bool
    worst_expansion: float
    worst_angle: float
    cone_angle: float
    grid_size: int

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True, eq=False)
class TorusMap:
    """Lift ``F(x) = A x + v(x)`` of an analytic map of T^2."""

    linear: IntMatrix2
    displacement: tuple[TrigPolynomial, TrigPolynomial] = field(
        default_factory=lambda: (TrigPolynomial.zero(), TrigPolynomial.zero()))

    def __post_init__(self):
        if not isinstance(self.linear, IntMatrix2):
            object.__setattr__(self, "linear", IntMatrix2.from_rows(self.linear))
        if not self.linear.is_hyperbolic:
            raise NotHyperbolic(f"|trace A| = {abs(self.linear.trace)} <= 2")
        v1, v2 = self.displacement
        if not (v1.real_valued and v2.real_valued):
            raise ValueError("displacement components must be real-valued")
        object.__setattr__(self, "displacement", (v1, v2))

    @classmethod
    def cat(cls, rows=((2, 1), (1, 1))) -> "TorusMap":
        return cls(IntMatrix2.from_rows(rows))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TorusMap):
            return NotImplemented
        return self.linear == other.linear and self.displacement == other.displacement

    def __hash__(self):
        return hash((self.linear, self.displacement))

    @property
    def is_linear(self) -> bool:
        return all(len(c.coeffs) == 0 for c in self.displacement)

    def displacement_bound(self) -> float:
        """``max_i sup |v_i|`` bounded by coefficient sums."""
        return max(c.sup_bound() for c in self.displacement)

    def perturbed(self, direction: tuple[TrigPolynomial, TrigPolynomial], t: float) -> "TorusMap":
        """The map ``A x + v(x) + t * w(x)``."""
        return TorusMap(self.linear, tuple(v + w.scale(t) for v, w in zip(self.displacement, direction)))

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def evaluate(fmap: TorusMap, x) -> np.ndarray:
    """Lift evaluation ``A x + v(x)``."""
    x = np.asarray(x, dtype=np.float64)
    lin = x @ fmap.linear.as_array().T.astype(np.float64)
    v1, v2 = fmap.displacement
    return lin + np.stack([v1(x), v2(x)], axis=-1)


def jacobian(fmap: TorusMap, x) -> np.ndarray:
    """``A + Dv(x)``, shape ``x.shape[:-1] + (2, 2)``."""
    x = np.asarray(x, dtype=np.float64)
    v1, v2 = fmap.displacement
    dv = np.stack([v1.gradient(x), v2.gradient(x)], axis=-2)
    return fmap.linear.as_array().astype(np.float64) + dv


def _eigvec(m: np.ndarray, mu: float) -> np.ndarray:
    shifted = m - mu * np.eye(2)
    row = shifted[np.argmax(np.abs(shifted).sum(axis=1))]
    vec = np.array([-row[1], row[0]])
    vec /= np.linalg.norm(vec)
    pivot = vec[np.argmax(np.abs(vec) > 1e-12)]
    return vec if pivot > 0 else -vec


def _split(m: np.ndarray, trace: int) -> HyperbolicSplitting:
    lam = (abs(trace) + math.sqrt(trace * trace - 4)) / 2
    sgn = 1.0 if trace > 0 else -1.0
    return HyperbolicSplitting(
        lambda_expanding=lam,
        u_expand=_eigvec(m, sgn * lam),
        u_contract=_eigvec(m, sgn / lam),
        eigenvalue_expanding=sgn * lam,
        eigenvalue_contracting=sgn / lam,
    )


def splitting(A: IntMatrix2) -> HyperbolicSplitting:
    """Eigen-decomposition of ``A^T`` (the action of ``A`` on frequencies).

    Raises
    ------
    NotHyperbolic
        If ``|trace A| <= 2``.
    """
    if not A.is_hyperbolic:
        raise NotHyperbolic(f"matrix {A.rows()} has |trace| = {abs(A.trace)} <= 2")
    return _split(A.transpose().as_array().astype(np.float64), A.trace)


def tangent_splitting(A: IntMatrix2) -> HyperbolicSplitting:
    """Eigen-decomposition of ``A`` itself (tangent-space directions)."""
    if not A.is_hyperbolic:
        raise NotHyperbolic(f"matrix {A.rows()} has |trace| = {abs(A.trace)} <= 2")
    return _split(A.as_array().astype(np.float64), A.trace)


def verify_cone_condition(fmap: TorusMap, grid_size: int = 32, cone_angle: float = 0.3,
                          margin: float = 0.05, directions: int = 65) -> ConeCertificate:
    """Grid check that the unstable cone of the linear part survives the perturbation.

    The cone is the double sector of half-angle ``cone_angle`` around the
    expanding eigenvector of ``A``.  It passes when every sampled Jacobian
    maps sampled cone directions strictly inside the cone and stretches their
    unstable coordinate (in the eigenbasis of ``A``) by at least ``1 + margin``.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    split = tangent_splitting(fmap.linear)
    eu, es = split.u_expand, split.u_contract
    between = math.acos(min(1.0, abs(float(eu @ es))))
    if not 0 < cone_angle < between:
        raise ValueError(f"cone_angle must lie in (0, {between:.4f})")

    s = np.arange(grid_size) / grid_size
    pts = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
    jac = jacobian(fmap, pts)

    perp = np.array([-eu[1], eu[0]])
    phis = np.linspace(-cone_angle, cone_angle, directions)
    w = np.cos(phis)[:, None] * eu + np.sin(phis)[:, None] * perp      # (D, 2)
    images = np.einsum("gij,dj->gdi", jac, w)                           # (G, D, 2)

    norms = np.linalg.norm(images, axis=-1)
    cos_to_axis = np.abs(images @ eu) / np.maximum(norms, 1e-300)
    angles = np.arccos(np.clip(cos_to_axis, 0.0, 1.0))
    # all images in the same nappe as J eu (the sector is mapped, not flipped)
    same_side = np.all((images @ eu) * np.sign((jac @ eu) @ eu)[:, None] > 0)

    basis_inv = np.linalg.inv(np.column_stack([eu, es]))
    unstable_in = w @ basis_inv[0]
    unstable_out = images @ basis_inv[0]
    stretch = np.abs(unstable_out) / np.abs(unstable_in)[None, :]

    worst_angle = float(angles.max())
    worst_expansion = float(stretch.min())
    passed = bool(same_side and worst_angle < cone_angle and worst_expansion >= 1.0 + margin)
    return ConeCertificate(passed, worst_expansion, worst_angle, cone_angle, grid_size)


def require_certificate(fmap: TorusMap, **kwargs) -> ConeCertificate:
    """Run the cone check and raise when it fails."""
    from .errors import ConeCertificateMissing

    cert = verify_cone_condition(fmap, **kwargs)
    if not cert.passed:
        raise ConeCertificateMissing(
            f"cone certificate failed (worst expansion {cert.worst_expansion:.4g}, "
            f"worst angle {cert.worst_angle:.4g} vs cone {cert.cone_angle:.4g})")
    return cert


# -- map definition files ---------------------------------------------------

def map_from_dict(data: Mapping) -> tuple[TorusMap, TrigPolynomial]:
    """Parse the JSON map schema; returns ``(map, g)`` with ``g = 1`` when absent."""
    unknown = set(data) - {"linear", "displacement", "g", "name", "description"}
    if unknown:
        raise ValueError(f"unknown map keys {sorted(unknown)}")
    rows = data["linear"]
    if (len(rows) != 2 or any(len(r) != 2 for r in rows)
            or any(isinstance(q, bool) or not isinstance(q, int) for r in rows for q in r)):
        raise ValueError(f"'linear' must be a 2x2 array of integers, got {rows!r}")
    disp = data.get("displacement", [[], []])
    if len(disp) != 2:
        raise ValueError("'displacement' must list coefficients for exactly two components")
    v = tuple(TrigPolynomial.from_json(c, real_valued=True) for c in disp)
    g = TrigPolynomial.from_json(data["g"]) if "g" in data else TrigPolynomial.constant(1.0)
    return TorusMap(IntMatrix2.from_rows(rows), v), g


def map_to_dict(fmap: TorusMap, g: TrigPolynomial | None = None) -> dict:
    out = {"linear": fmap.linear.rows(),
           "displacement": [c.to_json() for c in fmap.displacement]}
    if g is not None:
        out["g"] = g.to_json()
    return out


def load_map(path) -> tuple[TorusMap, TrigPolynomial]:
    import json
    with open(path) as fh:
        return map_from_dict(json.load(fh))
