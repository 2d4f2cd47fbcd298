"""Escape-weighted Fourier-Galerkin truncation of the Koopman operator.

The Koopman operator ``u -> g * (u o F)`` sends the mode ``e_k`` to
``g(x) exp(2 pi i k.v(x)) e_{A^T k}(x)``, so its matrix element at
``(m, k)`` is the Fourier coefficient at ``m - A^T k`` of
``h_k = g * exp(2 pi i k.v)``.  Coefficients come from an FFT on an
``N x N`` grid, with ``N`` doubled until every column's spectrum is
resolved.  The box ``|k|_inf <= K`` is then conjugated by the diagonal
weight ``w(k) = exp(-gamma G(k))``.

``G(k) = |a|^(1/s) - |b|^(1/s)`` where ``a`` and ``b`` are the coordinates of
``k`` along the expanding and contracting eigenvectors of ``A^T``.  ``G``
grows along the frequency dynamics ``k -> A^T k`` (it decreases under the
cotangent lift ``k -> A^{-T} k``), so the weighted operator has decaying
singular values.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.optimize import curve_fit
from scipy.special import lambertw

from .errors import EigenSolverFailure, QuadratureOverflow
from .torus_maps import HyperbolicSplitting, IntMatrix2, TorusMap, TrigPolynomial, require_certificate, splitting

MAX_GRID = 2 ** 14
MAX_DIMENSION = 20000
TAIL_TOL = 1e-8
UNDERFLOW = 1e-300
# raw coefficients below this fraction of the column maximum are FFT round-off
NOISE_FLOOR = 1e-15
_CHUNK_BYTES = 1 << 26


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("RUELLE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class EscapeWeight:
    """Anisotropic weight ``w(k) = exp(-gamma * G(k))``; ``sigma > 1`` is the Gevrey variant."""

    gamma: float
    sigma: float
    splitting: HyperbolicSplitting

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")

    @classmethod
    def for_matrix(cls, A: IntMatrix2, gamma: float = 0.5, sigma: float = 1.0) -> "EscapeWeight":
        return cls(gamma, sigma, splitting(A))

    def coordinates(self, k):
        return self.splitting.coordinates(k)

    def escape(self, k) -> np.ndarray:
        a, b = self.coordinates(k)
        s = 1.0 / self.sigma
        return np.abs(a) ** s - np.abs(b) ** s

    def log_weight(self, k) -> np.ndarray:
        return -self.gamma * self.escape(k)

    def __call__(self, k) -> np.ndarray:
        return np.exp(self.log_weight(k))

    def decay_margin(self, A: IntMatrix2, box: int = 64) -> float:
        """Worst slack of ``G(A^{-T} k) <= G(k) - (1 - lambda^{-1/s}) max(|a|, |b|)^{1/s}`` on the box.

        Non-negative means the inequality holds everywhere on ``|k|_inf <= box``.
        """
        r = np.arange(-box, box + 1)
        k = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2).astype(np.float64)
        inv_t = np.array([[A.d, -A.c], [-A.b, A.a]], dtype=np.float64)
        a, b = self.coordinates(k)
        s = 1.0 / self.sigma
        lam = self.splitting.lambda_expanding
        bound = self.escape(k) - (1 - lam ** (-s)) * np.maximum(np.abs(a), np.abs(b)) ** s
        return float(np.min(bound - self.escape(k @ inv_t.T)))


def box_modes(K: int) -> np.ndarray:
    """Frequencies ``|k|_inf <= K`` in row-major order, shape ((2K+1)^2, 2)."""
    r = np.arange(-K, K + 1)
    return np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)


def _mode_index(K: int, m: np.ndarray) -> np.ndarray:
    """Row index of frequency ``m`` in :func:`box_modes`; -1 outside the box."""
    inside = np.all(np.abs(m) <= K, axis=-1)
    idx = (m[..., 0] + K) * (2 * K + 1) + (m[..., 1] + K)
    return np.where(inside, idx, -1)


@dataclass(frozen=True, eq=False)
class GalerkinOperator:
    cutoff: int
    modes: np.ndarray
    matrix: np.ndarray
    raw: np.ndarray
    quadrature_grid: int
    weight: EscapeWeight
    underflow_count: int
    tail_ratio: float

    @property
    def dimension(self) -> int:
        return len(self.modes)

    @property
    def flagged(self) -> bool:
        return self.underflow_count > 0

    @cached_property
    def _eigenvalues(self) -> np.ndarray:
        try:
            ev = np.linalg.eigvals(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverFailure(str(exc)) from exc
        return ev[np.argsort(-np.abs(ev), kind="stable")]

    @cached_property
    def _singular_values(self) -> np.ndarray:
        try:
            return np.linalg.svd(self.matrix, compute_uv=False)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverFailure(str(exc)) from exc


def _grid_points(N: int) -> np.ndarray:
    s = np.arange(N) / N
    return np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1)


def _column_spectra(fmap: TorusMap, g: TrigPolynomial, cols: np.ndarray, N: int) -> np.ndarray:
    """Normalized FFTs of ``h_k = g exp(2 pi i k.v)`` for the given frequencies, shape (len, N, N)."""
    x = _grid_points(N)
    v1, v2 = (comp(x) for comp in fmap.displacement)
    gv = np.asarray(g(x), dtype=np.complex128)
    out = np.empty((len(cols), N, N), dtype=np.complex128)
    step = max(1, _CHUNK_BYTES // (16 * N * N))
    for s in range(0, len(cols), step):
        k = cols[s:s + step].astype(np.float64)
        phase = k[:, 0, None, None] * v1 + k[:, 1, None, None] * v2
        h = np.exp(2j * np.pi * phase) * gv
        out[s:s + step] = scipy.fft.fft2(h, workers=_workers()) / (N * N)
    return out


def _tail_ratio(spectra: np.ndarray) -> float:
    N = spectra.shape[-1]
    freq = np.abs(np.fft.fftfreq(N, 1.0 / N))
    outer = (freq[:, None] > N / 4) | (freq[None, :] > N / 4)
    mags = np.abs(spectra)
    total = mags.sum(axis=(1, 2))
    tail = mags[:, outer].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, tail / total, 0.0)
    return float(ratio.max()) if len(ratio) else 0.0


def assemble(fmap: TorusMap, g: TrigPolynomial, K: int, weight: EscapeWeight | None = None,
             initial_grid: int | None = None, check_cone: bool = True) -> GalerkinOperator:
    """Weighted Galerkin matrix on the box ``|k|_inf <= K``.

    Raises
    ------
    QuadratureOverflow
        The column spectra are unresolved even at ``N = 2^14``.
    ConeCertificateMissing
        The map fails the cone check.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if check_cone:
        require_certificate(fmap)
    if weight is None:
        weight = EscapeWeight.for_matrix(fmap.linear)
    modes = box_modes(K)
    dim = len(modes)
    if dim > MAX_DIMENSION:
        raise ValueError(f"dimension {dim} exceeds the budget {MAX_DIMENSION}")

    N = initial_grid or max(4 * K, 8)
    while True:
        if N > MAX_GRID:
            raise QuadratureOverflow(f"column spectra unresolved at N <= {MAX_GRID}")
        spectra = _column_spectra(fmap, g, modes, N)
        tail = _tail_ratio(spectra)
        if tail <= TAIL_TOL:
            break
        N *= 2

    At = fmap.linear.transpose().as_array()
    target = modes @ At.T                       # A^T k for every column
    raw = np.zeros((dim, dim), dtype=np.complex128)
    offsets = modes[:, None, :] - target[None, :, :]   # m - A^T k, shape (rows, cols, 2)
    resolved = np.all(np.abs(offsets) < N // 2, axis=-1)
    rows, cols = np.nonzero(resolved)
    off = offsets[rows, cols] % N
    raw[rows, cols] = spectra[cols, off[:, 0], off[:, 1]]
    colmax = np.abs(spectra).reshape(dim, -1).max(axis=1)
    raw[np.abs(raw) < NOISE_FLOOR * colmax[None, :]] = 0.0

    logw = weight.log_weight(modes.astype(np.float64))
    log_ratio = logw[:, None] - logw[None, :]
    nonzero = raw != 0
    under = nonzero & (log_ratio < math.log(UNDERFLOW))
    with np.errstate(divide="ignore"):
        log_mag = np.where(nonzero, np.log(np.abs(raw)), -np.inf) + log_ratio
    if np.any(log_mag > -math.log(UNDERFLOW)):
        raise ValueError(f"gamma={weight.gamma} overflows the weighted matrix at K={K}; lower gamma")
    keep = nonzero & ~under
    matrix = np.zeros_like(raw)
    matrix[keep] = raw[keep] * np.exp(log_ratio[keep])
    return GalerkinOperator(
        cutoff=K, modes=modes, matrix=matrix, raw=raw, quadrature_grid=N, weight=weight,
        underflow_count=int(under.sum()), tail_ratio=tail)


def column_decay_certificate(op: GalerkinOperator) -> bool:
    """Quadrature resolution: spectral mass beyond ``N/4`` is below ``1e-8`` of each column."""
    return op.tail_ratio <= TAIL_TOL


def eigenvalues(op: GalerkinOperator) -> np.ndarray:
    """All eigenvalues, decreasing modulus."""
    return op._eigenvalues.copy()


@dataclass(frozen=True)
class SingularValueFit:
    values: np.ndarray
    fitted_C: float
    violation_fraction: float
    exponent: float | None
    rate: float | None


def _min_constant(a: np.ndarray, alpha: float) -> float:
    """Smallest ``C`` with ``a_n <= C exp(-n^alpha / C)`` for every ``n``."""
    n = np.arange(1, len(a) + 1, dtype=np.float64)
    pos = a > 0
    if not pos.any():
        return 0.0
    s = n[pos] ** alpha
    # a = C exp(-s/C)  <=>  C = s / W(s/a)
    C = s / np.real(lambertw(s / a[pos]))
    return float(C.max())


def fit_stretched_exponential(a: np.ndarray, window: float = 0.25, floor: float = 1e-12):
    """Least-squares fit of ``log a_n = log c0 - rate * n^p``.

    Only the leading ``window`` fraction of the spectrum enters the fit: past
    roughly half the box the modes whose image leaves the truncation produce
    a cliff that says nothing about the operator.  Values below
    ``floor * a_1`` are dropped as round-off.
    """
    a = np.asarray(a, dtype=np.float64)
    if not len(a) or a[0] <= 0:
        return None, None
    a = a[:max(4, int(len(a) * window))]
    use = a > floor * a[0]
    n = np.arange(1, len(a) + 1, dtype=np.float64)[use]
    y = np.log(a[use])
    if len(y) < 4:
        return None, None

    def model(x, c0, rate, p):
        return c0 - rate * x ** p

    try:
        popt, _ = curve_fit(model, n, y, p0=(y[0], 1.0, 0.5), bounds=([-np.inf, 0, 0.01], [np.inf, np.inf, 3]),
                            maxfev=20000)
    except RuntimeError:
        return None, None
    return float(popt[2]), float(popt[1])


def singular_values(op: GalerkinOperator, alpha: float = 0.5) -> SingularValueFit:
    """Singular values with the exponential-class fit ``a_n <= C exp(-n^alpha / C)``."""
    a = op._singular_values.copy()
    C = _min_constant(a, alpha)
    n = np.arange(1, len(a) + 1, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        bound = C * np.exp(-(n ** alpha) / C) if C > 0 else np.zeros_like(a)
    violations = float(np.mean(a > bound * (1 + 1e-12))) if len(a) else 0.0
    p, rate = fit_stretched_exponential(a)
    return SingularValueFit(a, C, violations, p, rate)


def operator_trace_power(op: GalerkinOperator, n: int) -> complex:
    """``tr(M^n)`` by repeated multiplication."""
    if n < 1:
        raise ValueError("n must be >= 1")
    P = op.matrix
    for _ in range(n - 1):
        P = P @ op.matrix
    return complex(np.trace(P))


def trace_power_from_eigenvalues(op: GalerkinOperator, n: int) -> complex:
    return complex(np.sum(op._eigenvalues ** n))


def resonances_from_galerkin(op: GalerkinOperator, r_min: float):
    """Eigenvalues with ``|lambda| >= r_min`` as a :class:`ResonanceSet` (source ``galerkin``).

    Residuals are relative eigenpair residuals ``|M v - lambda v| / |M|``.
    """
    from .determinant import Resonance, ResonanceSet, cluster_values

    try:
        vals, vecs = np.linalg.eig(op.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(str(exc)) from exc
    keep = np.abs(vals) >= r_min
    vals, vecs = vals[keep], vecs[:, keep]
    scale = max(np.linalg.norm(op.matrix, 2), np.finfo(float).tiny) if keep.any() else 1.0
    resid = np.linalg.norm(op.matrix @ vecs - vecs * vals, axis=0) / scale
    entries = []
    for lam, mult in cluster_values(vals):
        near = np.abs(vals - lam) <= 1e-6
        entries.append(Resonance(lam, mult, "galerkin", float(resid[near].max())))
    return ResonanceSet(tuple(entries), r_min)
