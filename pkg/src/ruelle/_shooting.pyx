# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled periodic-orbit shooting kernel (twin of ``_shooting_py``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, M_PI, isfinite

cnp.import_array()

DEF MAX_HALVINGS = 8


cdef inline void _disp_eval(const double[:, ::1] freqs, const double[::1] cre,
                            const double[::1] cim, double x, double y,
                            double* val, double* gx, double* gy) noexcept nogil:
    cdef Py_ssize_t t
    cdef double th, c, s, re, im
    val[0] = 0.0
    gx[0] = 0.0
    gy[0] = 0.0
    for t in range(freqs.shape[0]):
        th = 2.0 * M_PI * (freqs[t, 0] * x + freqs[t, 1] * y)
        c = cos(th)
        s = sin(th)
        re = cre[t] * c - cim[t] * s
        im = cre[t] * s + cim[t] * c
        val[0] += re
        gx[0] -= 2.0 * M_PI * freqs[t, 0] * im
        gy[0] -= 2.0 * M_PI * freqs[t, 1] * im


cdef double _residual(double[:, ::1] u, const double[:, ::1] p, const double[:, ::1] A,
                      const double[:, ::1] f1, const double[::1] r1, const double[::1] i1,
                      const double[:, ::1] f2, const double[::1] r2, const double[::1] i2,
                      double[:, ::1] R, double[:, :, ::1] J) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0], j, k
    cdef double v1, g1x, g1y, v2, g2x, g2y, worst = 0.0
    for j in range(n):
        k = j + 1 if j + 1 < n else 0
        _disp_eval(f1, r1, i1, u[j, 0], u[j, 1], &v1, &g1x, &g1y)
        _disp_eval(f2, r2, i2, u[j, 0], u[j, 1], &v2, &g2x, &g2y)
        R[j, 0] = A[0, 0] * u[j, 0] + A[0, 1] * u[j, 1] + v1 - u[k, 0] - p[j, 0]
        R[j, 1] = A[1, 0] * u[j, 0] + A[1, 1] * u[j, 1] + v2 - u[k, 1] - p[j, 1]
        J[j, 0, 0] = A[0, 0] + g1x
        J[j, 0, 1] = A[0, 1] + g1y
        J[j, 1, 0] = A[1, 0] + g2x
        J[j, 1, 1] = A[1, 1] + g2y
        if not (fabs(R[j, 0]) <= worst):
            worst = fabs(R[j, 0]) if isfinite(R[j, 0]) else 1e300
        if not (fabs(R[j, 1]) <= worst):
            worst = fabs(R[j, 1]) if isfinite(R[j, 1]) else 1e300
    return worst


cdef int _solve(double[:, ::1] M, double[::1] b) noexcept nogil:
    """In-place dense LU with partial pivoting; solution left in ``b``."""
    cdef Py_ssize_t N = M.shape[0], i, r, c, piv
    cdef double best, tmp, factor
    for c in range(N):
        piv = c
        best = fabs(M[c, c])
        for r in range(c + 1, N):
            if fabs(M[r, c]) > best:
                best = fabs(M[r, c])
                piv = r
        if best == 0.0:
            return -1
        if piv != c:
            for i in range(c, N):
                tmp = M[c, i]
                M[c, i] = M[piv, i]
                M[piv, i] = tmp
            tmp = b[c]
            b[c] = b[piv]
            b[piv] = tmp
        for r in range(c + 1, N):
            factor = M[r, c] / M[c, c]
            if factor != 0.0:
                for i in range(c + 1, N):
                    M[r, i] -= factor * M[c, i]
                b[r] -= factor * b[c]
    for r in range(N - 1, -1, -1):
        tmp = b[r]
        for i in range(r + 1, N):
            tmp -= M[r, i] * b[i]
        b[r] = tmp / M[r, r]
    return 0


def shoot_orbits(u0, p, A, v1, v2, int max_iter=60, double tol=1e-11):
    """Multiple-shooting Newton; same contract as ``_shooting_py.shoot_orbits``."""
    cdef double[:, :, ::1] u = np.array(u0, dtype=np.float64, order="C", copy=True)
    cdef const double[:, :, ::1] pp = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[:, ::1] AA = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] f1 = np.ascontiguousarray(v1[0], dtype=np.float64).reshape(-1, 2)
    cdef const double[::1] r1 = np.ascontiguousarray(np.real(v1[1]), dtype=np.float64)
    cdef const double[::1] i1 = np.ascontiguousarray(np.imag(v1[1]), dtype=np.float64)
    cdef const double[:, ::1] f2 = np.ascontiguousarray(v2[0], dtype=np.float64).reshape(-1, 2)
    cdef const double[::1] r2 = np.ascontiguousarray(np.real(v2[1]), dtype=np.float64)
    cdef const double[::1] i2 = np.ascontiguousarray(np.imag(v2[1]), dtype=np.float64)

    cdef Py_ssize_t P = u.shape[0], n = u.shape[1], N = 2 * n
    cdef Py_ssize_t o, j, k, it, h, a, b
    cdef double res, tres, step
    cdef bint polish

    res_out = np.empty(P)
    it_out = np.zeros(P, dtype=np.int64)
    conv_out = np.zeros(P, dtype=bool)
    cdef double[::1] res_v = res_out
    cdef long long[::1] it_v = it_out
    cdef cnp.npy_bool[::1] conv_v = conv_out

    cdef double[:, ::1] R = np.empty((n, 2))
    cdef double[:, :, ::1] J = np.empty((n, 2, 2))
    cdef double[:, ::1] tR = np.empty((n, 2))
    cdef double[:, :, ::1] tJ = np.empty((n, 2, 2))
    cdef double[:, ::1] trial = np.empty((n, 2))
    cdef double[:, ::1] M = np.empty((N, N))
    cdef double[::1] delta = np.empty(N)

    with nogil:
        for o in range(P):
            res = _residual(u[o], pp[o], AA, f1, r1, i1, f2, r2, i2, R, J)
            polish = False
            for it in range(max_iter):
                if res <= tol:
                    if polish:
                        break
                    polish = True
                M[:, :] = 0.0
                for j in range(n):
                    k = j + 1 if j + 1 < n else 0
                    for a in range(2):
                        for b in range(2):
                            M[2 * j + a, 2 * j + b] += J[j, a, b]
                        M[2 * j + a, 2 * k + a] -= 1.0
                        delta[2 * j + a] = -R[j, a]
                if _solve(M, delta) != 0:
                    break
                step = 1.0
                for h in range(MAX_HALVINGS):
                    for j in range(n):
                        trial[j, 0] = u[o, j, 0] + step * delta[2 * j]
                        trial[j, 1] = u[o, j, 1] + step * delta[2 * j + 1]
                    tres = _residual(trial, pp[o], AA, f1, r1, i1, f2, r2, i2, tR, tJ)
                    if tres <= res or h == MAX_HALVINGS - 1:
                        break
                    step *= 0.5
                if tres >= 1e300:
                    break
                u[o, :, :] = trial
                R[:, :] = tR
                J[:, :, :] = tJ
                res = tres
                it_v[o] += 1
            res_v[o] = res
            conv_v[o] = res <= tol
    return np.asarray(u), res_out, it_out, conv_out
