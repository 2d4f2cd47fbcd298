"""Vectorized numpy implementation of the periodic-orbit shooting kernel.

Used when the compiled extension is unavailable (or ``RUELLE_PURE_PYTHON=1``).
Must stay numerically interchangeable with ``_shooting.pyx``.
"""
import numpy as np

TWO_PI = 2.0 * np.pi
_CHUNK = 4096
_MAX_HALVINGS = 8


def _disp(u, freqs, coefs):
    """Real trig polynomial value and gradient at points ``u`` (..., 2)."""
    if len(coefs) == 0:
        return np.zeros(u.shape[:-1]), np.zeros(u.shape)
    theta = TWO_PI * (u @ freqs.T.astype(np.float64))
    e = np.exp(1j * theta) * coefs
    value = e.real.sum(axis=-1)
    grad = (-TWO_PI * e.imag) @ freqs.astype(np.float64)
    return value, grad


def _residual(u, p, A, v1, v2):
    """Shooting defects R_j = A u_j + v(u_j) - u_{j+1} - p_j and Jacobians."""
    f1, g1 = _disp(u, *v1)
    f2, g2 = _disp(u, *v2)
    image = u @ A.T + np.stack([f1, f2], axis=-1)
    R = image - np.roll(u, -1, axis=-2) - p
    J = A + np.stack([g1, g2], axis=-2)
    return R, J


def _system(J):
    P, n = J.shape[:2]
    M = np.zeros((P, 2 * n, 2 * n))
    eye = np.eye(2)
    for j in range(n):
        r = slice(2 * j, 2 * j + 2)
        M[:, r, r] += J[:, j]
        nxt = (j + 1) % n
        M[:, r, 2 * nxt:2 * nxt + 2] -= eye
    return M


def _shoot_chunk(u, p, A, v1, v2, max_iter, tol):
    P, n = u.shape[:2]
    iters = np.zeros(P, dtype=np.int64)
    R, J = _residual(u, p, A, v1, v2)
    res = np.abs(R).reshape(P, -1).max(axis=1)
    active = res > tol
    polished = np.zeros(P, dtype=bool)
    for _ in range(max_iter):
        # converged orbits get one extra polishing step
        todo = active | ~polished
        if not todo.any():
            break
        idx = np.flatnonzero(todo)
        M = _system(J[idx])
        try:
            delta = np.linalg.solve(M, -R[idx].reshape(len(idx), -1, 1))[..., 0]
        except np.linalg.LinAlgError:
            break
        delta = delta.reshape(len(idx), n, 2)
        step = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        new_u = u[idx].copy()
        new_R, new_J = R[idx].copy(), J[idx].copy()
        new_res = res[idx].copy()
        for _h in range(_MAX_HALVINGS):
            pending = ~accepted
            if not pending.any():
                break
            sub = np.flatnonzero(pending)
            trial = u[idx[sub]] + step[sub, None, None] * delta[sub]
            tR, tJ = _residual(trial, p[idx[sub]], A, v1, v2)
            tres = np.abs(tR).reshape(len(sub), -1).max(axis=1)
            ok = (tres <= new_res[sub]) | (_h == _MAX_HALVINGS - 1)
            ok &= np.isfinite(tres)
            take = sub[ok]
            new_u[take], new_R[take], new_J[take] = trial[ok], tR[ok], tJ[ok]
            new_res[take] = tres[ok]
            accepted[take] = True
            step[sub[~ok]] *= 0.5
        u[idx], R[idx], J[idx], res[idx] = new_u, new_R, new_J, new_res
        iters[idx] += 1
        was_active = active[idx]
        polished[idx[~was_active]] = True
        active[idx] = res[idx] > tol
    return u, res, iters, res <= tol


def shoot_orbits(u0, p, A, v1, v2, max_iter=60, tol=1e-11):
    """Multiple-shooting Newton for periodic orbits.

    Parameters
    ----------
    u0 : (P, n, 2) float array
        Initial orbit points (one cycle per row).
    p : (P, n, 2) float array
        Integer lift offsets; the cycle solves ``F(u_j) = u_{j+1} + p_j``.
    A : (2, 2) float array
    v1, v2 : (freqs (T, 2) int array, coeffs (T,) complex array)
        Displacement components (real-valued polynomials).

    Returns
    -------
    u, residual, iterations, converged
    """
    u = np.array(u0, dtype=np.float64, copy=True)
    p = np.asarray(p, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    P = u.shape[0]
    res = np.empty(P)
    iters = np.empty(P, dtype=np.int64)
    conv = np.empty(P, dtype=bool)
    for start in range(0, P, _CHUNK):
        sl = slice(start, start + _CHUNK)
        u[sl], res[sl], iters[sl], conv[sl] = _shoot_chunk(u[sl], p[sl], A, v1, v2, max_iter, tol)
    return u, res, iters, conv
