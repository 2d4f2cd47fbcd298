import numpy as np
import pytest

from ruelle import _backend
from ruelle._shooting_py import shoot_orbits as py_shoot
from ruelle.periodic_orbits import _seed_cycles, residue_classes

from conftest import x1_map

compiled = pytest.mark.skipif(_backend.compiled_shoot_orbits is None, reason="compiled extension not built")


def _problem(fmap, n):
    A = fmap.linear
    D, c, _ = residue_classes(A, n)
    u0, p = _seed_cycles(A, c[:: max(1, len(c) // 200)], D, n)
    v = [(comp.freqs, comp.coeffs) for comp in fmap.displacement]
    return u0, p, A.as_array().astype(float), v


def test_python_backend_converges():
    fmap = x1_map(0.05)
    u0, p, A, (v1, v2) = _problem(fmap, 5)
    u, res, it, conv = py_shoot(u0, p, A, v1, v2)
    assert conv.all() and res.max() <= 1e-11


@compiled
@pytest.mark.parametrize("n", [1, 4, 7])
def test_backends_agree(n):
    fmap = x1_map(0.05)
    u0, p, A, (v1, v2) = _problem(fmap, n)
    a = py_shoot(u0, p, A, v1, v2)
    b = _backend.compiled_shoot_orbits(u0, p, A, v1, v2)
    assert np.array_equal(a[3], b[3])
    assert np.abs(a[0] - b[0]).max() <= 1e-12
    assert a[1].max() <= 1e-11 and b[1].max() <= 1e-11


def test_backend_selection_env(monkeypatch):
    import importlib
    monkeypatch.setenv("RUELLE_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    try:
        assert mod.BACKEND == "python"
        assert mod.shoot_orbits is mod.python_shoot_orbits
    finally:
        monkeypatch.delenv("RUELLE_PURE_PYTHON")
        importlib.reload(_backend)


@compiled
def test_enumeration_identical_across_backends(monkeypatch):
    from ruelle import periodic_orbits as po
    from ruelle.torus_maps import TrigPolynomial

    fmap = x1_map(0.05)
    g = TrigPolynomial.constant(1.0)
    solve = po._solve_cycles.__wrapped__
    ref = po.FixedPoints(solve(fmap, 6, 1e-11), g)
    monkeypatch.setattr(_backend, "shoot_orbits", _backend.python_shoot_orbits)
    alt = po.FixedPoints(solve(fmap, 6, 1e-11), g)
    assert len(ref) == len(alt) == 320
    assert np.abs(ref.points - alt.points).max() <= 1e-12
    assert abs(ref.orbit_sum() - alt.orbit_sum()) <= 1e-13
