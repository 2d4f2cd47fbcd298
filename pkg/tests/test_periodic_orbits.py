import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle.errors import BudgetExceeded, ConeCertificateMissing, LocalDiffeoViolation
from ruelle.periodic_orbits import (enumerate_fixed_points, fourier_trace, lefschetz_check, residue_classes,
                                    trace_sequence, trace_sum)
from ruelle.torus_maps import IntMatrix2, TorusMap, TrigPolynomial, evaluate

from conftest import x1_map

CAT_COUNTS = [1, 5, 16, 45, 121, 320]


def _iterate(fmap, x, n):
    y = np.array(x, dtype=float)
    for _ in range(n):
        y = evaluate(fmap, y)
    return y


@pytest.mark.parametrize("n", range(1, 7))
def test_cat_counts_and_det_factors(cat, n):
    fps = enumerate_fixed_points(cat, n)
    assert len(fps) == CAT_COUNTS[n - 1]
    assert np.all(fps.det_factor == pytest.approx(CAT_COUNTS[n - 1], rel=1e-12))
    assert lefschetz_check(fps, cat.linear, n).passed


def test_cat_n1_is_origin(cat):
    fps = enumerate_fixed_points(cat, 1)
    rec = fps[0]
    assert np.allclose(rec.point, [0, 0]) and rec.det_factor == pytest.approx(1.0) and rec.sign == -1


def test_records_are_fixed_points(bundled):
    for fmap, _ in bundled.values():
        for n in (1, 3, 5):
            fps = enumerate_fixed_points(fmap, n)
            assert fps.residual.max() <= 1e-11
            img = _iterate(fmap, fps.points, n)
            gap = img - fps.points
            assert np.abs(gap - np.round(gap)).max() <= 1e-9
            assert np.all(fps.det_factor > 0)
            # records come sorted lexicographically and inside the unit square
            pts = fps.points
            assert np.all((pts >= 0) & (pts < 1))
            order = np.lexsort((pts[:, 1], pts[:, 0]))
            assert np.array_equal(order, np.arange(len(pts)))


def test_jacobian_power_and_sign(eps005):
    fps = enumerate_fixed_points(eps005, 3)
    for i in (0, len(fps) // 2, len(fps) - 1):
        rec = fps[i]
        d = np.linalg.det(np.eye(2) - rec.jacobian_power)
        assert rec.det_factor == pytest.approx(abs(d), rel=1e-12)
        assert rec.sign == int(np.sign(d))


@pytest.mark.parametrize("n", range(1, 11))
def test_lefschetz_perturbed(bundled, n):
    for fmap, _ in bundled.values():
        fps = enumerate_fixed_points(fmap, n)
        res = lefschetz_check(fps, fmap.linear, n)
        assert res.passed, (n, res)


def test_lefschetz_detects_missing_record(cat):
    records = list(enumerate_fixed_points(cat, 2))
    assert lefschetz_check(records, cat.linear, 2).passed
    res = lefschetz_check(records[1:], cat.linear, 2)
    assert not res.passed and res.signed_sum == -4 and res.expected == -5


def test_cat_traces(cat, one):
    ts = trace_sequence(cat, one, 10)
    assert np.abs(np.asarray(ts.values) - 1).max() <= 1e-12


def test_trace_examples(cat):
    assert trace_sum(cat, TrigPolynomial({(1, 0): 1.0}), 1) == pytest.approx(1.0)
    assert trace_sum(cat, TrigPolynomial.constant(1), 2) == pytest.approx(1.0, abs=1e-14)


def test_real_weight_gives_real_traces(bundled):
    fmap, g = bundled["eps005_real_g"]
    ts = trace_sequence(fmap, g, 6)
    assert np.abs(np.imag(ts.values)).max() <= 1e-9


def test_weight_product_is_cycle_invariant(bundled):
    fmap, g = bundled["eps005_complex_g"]
    fps = enumerate_fixed_points(fmap, 4, g=g)
    for o in np.unique(fps.orbit_index)[:50]:
        w = fps.weight_product[fps.orbit_index == o]
        assert np.abs(w - w[0]).max() <= 1e-10 * abs(w[0])
    # direct product along each orbit
    for i in (0, 7, 20):
        x = fps.points[i]
        prod = 1.0 + 0j
        for _ in range(4):
            prod *= g(x)
            x = evaluate(fmap, x)
        assert fps.weight_product[i] == pytest.approx(prod, rel=1e-10)


def test_residue_classes_cover_all_lattice_points():
    A = IntMatrix2.from_rows([[2, 1], [1, 1]])
    for n in range(1, 6):
        D, c, _ = residue_classes(A, n)
        assert D == abs(A.lefschetz_number(n)) and len(c) == D
        B = A.power(n).as_array() - np.eye(2, dtype=np.int64)
        # x = c / D solves B x = 0 mod Z^2, exactly in integers
        assert np.all((B @ c.T) % D == 0)
        assert len({tuple(v) for v in c}) == D


def test_budget(cat):
    with pytest.raises(BudgetExceeded):
        enumerate_fixed_points(cat, 60)


def test_cone_required():
    with pytest.raises(ConeCertificateMissing):
        enumerate_fixed_points(x1_map(5.0), 1)


@given(st.integers(1, 8), st.floats(-0.05, 0.05))
def test_count_matches_lefschetz_magnitude(n, eps):
    fmap = x1_map(eps)
    fps = enumerate_fixed_points(fmap, n)
    assert abs(int(fps.signs.sum())) == abs(fmap.linear.lefschetz_number(n))


def test_fourier_trace_linear(cat, one):
    assert fourier_trace(cat, one, 1, 8) == pytest.approx(1.0, abs=1e-13)
    assert fourier_trace(cat, one, 2, 0) == pytest.approx(1.0, abs=1e-13)


def test_fourier_trace_converges(eps005, one):
    t1 = trace_sum(eps005, one, 1)
    errs = [abs(fourier_trace(eps005, one, 1, K) - t1) for K in (4, 8, 16, 24)]
    assert errs[-1] <= 1e-6
    assert all(b <= 1.1 * a + 1e-13 for a, b in zip(errs, errs[1:]))


def test_fourier_trace_perturbed_n2(bundled):
    fmap, g = bundled["eps005_real_g"]
    t2 = trace_sum(fmap, g, 2)
    assert abs(fourier_trace(fmap, g, 2, 24) - t2) <= 1e-6


def test_fourier_trace_guards(one):
    fmap = x1_map(0.05)
    with pytest.raises(ValueError):
        fourier_trace(fmap, one, 1, 8, grid_size=24)
    with pytest.raises(LocalDiffeoViolation):
        fourier_trace(fmap, one, 1, 4, diffeo_tol=10.0)
