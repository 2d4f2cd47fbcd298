import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle.determinant import (DeterminantSeries, ResonanceSet, cluster_values, companion_roots,
                                determinant_coefficients, determinant_zeros, evaluate_determinant, growth_profile,
                                recursion_residual, reliability_radius, resonances_from_determinant)
from ruelle.errors import DegenerateSeries, GridBelowValidityFloor
from ruelle.periodic_orbits import trace_sequence
from ruelle.spectral_analysis import counting_function, weyl_bound_check


def series(c, order=10):
    """Series of a polynomial, zero-padded to ``order`` like a trace-built series."""
    c = np.asarray(c, dtype=complex)
    c = np.concatenate([c, np.zeros(max(0, order + 1 - len(c)))])
    return DeterminantSeries(c, reliability_radius(c))


@pytest.fixture(scope="module")
def corpus_series(bundled):
    out = {}
    for name, (fmap, g) in bundled.items():
        ts = trace_sequence(fmap, g, 14)
        out[name] = (ts, determinant_coefficients(ts))
    return out


def test_coefficient_examples():
    s = determinant_coefficients([1.0] * 10)
    assert np.allclose(s.coefficients, [1, -1] + [0] * 9, atol=1e-15)
    assert np.array_equal(determinant_coefficients([0.0] * 5).coefficients, [1, 0, 0, 0, 0, 0])
    assert np.allclose(determinant_coefficients([2.0, 2.0]).coefficients, [1, -2, 1])


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_recursion_invariant(t):
    s = determinant_coefficients(t)
    assert s.coefficients[0] == 1
    scale = 1 + max(abs(x) for x in t) * np.abs(s.coefficients).max()
    assert recursion_residual(s, t) <= 1e-9 * scale


def test_series_matches_exponential():
    # exp(-sum t_n z^n / n) for t_n = a^n is 1 - a z
    a = 0.3 - 0.2j
    s = determinant_coefficients([a ** n for n in range(1, 9)])
    assert np.allclose(s.coefficients, [1, -a] + [0] * 7, atol=1e-15)


def test_evaluate_examples():
    s = determinant_coefficients([1.0] * 10)
    assert evaluate_determinant(s, 0) == 1
    assert abs(evaluate_determinant(s, 1)) <= 1e-15
    assert evaluate_determinant(s, 0.5) == pytest.approx(0.5)
    with pytest.warns(RuntimeWarning):
        evaluate_determinant(series([1, -1.5, 0.5, 1e-3]), 1e7)


def test_zero_examples():
    s = determinant_coefficients([1.0] * 10)
    assert np.allclose(determinant_zeros(s), [1.0])
    clusters = cluster_values(determinant_zeros(series([1, -2, 1])))
    assert len(clusters) == 1 and clusters[0][1] == 2 and clusters[0][0] == pytest.approx(1.0)
    with pytest.raises(DegenerateSeries):
        determinant_zeros(series([1, 0, 0, 0]))


def test_companion_roots_against_numpy(rng):
    c = rng.normal(size=8) + 1j * rng.normal(size=8)
    ours = np.sort_complex(companion_roots(c))
    ref = np.sort_complex(np.roots(c[::-1]))
    assert np.allclose(ours, ref, atol=1e-9)


def test_resonance_examples():
    s = determinant_coefficients([1.0] * 10)
    rs = resonances_from_determinant(s, 0.01)
    assert len(rs) == 1 and rs.entries[0].value == pytest.approx(1) and rs.entries[0].multiplicity == 1
    rs = resonances_from_determinant(series([1, -1.5, 0.5]), 0.1)
    assert np.allclose(rs.values, [1, 0.5])
    assert all(e.source == "determinant" for e in rs)
    assert len(resonances_from_determinant(series([1, 0, 0]), 0.1)) == 0


def test_resonances_respect_floor():
    s = series([1, -1.5, 0.5])
    assert np.allclose(resonances_from_determinant(s, 0.7).values, [1])
    low = DeterminantSeries(s.coefficients, 2.0)
    with pytest.raises(GridBelowValidityFloor):
        resonances_from_determinant(low, 0.1)


def test_multiplicity_conserved(rng):
    roots = np.array([0.5, 0.5, -0.25, 0.1 + 0.2j, 0.1 - 0.2j])
    c = np.poly(roots)[::-1]           # prod (z - r): rescale to prod(1 - z / r)
    c = c / c[0]
    rs = resonances_from_determinant(series(c, 14), 0.2)
    assert rs.total_multiplicity == sum(1 for r in roots if abs(1 / r) >= 0.2)
    double = [e for e in rs if abs(e.value - 2.0) <= 1e-4]
    assert len(double) == 1 and double[0].multiplicity == 2


def test_reliability_radius_rule():
    assert reliability_radius([1, -1, 0, 0, 0, 0]) == pytest.approx(1e6)
    c = np.array([1, 0.5, 0.1, 1e-3, 1e-6, 1e-10, 1e-15])
    R = reliability_radius(c)
    m = np.arange(len(c))
    head = (np.abs(c) * R ** m)[m <= 3].max()
    tail = (np.abs(c) * R ** m)[m > 3].max()
    assert tail <= 1e-8 * head


def test_growth_profile_examples():
    cat = determinant_coefficients([1.0] * 10)
    prof = growth_profile(cat, [2.0, 1e-6])
    assert prof.max_log_abs[0] == pytest.approx(np.log(3))
    assert abs(prof.max_log_abs[1]) <= 1e-5
    sq = series([1, -2, 1])
    assert growth_profile(sq, [2.0]).max_log_abs[0] == pytest.approx(2 * np.log(3))
    with pytest.raises(ValueError):
        growth_profile(DeterminantSeries(cat.coefficients, 1.0), [2.0])


def test_log_derivative_identity(corpus_series, rng):
    for ts, s in corpus_series.values():
        t = np.asarray(ts.values)
        M = len(t)
        r = min(s.reliability_radius / 2, 0.2)
        for _ in range(20):
            z = r * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
            h = 1e-6
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                dd = (evaluate_determinant(s, z + h) - evaluate_determinant(s, z - h)) / (2 * h)
                lhs = dd / evaluate_determinant(s, z)
            rhs = -np.sum(t * z ** np.arange(M))
            truncation = 10 * M * np.abs(t).max() * abs(z) ** M
            assert abs(lhs - rhs) <= 1e-6 * abs(rhs) + truncation + 1e-9


def test_conjugate_symmetry(corpus_series):
    for name in ("cat", "eps002", "eps005", "eps005_real_g"):
        _, s = corpus_series[name]
        try:
            z = determinant_zeros(s)
        except DegenerateSeries:
            continue
        for w in z:
            assert np.abs(z - np.conj(w)).min() <= 1e-9


def test_newton_identities(corpus_series):
    for ts, s in corpus_series.values():
        floor = 1 / s.reliability_radius
        rmin = max(floor, 0.05)
        rs = resonances_from_determinant(s, rmin)
        lam = rs.expanded()
        if len(lam) == 0:
            continue      # the reliable disk holds no zero; the bound has nothing to say
        grid = np.geomspace(rmin, max(0.5, rmin * 1.01), 10)
        C = weyl_bound_check(counting_function(rs, grid)).fitted_C
        for n in (1, 2, 3):
            err = abs(ts.values[n - 1] - np.sum(lam ** n))
            assert err <= (len(lam) + C) * rmin ** n


def test_counting_bound_on_determinant_sets(corpus_series):
    for ts, s in corpus_series.values():
        rmin = max(1 / s.reliability_radius, 0.01)
        if rmin >= 0.5:
            continue
        rs = resonances_from_determinant(s, rmin)
        assert weyl_bound_check(counting_function(rs, np.geomspace(rmin, 0.5, 10)), 2.0).passed


def test_resonance_set_json():
    rs = resonances_from_determinant(series([1, -1.5, 0.5]), 0.1)
    js = rs.to_json()
    assert js[0]["modulus"] == pytest.approx(1) and js[1]["multiplicity"] == 1
    assert isinstance(rs, ResonanceSet)
