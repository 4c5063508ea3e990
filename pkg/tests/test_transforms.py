import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenfamilies.geometry import constant_field
from eigenfamilies.manifolds import Lattice, flat_torus, round_sphere, torus_family, weighted_sasakian
from eigenfamilies.transforms import (
    Polynomial,
    PolyPair,
    compose_homogeneous,
    compose_monomial,
    harmonic_morphism_check,
    parse_complex,
    predict_composed_eigenvalues,
    quotient_field,
)
from eigenfamilies.verify import verify_family

FOUR_PI2 = 4 * math.pi**2
Z2 = Lattice(np.eye(2))
T2 = flat_torus(Z2)
degree = st.integers(-3, 3)


def random_homogeneous(rng, deg, nvars=2):
    exps = [e for e in np.ndindex(*(deg + 1,) * nvars) if sum(e) == deg]
    return Polynomial([(e, complex(*rng.normal(size=2))) for e in exps], nvars)


# --- predictions ----------------------------------------------------------------


def test_sasakian_harmonic_morphism_prediction(sasakian12):
    p = predict_composed_eigenvalues(sasakian12[1], (2, -1))
    assert p.lam == 0 and p.mu == 0 and p.harmonic_morphism


@pytest.mark.parametrize("i", [0, 1])
def test_single_generator_prediction(sasakian12, i):
    fam = sasakian12[1]
    d = np.eye(2, dtype=int)[i]
    p = predict_composed_eigenvalues(fam, d)
    assert p.lam == fam.lam[i] and p.mu == fam.A[i, i]


@settings(max_examples=40, deadline=None)
@given(degree, degree)
def test_torus_prediction_matches_combined_character(d1, d2):
    k1, k2 = np.array([1, 0]), np.array([1, 1])
    p = predict_composed_eigenvalues(torus_family(Z2, [k1, k2]), (d1, d2))
    k = d1 * k1 + d2 * k2
    expected = -FOUR_PI2 * float(k @ k)
    assert np.isclose(p.mu, expected, rtol=1e-14, atol=1e-12)
    assert np.isclose(p.lam, p.mu, rtol=1e-14, atol=1e-12)
    assert np.isclose(p.lam, torus_family(Z2, [k]).lam[0], rtol=1e-14, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(degree, degree, st.integers(1, 5))
def test_harmonic_flag_invariant_under_scaling(d1, d2, c):
    for fam in (weighted_sasakian(2, (1, 2))[1], torus_family(Z2, [(1, 0), (2, 0)])):
        a = predict_composed_eigenvalues(fam, (d1, d2)).harmonic_morphism
        b = predict_composed_eigenvalues(fam, (c * d1, c * d2)).harmonic_morphism
        assert a == b


def test_degree_vector_validation(sasakian12):
    with pytest.raises(ValueError):
        compose_monomial(sasakian12[1], (1, 0, 0))
    with pytest.raises(ValueError):
        compose_monomial(sasakian12[1], (0.5, 1))


# --- compositions ---------------------------------------------------------------


def test_torus_closure():
    fam = torus_family(Z2, [(1, 0), (0, 1)])
    (chart,) = T2.charts
    pts = chart.sample(200)
    for d in [(1, 1), (2, -3), (-1, 0), (3, 3)]:
        composed = compose_monomial(fam, d)
        target = torus_family(Z2, [tuple(d)]).fields[0]
        a, b = composed.field.on(chart, pts), target.on(chart, pts)
        assert np.abs(a.value - b.value).max() <= 1e-10
    c = compose_monomial(fam, (1, 1))
    assert np.isclose(c.prediction.lam, -2 * FOUR_PI2)
    assert verify_family(T2, c.as_family(), points=200).passed


def test_identity_composition(sasakian12):
    manifold, fam = sasakian12
    c = compose_monomial(fam, (1, 0))
    chart = manifold.charts[0]
    pts = chart.sample(20)
    assert np.array_equal(c.field.on(chart, pts).value, fam.fields[0].on(chart, pts).value)


CORPUS = {
    "torus": (T2, torus_family(Z2, [(1, 0), (1, 1)])),
    "torus3": (T2, torus_family(Z2, [(1, 0), (0, 1), (2, -1)])),
    "sasakian12": weighted_sasakian(2, (1, 2)),
    "sasakian23": weighted_sasakian(2, (2, 3)),
    "round": round_sphere(2),
    "sasakian123": weighted_sasakian(3, (1, 2, 3)),
}


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(sorted(CORPUS)), st.lists(degree, min_size=3, max_size=3))
def test_composition_coherence(name, d):
    manifold, fam = CORPUS[name]
    d = d[: len(fam)]
    if not any(d):
        return
    composed = compose_monomial(fam, d)
    report = verify_family(manifold, composed.as_family(), points=80)
    assert report.passed, (name, d, report.summary())


@pytest.mark.parametrize("d", [(2, -1), (-3, 3), (1, 2), (3, -2)])
def test_composition_coherence_sasakian_examples(sasakian12, d):
    manifold, fam = sasakian12
    report = verify_family(manifold, compose_monomial(fam, d).as_family(), points=150)
    assert report.passed, report.summary()


def test_harmonic_morphism_from_weighted_sphere(sasakian12):
    composed = compose_monomial(sasakian12[1], (2, -1))
    report = harmonic_morphism_check(composed.field, sasakian12[0], points=200, tol=1e-6)
    assert report.passed and "constant" not in report.notes


def test_homogeneous_composition_is_flagged(sasakian12):
    fam = sasakian12[1]
    c = compose_homogeneous(fam, lambda z: z[0] * z[0] * z[1].reciprocal(), (2, -1))
    assert c.notes and "unchecked" in c.notes[0]
    assert c.prediction.harmonic_morphism


# --- polynomials and quotients --------------------------------------------------


def test_polynomial_parse_and_degree():
    p = Polynomial.parse([[[1, 1], [1, 2]], [[2, 0], 3]])
    assert p.is_homogeneous and p.degree == 2
    assert p.to_list() == [[[1, 1], [1.0, 2.0]], [[2, 0], [3.0, 0.0]]]
    with pytest.raises(ValueError):
        Polynomial.parse([[[1, 0], [1, 2, 3]]])
    assert parse_complex([1, -1]) == 1 - 1j
    with pytest.raises(ValueError):
        parse_complex(True)


def test_polypair_rejections():
    z1 = Polynomial([((1, 0), 1)])
    z2 = Polynomial([((0, 1), 1)])
    with pytest.raises(ValueError, match="dependent"):
        PolyPair(z1, Polynomial([((1, 0), 2)]))
    with pytest.raises(ValueError, match="homogeneous"):
        PolyPair(Polynomial([((1, 0), 1), ((2, 0), 1)]), z2)
    with pytest.raises(ValueError, match="degrees"):
        PolyPair(Polynomial([((2, 0), 1)]), z2)
    with pytest.raises(ValueError, match="zero"):
        PolyPair(Polynomial([((1, 0), 0)], 2), z2)
    with pytest.raises(ValueError, match="positive degree"):
        PolyPair(Polynomial([((0, 0), 1)]), Polynomial([((0, 0), 2), ((0, 0), 0)]))


def test_quotient_requires_uniform_family(sasakian12):
    pq = PolyPair(Polynomial([((1, 0), 1)]), Polynomial([((0, 1), 1)]))
    with pytest.raises(ValueError, match="common lambda"):
        quotient_field(sasakian12[1], pq)


def test_quotient_with_empty_guard_region(round_s3):
    pq = PolyPair(Polynomial([((1, 0), 1e-6)]), Polynomial([((0, 1), 1e-6)]))
    with pytest.raises(ValueError, match="every sampled point"):
        quotient_field(round_s3[1], pq, manifold=round_s3[0], points=50)


@pytest.mark.parametrize(
    "P, Q",
    [
        ([((1, 0), 1)], [((0, 1), 1)]),
        ([((1, 0), 1), ((0, 1), 1)], [((1, 0), 1), ((0, 1), -1)]),
    ],
)
def test_quotients_on_round_sphere(round_s3, P, Q):
    f = quotient_field(round_s3[1], PolyPair(Polynomial(P), Polynomial(Q)), guard=0.1)
    report = harmonic_morphism_check(f, round_s3[0], points=200, tol=1e-7)
    assert report.passed


def test_random_quotients_on_round_sphere(round_s3):
    rng = np.random.default_rng(2024)
    for i in range(5):
        deg = 1 + i % 2
        pq = PolyPair(random_homogeneous(rng, deg), random_homogeneous(rng, deg))
        f = quotient_field(round_s3[1], pq, guard=0.1, manifold=round_s3[0], points=100)
        report = harmonic_morphism_check(f, round_s3[0], points=100, tol=1e-6)
        assert report.passed, report.summary()


def test_character_is_not_a_harmonic_morphism():
    report = harmonic_morphism_check(torus_family(Z2, [(1, 0)]).fields[0], T2, points=50)
    assert not report.passed
    assert abs(report.record("kappa(f,f)").max_residual - FOUR_PI2) < 1e-9


def test_constant_is_flagged():
    report = harmonic_morphism_check(constant_field(1 + 1j), T2, points=20)
    assert report.passed and "constant" in report.notes
