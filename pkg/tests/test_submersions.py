import math

import numpy as np
import pytest

from eigenfamilies.geometry import Frame
from eigenfamilies.jet import Jet2
from eigenfamilies.manifolds import Lattice, MappingTorusSpec, flat_torus, torus_family
from eigenfamilies.submersions import (
    angle_gram,
    circle_submersion_check,
    log_det_derivative,
    projection_harmonicity_check,
    torus_submersion_check,
    volume_density_check,
)
from eigenfamilies.verify import check_A_structure, verify_family

FOUR_PI2 = 4 * math.pi**2
Z2 = Lattice(np.eye(2))
T2 = flat_torus(Z2)
HEX = Lattice(np.array([[1.0, 0.5], [0.0, math.sqrt(3) / 2]]))


def test_circle_submersion_character():
    f = torus_family(Z2, [(1, 0)]).fields[0]
    report = circle_submersion_check(f, -FOUR_PI2, T2, points=200)
    assert report.passed
    assert circle_submersion_check(f, -1.0, T2, points=50).record("kappa(theta,theta)").verdict is False


def test_circle_submersion_sasakian_fails_on_modulus(sasakian12):
    report = circle_submersion_check(sasakian12[1].fields[0], -3, sasakian12[0], points=50)
    assert not report.record("modulus_constant").verdict
    assert any("not a (lambda, lambda)" in n for n in report.notes)


def test_circle_lambda_must_be_negative():
    with pytest.raises(ValueError):
        circle_submersion_check(torus_family(Z2, [(1, 0)]).fields[0], 1.0, T2)


def test_square_torus_submersion():
    fam = torus_family(Z2, [(1, 0), (0, 1)])
    report = torus_submersion_check(fam, T2, points=200)
    assert report.passed
    (chart,) = T2.charts
    G = angle_gram(Frame(chart, chart.sample(30)), fam)
    assert np.allclose(G, FOUR_PI2 * np.eye(2), atol=1e-9)


def test_collinear_family_is_not_reduced():
    report = torus_submersion_check(torus_family(Z2, [(1, 0), (2, 0)]), T2, points=50)
    assert not report.passed
    assert not report.record("A_positive_definite").verdict
    assert any("reduced" in n for n in report.notes)


def test_single_field_matches_circle_check():
    fam = torus_family(Z2, [(1, 2)])
    a = torus_submersion_check(fam, T2, points=80)
    b = circle_submersion_check(fam.fields[0], fam.A[0, 0].real, T2, points=80)
    assert a.passed == b.passed == True  # noqa: E712


def _scaled(fam, s):
    return fam.with_data(lam=fam.lam * s, A=fam.A * s)


SUBMERSION_CORPUS = [
    (T2, torus_family(Z2, [(1, 0), (0, 1)])),
    (T2, torus_family(Z2, [(1, 1), (1, -1)])),
    (T2, torus_family(Z2, [(1, 0), (2, 0)])),
    (T2, torus_family(Z2, [(1, 0), (0, 1), (1, 1)])),
    (T2, _scaled(torus_family(Z2, [(1, 0), (0, 1)]), 1.1)),
    (flat_torus(HEX), torus_family(HEX, [tuple(np.linalg.inv(HEX.basis).T[:, j]) for j in range(2)])),
    (flat_torus(Lattice(np.diag([2.0, 1.0]))), torus_family(Lattice(np.diag([2.0, 1.0])), [(0.5, 0), (0, 1)])),
]


@pytest.mark.parametrize("manifold, fam", SUBMERSION_CORPUS)
def test_torus_submersion_equivalence(manifold, fam):
    sub = torus_submersion_check(fam, manifold, points=100).passed
    eig = verify_family(manifold, fam, points=100).passed
    definite = check_A_structure(fam.A).is_negative_definite
    assert sub == (eig and definite)


def test_sasakian_family_is_not_a_torus_submersion(sasakian12):
    manifold, fam = sasakian12
    assert not torus_submersion_check(fam, manifold, points=30).passed


def test_base_point_independence():
    fam = torus_family(Z2, [(1, 0), (1, 1)])
    (chart,) = T2.charts
    reports = [
        torus_submersion_check(fam, T2, points=100, base_point=(chart, p)).to_dict()
        for p in ([0.1, 0.2], [0.7, 0.4], [0.5, 0.9])
    ]
    for r in reports[1:]:
        for ra, rb in zip(reports[0]["records"], r["records"]):
            assert ra["name"] == rb["name"] and ra["verdict"] == rb["verdict"]
            assert abs(ra["max_residual"] - rb["max_residual"]) <= 1e-10


# --- mapping tori ---------------------------------------------------------------


def _diag(a_of_t, inverse):
    def G(t):
        a = a_of_t(t)
        zero = 0.0 * t
        return [[a, zero], [zero, a.reciprocal() if inverse else zero + 1.0]]

    return G


def rotated(t, a=2.0, b=0.5):
    """R(t) diag(a, b) R(t)^T written as a trigonometric polynomial."""
    s, c = (a + b) / 2, (a - b) / 2
    return [[{"c0": s, "cos": [0, c]}, {"sin": [0, c]}], [{"sin": [0, c]}, {"c0": s, "cos": [0, -c]}]]


UNIMODULAR = [
    MappingTorusSpec.from_trig([[1, 0], [0, 1]], lam=-4.0, label="constant"),
    MappingTorusSpec.from_trig(rotated(None), label="rotated"),
    MappingTorusSpec.from_trig(
        [[{"c0": 1, "cos": [0.5]}, {"sin": [0.5]}], [{"sin": [0.5]}, {"c0": 1, "cos": [-0.5]}]], label="twisted"
    ),
    MappingTorusSpec(2, _diag(lambda t: 1 + 0.5 * t.sin(), True), label="diag(a,1/a)"),
    MappingTorusSpec.from_trig([[2, 1], [1, 1]], monodromy=[[1, 0], [0, 1]], label="constant skew"),
]
NON_UNIMODULAR = [
    MappingTorusSpec(2, _diag(lambda t: 1 + 0.5 * t.sin(), False), label="diag(a,1)"),
    MappingTorusSpec.from_trig([[{"c0": 2, "cos": [1]}, 0], [0, 1]], lam=-2.0, label="cos bump"),
    MappingTorusSpec.from_trig([[{"c0": 1.5, "sin": [0, 1]}, 0], [0, {"c0": 1.5, "sin": [0, 1]}]], label="breathing"),
    MappingTorusSpec.from_trig([[{"c0": 1, "cos": [0.5]}]], lam=-1.0, label="circle fibre"),
]


@pytest.mark.parametrize("spec", UNIMODULAR, ids=lambda s: s.label)
def test_unimodular_specs_pass_both(spec):
    a = volume_density_check(spec, points=200)
    b = projection_harmonicity_check(spec, points=200)
    assert a.passed and b.passed
    assert a.max_residual <= 1e-8 and b.max_residual <= 1e-8


@pytest.mark.parametrize("spec", NON_UNIMODULAR, ids=lambda s: s.label)
def test_non_unimodular_specs_fail_both(spec):
    a = volume_density_check(spec, points=200)
    b = projection_harmonicity_check(spec, points=200)
    assert not a.passed and not b.passed
    assert a.max_residual >= 0.1 and b.max_residual >= 0.1


def test_projection_residual_is_half_lambda_times_density_rate():
    spec = NON_UNIMODULAR[1]
    b = projection_harmonicity_check(spec, points=50)
    rec = b.record("tau(t)")
    t = rec.argmax["point"][-1]
    rate, _ = log_det_derivative(spec, t)
    assert np.isclose(rec.max_residual, abs(spec.lam) / 2 * abs(rate[0]), rtol=1e-10)


def test_log_det_derivative_at_zero():
    spec = NON_UNIMODULAR[0]
    rate, det = log_det_derivative(spec, 0.0)
    assert np.isclose(rate[0], 0.5, rtol=1e-14) and np.isclose(det[0], 1.0)


def test_constant_metric_kappa_equals_abs_lambda():
    spec = UNIMODULAR[0]
    report = projection_harmonicity_check(spec, points=30)
    assert report.record("kappa(t,t)").max_residual <= 1e-12
    # kappa(t,t) = |lambda| directly
    from eigenfamilies.manifolds import mapping_torus, time_coordinate

    manifold, _ = mapping_torus(spec)
    (chart,) = manifold.charts
    frame = Frame(chart, chart.sample(5))
    assert np.allclose(frame.kappa(time_coordinate(spec), time_coordinate(spec)), 4.0)


def test_jet_time_variable_shape():
    t = Jet2.variable(np.array([0.1, 0.2]), 0, 1)
    assert UNIMODULAR[1].G(t)[0][0].value.shape == (2,)
