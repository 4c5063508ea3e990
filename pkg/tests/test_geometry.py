import math

import numpy as np
import pytest

from eigenfamilies.geometry import (
    Chart,
    ComplexField,
    DomainError,
    Frame,
    SingularMetricError,
    constant_field,
    constant_metric_chart,
    fd_oracle,
    flat_chart,
    grad,
    kappa,
    product_rule_residual,
    sample_frames,
    tau,
    tau_divergence,
)
from eigenfamilies.jet import Jet2

FOUR_PI2 = 4 * math.pi**2


def e1(k=(1, 0)):
    return ComplexField(lambda x: (sum(x[i] * ki for i, ki in enumerate(k) if ki) * (2j * math.pi)).exp(), f"f{k}")


def random_field(rng, nvars):
    """Random smooth complex field: a cubic plus an oscillatory and a real-analytic term."""
    monos = [(tuple(rng.integers(0, 3, nvars)), complex(*rng.normal(size=2))) for _ in range(5)]
    a, b = rng.integers(0, nvars, 2)
    freq = rng.normal(size=2)
    amp = complex(*rng.normal(size=2))

    def f(x):
        out = Jet2.constant(0j, x[0].n, x[0].dim)
        for exps, c in monos:
            term = Jet2.constant(c, x[0].n, x[0].dim)
            for xi, e in zip(x, exps):
                if e:
                    term = term * xi**int(e)
            out = out + term
        out = out + amp * (x[a] * (1j * freq[0]) + x[b] * freq[1]).exp()
        return out + (x[b] * x[b] + 1.0).sqrt() * x[a].sin()

    return ComplexField(f, "random"), monos


@pytest.fixture(scope="module")
def spd_chart():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 3))
    m = a @ a.T + 3 * np.eye(3)
    return m, constant_metric_chart(m, [-1, -1, -1], [1, 1, 1])


@pytest.fixture(scope="module")
def curved_chart():
    """A genuinely non-constant metric on a box (for operator-stack checks)."""

    def metric(x):
        u, v = x
        return [[1 + u * u, u * v * 0.5], [u * v * 0.5, 2 + v.sin()]]

    return Chart(2, [-1, -1], [1, 1], metric, name="curved")


# --- grad -----------------------------------------------------------------------


def test_constant_has_zero_gradient(spd_chart):
    _, chart = spd_chart
    assert np.array_equal(grad(constant_field(3 + 1j), chart, np.array([0.1, 0.2, 0.3])), np.zeros(3))


def test_character_gradient_at_origin():
    chart = flat_chart([-1, -1], [1, 1])
    g = grad(e1(), chart, np.zeros(2))
    assert np.allclose(g, [2j * math.pi, 0], atol=1e-15)


def test_random_cubic_gradient_vs_central_differences(spd_chart):
    """Oracle: step-1e-5 central differences of a plain-numpy polynomial, raised by g^-1."""
    m, chart = spd_chart
    rng = np.random.default_rng(5)
    exps = [e for e in np.ndindex(4, 4, 4) if sum(e) <= 3]
    coef = rng.normal(size=len(exps)) + 1j * rng.normal(size=len(exps))

    def np_poly(x):
        return sum(c * np.prod(x ** np.array(e)) for e, c in zip(exps, coef))

    def jet_poly(x):
        out = Jet2.constant(0j, x[0].n, x[0].dim)
        for e, c in zip(exps, coef):
            t = Jet2.constant(c, x[0].n, x[0].dim)
            for xi, k in zip(x, e):
                if k:
                    t = t * xi**k
            out = out + t
        return out

    f = ComplexField(jet_poly)
    for p in rng.uniform(-0.8, 0.8, size=(10, 3)):
        h = 1e-5
        partial = np.array([(np_poly(p + h * ei) - np_poly(p - h * ei)) / (2 * h) for ei in np.eye(3)])
        expected = np.linalg.solve(m, partial)
        got = grad(f, chart, p)
        assert np.linalg.norm(got - expected) <= 1e-4 * np.linalg.norm(expected)


def test_outside_domain_raises():
    chart = flat_chart([0, 0], [1, 1])
    with pytest.raises(DomainError):
        grad(e1(), chart, np.array([1.5, 0.5]))


def test_singular_metric_names_point():
    def metric(x):
        u, v = x
        return [[u, u * 0], [u * 0, v * 0 + 1]]

    chart = Chart(2, [-1, -1], [1, 1], metric)
    with pytest.raises(SingularMetricError) as info:
        tau(e1(), chart, np.array([-0.5, 0.2]))
    assert np.allclose(info.value.point, [-0.5, 0.2])


def test_non_strict_frame_flags_instead_of_raising():
    chart = flat_chart([0, 0], [1, 1])
    frame = Frame(chart, np.array([[0.5, 0.5], [2.0, 0.5]]), strict=False)
    assert frame.valid.tolist() == [True, False]


# --- kappa ----------------------------------------------------------------------


def test_kappa_with_constant_is_zero(spd_chart):
    _, chart = spd_chart
    assert kappa(e1((1, 0, 1)), constant_field(2.0), chart, np.array([0.1, 0.1, 0.1])) == 0


def test_kappa_orthogonal_characters_vanish():
    chart = flat_chart([0, 0], [1, 1])
    pts = np.random.default_rng(0).uniform(0.05, 0.95, (50, 2))
    assert np.abs(kappa(e1((1, 0)), e1((0, 1)), chart, pts)).max() == 0


def test_kappa_character_at_origin():
    chart = flat_chart([-1, -1], [1, 1])
    assert np.isclose(kappa(e1(), e1(), chart, np.zeros(2)), -FOUR_PI2, rtol=1e-14)


def test_kappa_symmetric_and_bilinear(curved_chart):
    rng = np.random.default_rng(2)
    pts = rng.uniform(-0.9, 0.9, (100, 2))
    frame = Frame(curved_chart, pts)
    for _ in range(10):
        f, _ = random_field(rng, 2)
        g, _ = random_field(rng, 2)
        a = complex(*rng.normal(size=2))
        kfg = frame.kappa(f, g)
        assert np.abs(kfg - frame.kappa(g, f)).max() <= 1e-12 * (1 + np.abs(kfg).max())
        af = ComplexField(lambda x, f=f: f(x) * a)
        lhs = frame.kappa(af, g)
        assert np.abs(lhs - a * kfg).max() <= 1e-12 * np.abs(a * kfg).max()


# --- tau ------------------------------------------------------------------------


def test_affine_is_harmonic_on_constant_metric(spd_chart):
    _, chart = spd_chart
    f = ComplexField(lambda x: x[0] * (2 - 1j) + x[2] * 3 + 1)
    assert np.abs(tau(f, chart, np.random.default_rng(1).uniform(-0.5, 0.5, (20, 3)))).max() == 0


def test_tau_character():
    chart = flat_chart([0, 0], [1, 1])
    pts = np.random.default_rng(4).uniform(0.05, 0.95, (100, 2))
    f = e1((1, 1))
    val = f.on(chart, pts).value
    assert np.abs(tau(f, chart, pts) + 2 * FOUR_PI2 * val).max() <= 1e-9


def test_tau_sasakian_coordinate(sasakian12):
    manifold, family = sasakian12
    for frame in sample_frames(manifold, 30, seed=3):
        phi = frame.jet(family.fields[0]).value
        assert np.abs(frame.tau(family.fields[0]) + 3 * phi).max() <= 1e-7 * (1 + 3 * np.abs(phi).max())


def test_christoffel_matches_divergence_form(curved_chart, sasakian12):
    rng = np.random.default_rng(8)
    frame = Frame(curved_chart, rng.uniform(-0.9, 0.9, (200, 2)))
    for _ in range(5):
        f, _ = random_field(rng, 2)
        t1, t2 = frame.tau(f), frame.tau_divergence(f)
        assert np.abs(t1 - t2).max() <= 1e-9 * (1 + np.abs(t1).max())
    manifold, family = sasakian12
    for frame in sample_frames(manifold, 40, seed=1):
        for f in family.fields:
            t1, t2 = frame.tau(f), frame.tau_divergence(f)
            assert np.abs(t1 - t2).max() <= 1e-9 * (1 + np.abs(t1).max())


def test_single_point_divergence_wrapper(curved_chart):
    p = np.array([0.3, -0.2])
    f = e1()
    assert np.isclose(tau(f, curved_chart, p), tau_divergence(f, curved_chart, p), rtol=1e-12)


# --- product rule ---------------------------------------------------------------


def test_product_rule_characters():
    chart = flat_chart([0, 0], [1, 1])
    pts = np.random.default_rng(7).uniform(0.05, 0.95, (100, 2))
    assert product_rule_residual(e1((1, 0)), e1((2, -1)), chart, pts).max() <= 1e-9


def test_product_rule_constants_exact():
    chart = flat_chart([0, 0], [1, 1])
    assert product_rule_residual(constant_field(2.0), constant_field(1j), chart, np.array([0.5, 0.5])) == 0


def test_product_rule_random_polynomials_on_sasakian(sasakian12):
    manifold, _ = sasakian12
    rng = np.random.default_rng(9)
    for frame in sample_frames(manifold, 25, seed=2):
        f, _ = random_field(rng, 4)
        g, _ = random_field(rng, 4)
        fg = ComplexField(lambda x: f(x) * g(x))
        bound = 1e-8 * (1 + np.abs(frame.tau(fg)))
        assert np.all(frame.product_rule_residual(f, g) <= bound)


# --- finite-difference oracle ---------------------------------------------------


def test_fd_oracle_square_hessian():
    chart = flat_chart([-1], [1])
    g, H = fd_oracle(ComplexField(lambda x: x[0] * x[0]), chart, np.zeros(1))
    assert abs(H[0, 0] - 2) <= 1e-6
    assert abs(g[0]) <= 1e-12


def test_fd_oracle_step_too_large():
    chart = flat_chart([0, 0], [1, 1])
    with pytest.raises(DomainError):
        fd_oracle(e1(), chart, np.array([0.05, 0.5]), h=0.1)


def test_jets_agree_with_fd_oracle_on_twenty_fields(curved_chart):
    rng = np.random.default_rng(21)
    for _ in range(20):
        f, _ = random_field(rng, 2)
        p = rng.uniform(-0.6, 0.6, 2)
        g_fd, H_fd = fd_oracle(f, curved_chart, p)
        j = f.on(curved_chart, p[None])
        assert np.linalg.norm(j.grad[0] - g_fd) <= 1e-4 * np.linalg.norm(j.grad[0])
        assert np.linalg.norm(j.hess[0] - H_fd) <= 1e-4 * max(np.linalg.norm(j.hess[0]), 1.0)
