"""Concrete charted manifolds and their coordinate eigenfamilies.

* flat tori ``R^n / L`` with the characters ``exp(2 pi i <k, x>)``,
* weighted Sasakian spheres ``S^{2n-1}_w`` covered by graph charts,
* mapping tori ``T^m x [0, 2 pi]`` with metric ``G(t) + dt^2 / |lambda|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import jet as J
from .geometry import Chart, ChartedManifold, ComplexField, DomainError
from .jet import Jet2
from .verify import EigenFamilySpec

TWO_PI = 2.0 * math.pi
INTEGRALITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# flat tori


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice spanned by the columns of ``basis``."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"lattice basis must be square, got shape {b.shape}")
        if abs(np.linalg.det(b)) <= 1e-12:
            raise ValueError("lattice basis is singular (|det| <= 1e-12)")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self):
        return self.basis.shape[0]

    def generators(self):
        return [self.basis[:, j] for j in range(self.dim)]

    def pairing(self, k):
        """<k, gamma_j> for every generator gamma_j."""
        return np.asarray(k, dtype=float) @ self.basis

    def is_dual_vector(self, k, tol=INTEGRALITY_TOL):
        p = self.pairing(k)
        return bool(np.all(np.abs(p - np.round(p)) <= tol))


def dual_lattice(lattice: Lattice) -> Lattice:
    """The lattice of vectors pairing integrally with ``lattice``; basis ``B^{-T}``."""
    return Lattice(np.linalg.inv(lattice.basis).T)


@dataclass(frozen=True, eq=False)
class TorusCharacter:
    k: np.ndarray
    field: ComplexField


def character(k, label=None) -> ComplexField:
    """The field ``x -> exp(2 pi i <k, x>)``."""
    k = np.asarray(k, dtype=float)

    def f(x):
        phase = None
        for kj, xj in zip(k, x):
            if kj == 0.0:
                continue
            term = xj * (TWO_PI * kj)
            phase = term if phase is None else phase + term
        if phase is None:
            return Jet2.constant(1.0 + 0j, x[0].n, x[0].dim)
        return (phase * 1j).exp()

    return ComplexField(f, label or f"f_{_fmt_vec(k)}")


def _fmt_vec(v):
    return "(" + ",".join(f"{x:g}" for x in np.asarray(v).ravel()) + ")"


def flat_torus(lattice: Lattice) -> ChartedManifold:
    """Chart on the fundamental parallelepiped of ``lattice``, identity metric.

    For a diagonal basis the chart is the box itself; otherwise the box is the
    bounding box of the parallelepiped, restricted to its interior.
    """
    b = lattice.basis
    d = lattice.dim
    corners = np.array([[(i >> j) & 1 for j in range(d)] for i in range(2**d)], dtype=float) @ b.T
    lower, upper = corners.min(axis=0), corners.max(axis=0)
    binv = np.linalg.inv(b)
    admissible = None
    if not np.allclose(b, np.diag(np.diag(b))):

        def admissible(points):
            s = points @ binv.T
            return np.all((s > 0.0) & (s < 1.0), axis=1)

    def metric(x):
        n = x[0].n
        return [[Jet2.constant(1.0 if i == j else 0.0, n, d) for j in range(d)] for i in range(d)]

    chart = Chart(d, lower, upper, metric, admissible=admissible, name="torus")
    return ChartedManifold(
        "flat_torus", d, (chart,), info={"basis": b.tolist(), "tol": 1e-9, "mode": "abs"}
    )


def torus_character(lattice: Lattice, k) -> TorusCharacter:
    k = np.asarray(k, dtype=float)
    if k.shape != (lattice.dim,):
        raise ValueError(f"dual vector {k.tolist()} has wrong length for a {lattice.dim}-dimensional lattice")
    p = lattice.pairing(k)
    bad = np.flatnonzero(np.abs(p - np.round(p)) > INTEGRALITY_TOL)
    if bad.size:
        j = int(bad[0])
        raise ValueError(
            f"k={k.tolist()} is not in the dual lattice: <k, gamma_{j}> = {p[j]:.12g} is not an integer"
        )
    return TorusCharacter(k, character(k))


def torus_family(lattice: Lattice, K: Sequence) -> EigenFamilySpec:
    """Characters ``f_k`` with ``lambda_i = -4 pi^2 <k_i,k_i>`` and ``A_ij = -4 pi^2 <k_i,k_j>``."""
    chars = [torus_character(lattice, k) for k in K]
    ks = np.array([c.k for c in chars])
    gram = ks @ ks.T
    A = -4.0 * math.pi**2 * gram
    return EigenFamilySpec(
        [c.field for c in chars], np.diag(A).copy(), A, label=f"torus characters K={ks.tolist()}"
    )


# ---------------------------------------------------------------------------
# weighted Sasakian spheres


def sasakian_quadratic_form(X, v, w):
    """The weighted Sasakian metric evaluated on a single tangent vector.

    ``X`` and ``v`` are lists of ``2n`` jets ordered ``(x_1, y_1, ..., x_n, y_n)``.
    """
    n = len(w)
    x = X[0::2]
    y = X[1::2]
    vx = v[0::2]
    vy = v[1::2]
    contact = sum(x[i] * vy[i] - y[i] * vx[i] for i in range(n))  # eta(v)
    eta_xi = sum(x[i] * (w[i] * x[i]) - y[i] * (-w[i] * y[i]) for i in range(n))  # eta(xi_w)
    xi_dot_v = sum(w[i] * (x[i] * vy[i] - y[i] * vx[i]) for i in range(n))  # <xi_w, v>
    xi_sq = sum(w[i] ** 2 * (x[i] * x[i] + y[i] * y[i]) for i in range(n))  # |xi_w|^2
    inv = eta_xi.reciprocal()
    eta_w_v = contact * inv
    eta_w_xi = eta_xi * inv  # identically 1, kept literal
    v_sq = sum(c * c for c in v)
    return inv * (v_sq - 2.0 * xi_dot_v * eta_w_xi * eta_w_v) + (1.0 + xi_sq * inv) * eta_w_v * eta_w_v


def _graph_chart(n, w, drop, sign, min_height=0.1):
    dim = 2 * n - 1
    keep = [j for j in range(2 * n) if j != drop]
    thresh = 1.0 - min_height**2

    def embed(u):
        s = 1.0 - sum(ui * ui for ui in u)
        h = s.sqrt() * sign
        X = list(u)
        X.insert(drop, h)
        return X

    def tangents(u, X):
        h = X[drop]
        rh = h.reciprocal()
        n_pts = u[0].n
        vecs = []
        for a in range(dim):
            v = [Jet2.constant(0.0, n_pts, dim) for _ in range(2 * n)]
            v[keep[a]] = Jet2.constant(1.0, n_pts, dim)
            v[drop] = -(u[a] * rh)
            vecs.append(v)
        return vecs

    def metric(u):
        X = embed(u)
        e = tangents(u, X)
        q = [sasakian_quadratic_form(X, e[a], w) for a in range(dim)]
        g = [[None] * dim for _ in range(dim)]
        for a in range(dim):
            g[a][a] = q[a]
            for b in range(a + 1, dim):
                s = [ea + eb for ea, eb in zip(e[a], e[b])]
                g[a][b] = g[b][a] = 0.5 * (sasakian_quadratic_form(X, s, w) - q[a] - q[b])
        return g

    def admissible(points):
        return np.sum(points * points, axis=1) <= thresh

    coord = f"{'xy'[drop % 2]}{drop // 2 + 1}"
    return Chart(
        dim,
        -np.ones(dim),
        np.ones(dim),
        metric,
        embed=embed,
        admissible=admissible,
        name=f"graph[{'+' if sign > 0 else '-'}{coord}]",
    )


def sasakian_charts(n, w):
    return tuple(_graph_chart(n, w, drop, sign) for drop in range(2 * n) for sign in (1.0, -1.0))


def sphere_coordinate(i, label=None) -> ComplexField:
    """``z_i = x_i + i y_i`` on the sphere (0-based ``i``)."""

    def f(X):
        return X[2 * i] + X[2 * i + 1] * 1j

    return ComplexField(f, label or f"z{i + 1}")


def weighted_sasakian(n: int, w) -> tuple[ChartedManifold, EigenFamilySpec]:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    w = np.asarray(w, dtype=float).ravel()
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got {w.size}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"weights must be positive, got {w.tolist()}")
    manifold = ChartedManifold(
        "weighted_sasakian",
        2 * n - 1,
        sasakian_charts(n, w),
        info={"n": n, "w": w.tolist(), "tol": 1e-7, "mode": "rel"},
    )
    lam = -(w**2) - w * (2 * n - 2)
    A = -np.outer(w, w)
    fields = [sphere_coordinate(i) for i in range(n)]
    return manifold, EigenFamilySpec(fields, lam, A, label=f"sasakian coordinates w={w.tolist()}")


def round_sphere(n: int):
    """``S^{2n-1}`` with the round metric (all weights 1)."""
    return weighted_sasakian(n, np.ones(n))


def euclidean_pullback(chart: Chart, points):
    """Round-sphere metric components ``<d_a X, d_b X>`` in a graph chart, by plain numpy."""
    u = np.atleast_2d(points)
    s = np.sqrt(1.0 - np.sum(u * u, axis=1))
    # d_a X = e_a - (u_a / h) e_drop  =>  <d_a X, d_b X> = delta_ab + u_a u_b / h^2
    return np.eye(chart.dim)[None] + u[:, :, None] * u[:, None, :] / (s * s)[:, None, None]


# ---------------------------------------------------------------------------
# mapping tori


@dataclass(frozen=True)
class TrigPoly:
    """``c0 + sum_n (a_n cos(n t) + b_n sin(n t))``; 2 pi periodic by construction."""

    c0: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def __call__(self, t):
        out = self.c0 + 0.0 * t
        for k, a in enumerate(self.cos, start=1):
            if a:
                out = out + a * J.cos(t * k)
        for k, b in enumerate(self.sin, start=1):
            if b:
                out = out + b * J.sin(t * k)
        return out

    @classmethod
    def parse(cls, spec):
        if isinstance(spec, (int, float)):
            return cls(float(spec))
        if not isinstance(spec, dict):
            raise ValueError(f"trigonometric entry must be a number or an object, got {spec!r}")
        unknown = set(spec) - {"c0", "cos", "sin"}
        if unknown:
            raise ValueError(f"unknown trigonometric keys {sorted(unknown)}")
        return cls(
            float(spec.get("c0", 0.0)),
            tuple(float(a) for a in spec.get("cos", ())),
            tuple(float(b) for b in spec.get("sin", ())),
        )

    def to_dict(self):
        return {"c0": self.c0, "cos": list(self.cos), "sin": list(self.sin)}


def trig_matrix(entries):
    """Symmetric matrix of :class:`TrigPoly` entries from nested lists."""
    m = [[e if isinstance(e, TrigPoly) else TrigPoly.parse(e) for e in row] for row in entries]
    k = len(m)
    if any(len(row) != k for row in m):
        raise ValueError("G(t) must be a square matrix")
    for i in range(k):
        for j in range(i):
            if m[i][j] != m[j][i]:
                raise ValueError(f"G(t) must be symmetric: entries ({i},{j}) and ({j},{i}) differ")
    return m


@dataclass(frozen=True, eq=False)
class MappingTorusSpec:
    """Fibre metric family ``G(t)`` on the flat torus ``T^m`` and base scale ``lambda < 0``.

    ``G`` maps a scalar jet (or float array) ``t`` to an ``m x m`` nested list.
    """

    fiber_dim: int
    G: Callable
    lam: float = -1.0
    monodromy: Optional[np.ndarray] = None
    label: str = "mapping torus"
    source: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        if self.lam >= 0:
            raise ValueError(f"lambda must be negative, got {self.lam}")
        m = np.eye(self.fiber_dim, dtype=int) if self.monodromy is None else np.asarray(self.monodromy)
        if m.shape != (self.fiber_dim, self.fiber_dim):
            raise ValueError(f"monodromy must be {self.fiber_dim}x{self.fiber_dim}")
        if not np.all(m == np.round(m)) or abs(round(np.linalg.det(m))) != 1:
            raise ValueError("monodromy must be an integer unimodular matrix")
        object.__setattr__(self, "monodromy", m.astype(int))

    @classmethod
    def from_trig(cls, entries, lam=-1.0, monodromy=None, label="mapping torus"):
        m = trig_matrix(entries)

        def G(t):
            return [[e(t) for e in row] for row in m]

        return cls(len(m), G, lam, monodromy, label, source=[[e.to_dict() for e in row] for row in m])

    def matrix(self, t):
        """Numeric ``G(t)`` for an array of times; shape (N, m, m)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tj = Jet2.variable(t, 0, 1)
        G = self.G(tj)
        return np.stack([np.stack([G[i][j].value for j in range(self.fiber_dim)], -1) for i in range(self.fiber_dim)], -2)

    def validate(self, ts=None):
        if ts is None:
            ts = np.linspace(0.0, TWO_PI, 65)
        Gs = self.matrix(ts)
        if not np.allclose(Gs, np.swapaxes(Gs, 1, 2), atol=1e-12):
            raise ValueError(f"{self.label}: G(t) is not symmetric")
        eig = np.linalg.eigvalsh(Gs)
        bad = np.flatnonzero(eig[:, 0] <= 0)
        if bad.size:
            raise ValueError(f"{self.label}: G(t) is not positive definite at t={ts[bad[0]]:.6g}")
        g0, g1 = self.matrix([0.0, TWO_PI])
        mono = self.monodromy
        if not np.allclose(g1, mono.T @ g0 @ mono, atol=1e-10, rtol=0):
            raise ValueError(f"{self.label}: G(2 pi) != M^T G(0) M for the monodromy M")


def mapping_torus(spec: MappingTorusSpec) -> tuple[ChartedManifold, ComplexField]:
    """Chart ``(x_1..x_m, t)`` on ``(0,1)^m x (0, 2 pi)`` and the projection ``[x,t] -> e^{it}``."""
    spec.validate()
    m = spec.fiber_dim
    d = m + 1
    base = 1.0 / abs(spec.lam)

    def metric(x):
        t = x[m]
        n = t.n
        G = spec.G(t)
        g = [[Jet2.constant(0.0, n, d) for _ in range(d)] for _ in range(d)]
        for i in range(m):
            for j in range(m):
                gij = G[i][j]
                g[i][j] = gij if isinstance(gij, Jet2) else Jet2.constant(gij, n, d)
        g[m][m] = Jet2.constant(base, n, d)
        return g

    chart = Chart(d, np.zeros(d), np.r_[np.ones(m), TWO_PI], metric, name="mapping_torus")
    manifold = ChartedManifold(
        "mapping_torus", d, (chart,), info={"lambda": spec.lam, "tol": 1e-8, "mode": "abs", "spec": spec}
    )

    def projection(x):
        return (x[m] * 1j).exp()

    return manifold, ComplexField(projection, "e^{it}")


def time_coordinate(spec: MappingTorusSpec) -> ComplexField:
    m = spec.fiber_dim

    def t(x):
        return x[m]

    return ComplexField(t, "t")


__all__ = [
    "Lattice",
    "TorusCharacter",
    "MappingTorusSpec",
    "TrigPoly",
    "character",
    "dual_lattice",
    "flat_torus",
    "torus_character",
    "torus_family",
    "weighted_sasakian",
    "round_sphere",
    "sphere_coordinate",
    "sasakian_quadratic_form",
    "euclidean_pullback",
    "mapping_torus",
    "time_coordinate",
    "DomainError",
]
