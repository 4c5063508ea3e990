"""Charts, complex fields and the two basic operators on them.

``tau`` is the Laplace-Beltrami operator (div of grad, negative spectrum on
compact manifolds) and ``kappa`` the complex-bilinear pairing of gradients.
Everything is evaluated pointwise in a single chart with exact second-order
jets; :func:`fd_oracle` provides an independent finite-difference check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import jet as J
from .jet import Jet2


class GeometryError(Exception):
    """Base class for evaluation errors."""


class DomainError(GeometryError, ValueError):
    pass


class SingularMetricError(GeometryError, ArithmeticError):
    def __init__(self, point, min_eig):
        self.point = np.asarray(point)
        self.min_eig = min_eig
        super().__init__(f"metric not positive definite at {self.point.tolist()} (min eigenvalue {min_eig:.3e})")


def _identity(coords):
    return coords


@dataclass(frozen=True, eq=False)
class Chart:
    """A coordinate patch.

    ``metric`` maps a list of ``dim`` parameter jets to a ``dim x dim`` nested
    list of jets ``g_ij``.  ``embed`` maps parameter jets to the coordinates
    fields are written in (ambient coordinates for a sphere, the identity for
    tori).  ``admissible`` optionally narrows the box to a non-rectangular
    region; it takes an (N, dim) array and returns a boolean mask.
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    metric: Callable
    embed: Callable = _identity
    admissible: Optional[Callable] = None
    name: str = "chart"

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float).reshape(self.dim))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float).reshape(self.dim))

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((points > self.lower) & (points < self.upper), axis=1)
        if self.admissible is not None:
            inside &= self.admissible(points)
        return inside

    def sample(self, count, seed=0, margin=0.05):
        """``count`` deterministic scrambled-Halton points inside the shrunk box."""
        width = self.upper - self.lower
        lo = self.lower + margin * width
        hi = self.upper - margin * width
        rng = np.random.default_rng(seed)
        sampler = qmc.Halton(d=self.dim, scramble=True, seed=rng)
        chunks, have = [], 0
        for _ in range(200):
            batch = lo + sampler.random(max(count, 64)) * (hi - lo)
            if self.admissible is not None:
                batch = batch[self.admissible(batch)]
            chunks.append(batch)
            have += len(batch)
            if have >= count:
                break
        else:
            raise DomainError(f"{self.name}: admissible region too small to draw {count} points")
        return np.concatenate(chunks)[:count]


@dataclass(frozen=True, eq=False)
class ChartedManifold:
    name: str
    dim: int
    charts: tuple
    info: dict = field(default_factory=dict)

    def sample(self, count, seed=0, margin=0.05):
        """Per-chart point sets: a list of (chart, points) pairs."""
        return [
            (chart, chart.sample(count, seed=[seed, i], margin=margin))
            for i, chart in enumerate(self.charts)
        ]


class ComplexField:
    """A complex (or real) valued function of the embedding coordinates.

    ``guard``, if given, maps the embedding-coordinate jets to a boolean mask
    of points where the field may be trusted (e.g. away from the zeros of a
    denominator); checks exclude the other points.
    """

    def __init__(self, func, label=None, guard=None):
        self.func = func
        self.label = label or getattr(func, "__name__", "field")
        self.guard = guard

    def __call__(self, coords):
        return self.func(coords)

    def on(self, chart, points):
        """Jet of the field with respect to the chart parameters at ``points``."""
        return self.func(chart.embed(Jet2.coordinates(points)))

    def __repr__(self):
        return f"ComplexField({self.label!r})"


def constant_field(c, label=None):
    def f(x):
        return Jet2.constant(c, x[0].n, x[0].dim)

    return ComplexField(f, label or f"const({c})")


class Frame:
    """Metric data of one chart cached at a batch of points.

    With ``strict=True`` points outside the chart or with a non-positive
    metric raise; otherwise such points are flagged in ``valid`` and their
    outputs are NaN.
    """

    def __init__(self, chart: Chart, points, strict=True):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != chart.dim:
            raise DomainError(f"{chart.name}: expected points of dimension {chart.dim}, got {points.shape[1]}")
        inside = chart.contains(points)
        if strict and not inside.all():
            bad = points[~inside][0]
            raise DomainError(f"{chart.name}: point {bad.tolist()} outside chart domain")
        self.chart = chart
        self.points = points
        self.coords = Jet2.coordinates(points)
        with np.errstate(all="ignore"):
            gm = chart.metric(self.coords)
            d = chart.dim
            self.g = np.stack([np.stack([gm[i][j].value for j in range(d)], -1) for i in range(d)], -2)
            # dg[n, i, j, k] = d_k g_ij
            self.dg = np.stack([np.stack([gm[i][j].grad for j in range(d)], -2) for i in range(d)], -3)
            self._jet_metric = gm
            finite = np.all(np.isfinite(self.g), axis=(1, 2)) & np.all(np.isfinite(self.dg), axis=(1, 2, 3))
            g_safe = np.where(finite[:, None, None], self.g, np.eye(d))
            eig = np.linalg.eigvalsh(0.5 * (g_safe + np.swapaxes(g_safe, 1, 2)))
            min_eig = eig[:, 0]
            scale = np.maximum(np.abs(eig[:, -1]), 1.0)
            spd = finite & (min_eig > 1e-12 * scale)
        if strict and not spd.all():
            i = int(np.flatnonzero(~spd)[0])
            raise SingularMetricError(points[i], float(min_eig[i]))
        self.valid = inside & spd
        g_safe = np.where(self.valid[:, None, None], g_safe, np.eye(d))
        self.ginv = np.linalg.inv(g_safe)
        self.sqrt_det = np.sqrt(np.linalg.det(g_safe))
        self.ginv[~self.valid] = np.nan

    @property
    def n(self):
        return self.points.shape[0]

    @cached_property
    def embedded(self):
        with np.errstate(all="ignore"):
            return self.chart.embed(self.coords)

    def jet(self, f):
        if isinstance(f, Jet2):
            return f
        with np.errstate(all="ignore"):
            return f(self.embedded)

    @cached_property
    def gamma(self):
        return self.christoffel()

    def christoffel(self):
        """Gamma[n, k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""
        dg = self.dg
        # lower[n, l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
        lower = (
            np.einsum("njli->nlij", dg)
            + np.einsum("nilj->nlij", dg)
            - np.einsum("nijl->nlij", dg)
        )
        return 0.5 * np.einsum("nkl,nlij->nkij", self.ginv, lower)

    def grad(self, f):
        fj = self.jet(f)
        return np.einsum("nij,nj->ni", self.ginv, fj.grad)

    def kappa(self, f, h):
        a, b = self.jet(f), self.jet(h)
        return np.einsum("nij,ni,nj->n", self.ginv, a.grad, b.grad)

    def tau(self, f):
        fj = self.jet(f)
        gamma = self.gamma
        inner = fj.hess - np.einsum("nkij,nk->nij", gamma, fj.grad)
        return np.einsum("nij,nij->n", self.ginv, inner)

    def tau_divergence(self, f):
        """Divergence form (1/sqrt|g|) d_j (g^ij sqrt|g| d_i f), with the
        inverse and determinant pushed through jets."""
        fj = self.jet(f)
        gm = self._jet_metric
        d = self.chart.dim
        with np.errstate(all="ignore"):
            ginv = J.inverse(gm)
            root = J.sqrt(J.det(gm))
        total = 0.0
        for i in range(d):
            for j in range(d):
                w = ginv[i][j] * root
                total = total + w.grad[:, j] * fj.grad[:, i] + w.value * fj.hess[:, i, j]
        return total / root.value

    def product_rule_residual(self, f, h):
        a, b = self.jet(f), self.jet(h)
        lhs = self.tau(a * b)
        rhs = self.tau(a) * b.value + 2.0 * self.kappa(a, b) + a.value * self.tau(b)
        return np.abs(lhs - rhs)


def grad(f, chart, p):
    """Contravariant gradient g^ij d_j f at point(s) ``p``."""
    return _squeeze(Frame(chart, p).grad(f), p)


def kappa(f, h, chart, p):
    return _squeeze(Frame(chart, p).kappa(f, h), p)


def tau(f, chart, p):
    return _squeeze(Frame(chart, p).tau(f), p)


def tau_divergence(f, chart, p):
    return _squeeze(Frame(chart, p).tau_divergence(f), p)


def product_rule_residual(f, h, chart, p):
    return _squeeze(Frame(chart, p).product_rule_residual(f, h), p)


def _squeeze(out, p):
    return out[0] if np.ndim(p) == 1 else out


def fd_oracle(f, chart, p, h=1e-4):
    """Central-difference gradient and Hessian (coordinate derivatives) at ``p``.

    Only field values are used; the mixed stencil reaches ``2h`` along each axis.
    """
    p = np.asarray(p, dtype=float)
    d = chart.dim
    lo, hi = chart.lower, chart.upper
    if np.any(p - 2 * h <= lo) or np.any(p + 2 * h >= hi):
        raise DomainError(f"step {h} too large for point {p.tolist()} in {chart.name}")
    eye = np.eye(d) * h
    stencil = [p]
    for i in range(d):
        stencil += [p + eye[i], p - eye[i]]
        for j in range(d):
            for si in (1, -1):
                for sj in (1, -1):
                    stencil.append(p + si * eye[i] + sj * eye[j])
    pts = np.array(stencil)
    if not chart.contains(pts).all():
        raise DomainError(f"step {h} too large for point {p.tolist()} in {chart.name}")
    vals = f(chart.embed(Jet2.coordinates(pts))).value
    g = np.zeros(d, dtype=vals.dtype)
    H = np.zeros((d, d), dtype=vals.dtype)
    k = 1
    for i in range(d):
        g[i] = (vals[k] - vals[k + 1]) / (2 * h)
        k += 2
        for j in range(d):
            pp, pm, mp, mm = vals[k:k + 4]
            H[i, j] = (pp - pm - mp + mm) / (4 * h * h)
            k += 4
    return g, H


def sample_frames(manifold: ChartedManifold, count, seed=0, margin=0.05, strict=False):
    return [Frame(chart, pts, strict=strict) for chart, pts in manifold.sample(count, seed, margin)]


def flat_chart(lower: Sequence[float], upper: Sequence[float], name="flat"):
    """Chart with the identity metric on a box."""
    d = len(lower)

    def metric(x):
        n = x[0].n
        return [[Jet2.constant(1.0 if i == j else 0.0, n, d) for j in range(d)] for i in range(d)]

    return Chart(d, lower, upper, metric, name=name)


def constant_metric_chart(matrix, lower, upper, name="constant"):
    m = np.asarray(matrix, dtype=float)
    d = m.shape[0]

    def metric(x):
        n = x[0].n
        return [[Jet2.constant(m[i, j], n, d) for j in range(d)] for i in range(d)]

    return Chart(d, lower, upper, metric, name=name)
