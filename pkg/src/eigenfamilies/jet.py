"""Second-order forward-mode jets, vectorised over a batch of points.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar quantity
with respect to the chart parameters, for ``N`` points at once::

    value : (N,)
    grad  : (N, d)
    hess  : (N, d, d)

Arrays may be real or complex.  Complex-valued fields are handled with numpy's
complex dtype; functions that only make sense on the reals (``sqrt``,
``atan2``) act on real jets.
"""
from __future__ import annotations

import numpy as np


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


class Jet2:
    __slots__ = ("value", "grad", "hess")
    __array_priority__ = 100  # make ndarray <op> Jet2 defer to Jet2

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    # -- constructors -----------------------------------------------------
    @classmethod
    def variable(cls, values, index, dim):
        """Jet of the coordinate function ``x[index]`` at ``values``."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        grad = np.zeros((n, dim))
        grad[:, index] = 1.0
        return cls(values.copy(), grad, np.zeros((n, dim, dim)))

    @classmethod
    def constant(cls, c, n, dim):
        c = np.asarray(c)
        dtype = np.result_type(c, float)
        value = np.broadcast_to(c, (n,)).astype(dtype)
        return cls(value, np.zeros((n, dim), dtype), np.zeros((n, dim, dim), dtype))

    @classmethod
    def coordinates(cls, points):
        """Coordinate jets ``[x_0, ..., x_{d-1}]`` at ``points`` of shape (N, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points.shape[1]
        return [cls.variable(points[:, i], i, d) for i in range(d)]

    @property
    def n(self):
        return self.grad.shape[0]

    @property
    def dim(self):
        return self.grad.shape[1]

    def _lift(self, other):
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self.n, self.dim)

    def chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and first two derivatives."""
        g = f1[:, None] * self.grad
        h = f1[:, None, None] * self.hess + f2[:, None, None] * _outer(self.grad, self.grad)
        return Jet2(f0, g, h)

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value - other, self.grad, self.hess)
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other)
            if c.ndim == 0:
                return Jet2(self.value * c, self.grad * c, self.hess * c)
            return Jet2(self.value * c, self.grad * c[:, None], self.hess * c[:, None, None])
        a, b = self, other
        value = a.value * b.value
        grad = a.grad * b.value[:, None] + a.value[:, None] * b.grad
        hess = (
            a.hess * b.value[:, None, None]
            + a.value[:, None, None] * b.hess
            + _outer(a.grad, b.grad)
            + _outer(b.grad, a.grad)
        )
        return Jet2(value, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1.0 / self.value
        return self.chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if isinstance(k, (int, np.integer)):
            if k == 0:
                return Jet2.constant(1.0, self.n, self.dim)
            if k < 0:
                return (self ** (-k)).reciprocal()
            result = None
            base = self
            while k:
                if k & 1:
                    result = base if result is None else result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        k = float(k)
        v = self.value
        return self.chain(v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    # -- elementary functions ---------------------------------------------
    def exp(self):
        e = np.exp(self.value)
        return self.chain(e, e, e)

    def log(self):
        """Natural log.  Derivatives are branch-free; only the value sees a branch."""
        r = 1.0 / self.value
        return self.chain(np.log(self.value), r, -r * r)

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.chain(c, -s, -c)

    def sqrt(self):
        s = np.sqrt(self.value)
        return self.chain(s, 0.5 / s, -0.25 / (s * s * s))

    @property
    def real(self):
        return Jet2(self.value.real, self.grad.real, self.hess.real)

    @property
    def imag(self):
        return Jet2(self.value.imag, self.grad.imag, self.hess.imag)

    def conj(self):
        return Jet2(np.conj(self.value), np.conj(self.grad), np.conj(self.hess))

    def __repr__(self):
        return f"Jet2(n={self.n}, dim={self.dim}, dtype={self.value.dtype})"


def exp(x):
    return x.exp() if isinstance(x, Jet2) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet2) else np.log(x)


def sin(x):
    return x.sin() if isinstance(x, Jet2) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet2) else np.cos(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet2) else np.sqrt(x)


def atan2(y, x):
    """Real two-argument arctangent; derivatives use (x dy - y dx)/(x^2 + y^2)."""
    if not isinstance(y, Jet2) and not isinstance(x, Jet2):
        return np.arctan2(y, x)
    if not isinstance(y, Jet2):
        y = x._lift(y)
    if not isinstance(x, Jet2):
        x = y._lift(x)
    r2 = x * x + y * y
    value = np.arctan2(y.value, x.value)
    inv = 1.0 / r2.value
    g = (x.value[:, None] * y.grad - y.value[:, None] * x.grad) * inv[:, None]
    # Hessian: d/dx_b [(x y_a - y x_a)/r2]
    t1 = (
        _outer(y.grad, x.grad) - _outer(x.grad, y.grad)
        + x.value[:, None, None] * y.hess - y.value[:, None, None] * x.hess
    )
    h = t1 * inv[:, None, None] - _outer(g, r2.grad) * inv[:, None, None]
    h = 0.5 * (h + np.swapaxes(h, 1, 2))
    return Jet2(value, g, h)


def det(m):
    """Determinant of a square matrix of jets (list of lists).

    Cofactor expansion up to 4x4, elimination without pivoting beyond
    (callers pass symmetric positive definite matrices there).
    """
    k = len(m)
    if k == 1:
        return m[0][0]
    if k == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if k <= 4:
        total = None
        for j in range(k):
            minor = [row[:j] + row[j + 1:] for row in m[1:]]
            term = m[0][j] * det(minor)
            if j % 2:
                term = -term
            total = term if total is None else total + term
        return total
    a = [list(row) for row in m]
    result = None
    for p in range(k):
        pivot = a[p][p]
        result = pivot if result is None else result * pivot
        inv = pivot.reciprocal()
        for i in range(p + 1, k):
            f = a[i][p] * inv
            for j in range(p + 1, k):
                a[i][j] = a[i][j] - f * a[p][j]
    return result


def inverse(m):
    """Inverse of a square jet matrix by Gauss-Jordan elimination without pivoting."""
    k = len(m)
    n, dim = m[0][0].n, m[0][0].dim
    a = [list(row) for row in m]
    inv = [[Jet2.constant(1.0 if i == j else 0.0, n, dim) for j in range(k)] for i in range(k)]
    for p in range(k):
        r = a[p][p].reciprocal()
        a[p] = [x * r for x in a[p]]
        inv[p] = [x * r for x in inv[p]]
        for i in range(k):
            if i == p:
                continue
            f = a[i][p]
            a[i] = [x - f * y for x, y in zip(a[i], a[p])]
            inv[i] = [x - f * y for x, y in zip(inv[i], inv[p])]
    return inv
