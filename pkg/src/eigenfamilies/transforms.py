"""New eigenfunctions from old: monomial compositions and polynomial quotients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ComplexField
from .jet import Jet2
from .verify import (
    EigenFamilySpec,
    VerificationReport,
    _Accumulator,
    _apply_guard,
    _coerce_sampling,
    _finalize,
)

CONSTRUCTION_GUARD = 1e-3


@dataclass(frozen=True)
class Prediction:
    lam: complex
    mu: complex
    linear_part: complex
    harmonic_morphism: bool

    def to_dict(self):
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "mu": [self.mu.real, self.mu.imag],
            "linear_part": [self.linear_part.real, self.linear_part.imag],
            "harmonic_morphism": self.harmonic_morphism,
        }


def _degrees(d, k):
    d = np.asarray(d)
    if d.shape != (k,):
        raise ValueError(f"degree vector must have length {k}, got {d.tolist()}")
    if not np.all(d == np.round(d)):
        raise ValueError(f"monomial degrees must be integers, got {d.tolist()}")
    return d.astype(int)


def predict_composed_eigenvalues(family: EigenFamilySpec, d, tol=1e-12) -> Prediction:
    """Eigenvalues of ``prod phi_i^{d_i}``.

    ``mu~ = sum_ij d_i d_j A_ij`` and ``lam~ = sum_i d_i (lam_i - A_ii) + mu~``.
    The harmonic-morphism flag needs both ``mu~`` and the linear sum to vanish,
    each tested relative to the size of its own terms.
    """
    d = np.asarray(d, dtype=float)
    A, lam = family.A, family.lam
    mu = complex(d @ A @ d)
    linear = complex(np.sum(d * (lam - np.diag(A))))
    quad_scale = float(np.abs(d) @ np.abs(A) @ np.abs(d))
    lin_scale = float(np.sum(np.abs(d) * (np.abs(lam) + np.abs(np.diag(A)))))
    hm = abs(mu) <= tol * quad_scale and abs(linear) <= tol * lin_scale
    return Prediction(linear + mu, mu, linear, bool(hm))


@dataclass
class ComposedField:
    field: ComplexField
    prediction: Prediction
    degrees: tuple
    notes: tuple = ()

    def as_family(self):
        p = self.prediction
        return EigenFamilySpec([self.field], [p.lam], [[p.mu]], label=self.field.label)


def compose_monomial(family: EigenFamilySpec, d, guard=CONSTRUCTION_GUARD) -> ComposedField:
    """The field ``prod_i phi_i^{d_i}`` with its predicted (lam~, mu~).

    Points where a field with a negative exponent has modulus below ``guard``
    are excluded by the attached guard.
    """
    d = _degrees(d, len(family))
    fields = family.fields
    negative = [i for i, di in enumerate(d) if di < 0]

    def f(x):
        out = None
        for fi, di in zip(fields, d):
            if di == 0:
                continue
            term = fi(x) ** int(di)
            out = term if out is None else out * term
        if out is None:
            return Jet2.constant(1.0 + 0j, x[0].n, x[0].dim)
        return out

    field_guard = None
    if negative:

        def field_guard(x):
            mask = np.ones(x[0].n, dtype=bool)
            for i in negative:
                mask &= np.abs(fields[i](x).value) >= guard
            return mask

    label = "*".join(f"{fi.label}^{di}" for fi, di in zip(fields, d) if di) or "1"
    return ComposedField(
        ComplexField(f, label, guard=field_guard), predict_composed_eigenvalues(family, d), tuple(int(x) for x in d)
    )


def compose_homogeneous(family: EigenFamilySpec, func, d, label="F(phi)", guard=None) -> ComposedField:
    """Compose with a user-supplied multi-homogeneous ``func(z_1..z_k)`` of declared degrees ``d``.

    Homogeneity is taken on trust and reported as unchecked.
    """
    d = _degrees(d, len(family))
    fields = family.fields

    def f(x):
        return func([fi(x) for fi in fields])

    return ComposedField(
        ComplexField(f, label, guard=guard),
        predict_composed_eigenvalues(family, d),
        tuple(int(x) for x in d),
        ("homogeneity of the composed function is unchecked",),
    )


class Polynomial:
    """Multivariate complex polynomial as ``{exponent tuple: coefficient}``."""

    def __init__(self, terms, nvars=None):
        merged = {}
        for exps, coef in terms:
            exps = tuple(int(e) for e in exps)
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in polynomial term {exps}")
            merged[exps] = merged.get(exps, 0) + complex(coef)
        merged = {e: c for e, c in merged.items() if c != 0}
        lengths = {len(e) for e in merged}
        if nvars is None:
            nvars = lengths.pop() if len(lengths) == 1 else max(lengths, default=0)
        if any(len(e) != nvars for e in merged):
            raise ValueError(f"all exponent tuples must have length {nvars}")
        self.terms = dict(sorted(merged.items()))
        self.nvars = nvars

    @classmethod
    def parse(cls, spec, nvars=None):
        """From ``[[exponents, coefficient], ...]``; a coefficient may be ``[re, im]``."""
        terms = []
        for item in spec:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ValueError(f"polynomial term must be [exponents, coefficient], got {item!r}")
            exps, coef = item
            terms.append((exps, parse_complex(coef)))
        return cls(terms, nvars)

    @property
    def degrees(self):
        return {sum(e) for e in self.terms}

    @property
    def is_homogeneous(self):
        return len(self.degrees) <= 1

    @property
    def degree(self):
        return max(self.degrees, default=0)

    def coefficient_vector(self, monomials):
        return np.array([self.terms.get(m, 0) for m in monomials], dtype=complex)

    def __call__(self, zs):
        out = None
        for exps, coef in self.terms.items():
            term = None
            for z, e in zip(zs, exps):
                if e:
                    p = z**e
                    term = p if term is None else term * p
            if term is None:
                term = Jet2.constant(coef, zs[0].n, zs[0].dim)
            else:
                term = term * coef
            out = term if out is None else out + term
        if out is None:
            return Jet2.constant(0j, zs[0].n, zs[0].dim)
        return out

    def to_list(self):
        return [[list(e), [c.real, c.imag]] for e, c in self.terms.items()]

    def __repr__(self):
        parts = []
        for e, c in self.terms.items():
            mono = "*".join(f"z{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"({c:g})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) or "0"


def parse_complex(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex numbers are encoded as [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    return complex(float(value))


class PolyPair:
    """Linearly independent homogeneous polynomials of the same positive degree."""

    def __init__(self, P: Polynomial, Q: Polynomial):
        if P.nvars != Q.nvars:
            raise ValueError("P and Q must have the same number of variables")
        for name, poly in (("P", P), ("Q", Q)):
            if not poly.terms:
                raise ValueError(f"{name} is the zero polynomial")
            if not poly.is_homogeneous:
                raise ValueError(f"{name} is not homogeneous (degrees {sorted(poly.degrees)})")
        if P.degree != Q.degree:
            raise ValueError(f"P and Q have different degrees ({P.degree} vs {Q.degree})")
        if P.degree == 0:
            raise ValueError("P and Q must have positive degree")
        monos = sorted(set(P.terms) | set(Q.terms))
        m = np.vstack([P.coefficient_vector(monos), Q.coefficient_vector(monos)])
        if np.linalg.matrix_rank(m, tol=1e-12 * np.abs(m).max()) < 2:
            raise ValueError("P and Q are linearly dependent")
        self.P, self.Q = P, Q

    @property
    def degree(self):
        return self.P.degree


def quotient_field(family: EigenFamilySpec, pq: PolyPair, guard=CONSTRUCTION_GUARD, manifold=None, points=None):
    """``P(phi) / Q(phi)`` for a (lambda, mu)-eigenfamily, guarded by ``|Q(phi)| >= guard``.

    With ``manifold`` given, the guard region is probed on the sampling plan
    and an empty region raises.
    """
    if not family.is_uniform():
        raise ValueError(
            f"{family.label}: quotients need a (lambda, mu)-eigenfamily with one common lambda "
            f"and one common mu (got lam={family.lam.tolist()})"
        )
    if pq.P.nvars != len(family):
        raise ValueError(f"polynomials take {pq.P.nvars} variables but the family has {len(family)} fields")
    fields = family.fields

    def f(x):
        zs = [fi(x) for fi in fields]
        return pq.P(zs) / pq.Q(zs)

    def field_guard(x):
        return np.abs(pq.Q([fi(x) for fi in fields]).value) >= guard

    out = ComplexField(f, f"[{pq.P!r}]/[{pq.Q!r}]", guard=field_guard)
    if manifold is not None:
        sampling = _coerce_sampling(points)
        kept = 0
        for chart, pts in manifold.sample(sampling.count, sampling.seed, sampling.margin):
            with np.errstate(all="ignore"):
                kept += int(np.sum(field_guard(chart.embed(Jet2.coordinates(pts)))))
        if kept == 0:
            raise ValueError(f"denominator {pq.Q!r} is below {guard} at every sampled point")
    return out


def harmonic_morphism_check(f: ComplexField, manifold, points=None, tol=1e-7):
    """Residuals ``|tau f|`` and ``|kappa(f, f)|`` at guarded sample points."""
    sampling = _coerce_sampling(points)
    accs = [_Accumulator("tau(f)", tol, "abs", "= 0"), _Accumulator("kappa(f,f)", tol, "abs", "= 0")]
    grad_max = 0.0
    for frame in sampling.frames(manifold):
        with np.errstate(all="ignore"):
            j = frame.jet(f)
            keep = _apply_guard(frame, f)
            accs[0].add(frame, np.abs(frame.tau(j)), None, keep)
            accs[1].add(frame, np.abs(frame.kappa(j, j)), None, keep)
            m = frame.valid if keep is None else frame.valid & keep
            g = np.abs(j.grad[m])
            if g.size and np.all(np.isfinite(g)):
                grad_max = max(grad_max, float(g.max()))
    report = VerificationReport("harmonic_morphism_check", f.label)
    _finalize(report, accs)
    if grad_max <= tol:
        report.notes.append("constant")
    report.data["constant"] = grad_max <= tol
    return report
