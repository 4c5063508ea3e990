"""Residual engine for eigenfunctions and (generalised) eigenfamilies.

Every check samples points chart by chart, evaluates the relevant identity
with exact jets, and aggregates residuals into a :class:`VerificationReport`.
Pointwise sampling can only falsify global statements, so verdicts read as
"consistent with" rather than as proofs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .geometry import ComplexField, Frame

DEFAULT_TOL = 1e-9
MAX_FAILURE_FRACTION = 0.05
MAX_EXCLUDED_FRACTION = 0.5


class NotLambdaDiagonalError(ValueError):
    pass


class VanishingFieldError(ArithmeticError):
    pass


class EigenFamilySpec:
    """Fields ``phi_i`` with claimed Laplace eigenvalues ``lam[i]`` and
    conformality matrix ``A[i, j]``."""

    def __init__(self, fields, lam, A, label="family"):
        self.fields = list(fields)
        k = len(self.fields)
        if k < 1:
            raise ValueError("an eigenfamily needs at least one field")
        self.lam = np.asarray(lam, dtype=complex).reshape(-1)
        self.A = np.atleast_2d(np.asarray(A, dtype=complex))
        if self.lam.shape != (k,):
            raise ValueError(f"expected {k} eigenvalues, got {self.lam.size}")
        if self.A.shape != (k, k):
            raise ValueError(f"A must be {k}x{k}, got {self.A.shape}")
        if not np.allclose(self.A, self.A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.A).max())):
            raise ValueError("A must be symmetric")
        self.label = label

    def __len__(self):
        return len(self.fields)

    def with_data(self, lam=None, A=None, label=None):
        return EigenFamilySpec(
            self.fields,
            self.lam if lam is None else lam,
            self.A if A is None else A,
            label or self.label,
        )

    def is_lambda_diagonal(self, tol=1e-9):
        d = np.diag(self.A)
        return bool(np.all(np.abs(self.lam - d) <= tol * (1 + np.abs(d))))

    def is_uniform(self, tol=1e-12):
        """All ``lam`` equal and all entries of ``A`` equal: a (lambda, mu)-family."""
        lam0, a0 = self.lam[0], self.A[0, 0]
        return bool(
            np.all(np.abs(self.lam - lam0) <= tol * (1 + abs(lam0)))
            and np.all(np.abs(self.A - a0) <= tol * (1 + abs(a0)))
        )


@dataclass
class Sampling:
    count: int = 200
    seed: int = 0
    margin: float = 0.05

    def frames(self, manifold):
        return [
            Frame(chart, pts, strict=False)
            for chart, pts in manifold.sample(self.count, self.seed, self.margin)
        ]


def _coerce_sampling(points):
    if points is None:
        return Sampling()
    if isinstance(points, Sampling):
        return points
    if isinstance(points, int):
        return Sampling(count=points)
    if isinstance(points, dict):
        return Sampling(**points)
    raise TypeError(f"cannot interpret {points!r} as a sampling plan")


def _tolerance(manifold, tol, mode):
    info = getattr(manifold, "info", {}) or {}
    return (
        info.get("tol", DEFAULT_TOL) if tol is None else tol,
        info.get("mode", "abs") if mode is None else mode,
    )


# ---------------------------------------------------------------------------
# reports


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else "excluded-point"


@dataclass
class IdentityRecord:
    name: str
    max_residual: object
    mean_residual: object
    argmax: Optional[dict]
    tolerance: float
    mode: str
    verdict: bool
    points: int = 0
    excluded: int = 0
    failed: int = 0
    note: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class VerificationReport:
    check: str
    subject: str
    records: list = field(default_factory=list)
    valid: bool = True
    notes: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.valid and all(r.verdict for r in self.records)

    def record(self, name):
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def max_residual(self):
        vals = [r.max_residual for r in self.records if isinstance(r.max_residual, float)]
        return max(vals) if vals else float("nan")

    def worst(self):
        finite = [r for r in self.records if isinstance(r.max_residual, float)]
        return max(finite, key=lambda r: r.max_residual) if finite else None

    def to_dict(self):
        return {
            "check": self.check,
            "subject": self.subject,
            "passed": self.passed,
            "valid": self.valid,
            "records": [r.to_dict() for r in self.records],
            "notes": list(self.notes),
            "data": self.data,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["check"],
            d["subject"],
            [IdentityRecord.from_dict(r) for r in d["records"]],
            d["valid"],
            list(d["notes"]),
            d.get("data", {}),
        )

    def summary(self):
        lines = [f"{self.check} [{self.subject}]: {'PASS' if self.passed else 'FAIL'}"]
        for r in self.records:
            lines.append(
                f"  {'ok ' if r.verdict else 'BAD'} {r.name}: max={r.max_residual} tol={r.tolerance:g} ({r.mode})"
            )
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


class _Accumulator:
    """Collects residuals of one identity across charts."""

    def __init__(self, name, tol, mode, note=""):
        self.name, self.tol, self.mode, self.note = name, tol, mode, note
        self.res, self.where = [], []  # per-chunk residuals and (chart name, points)
        self.excluded = 0
        self.failed = 0

    def add(self, frame, residual, rhs=None, keep=None):
        residual = np.asarray(residual, dtype=float)
        if self.mode == "rel" and rhs is not None:
            residual = residual / (1.0 + np.abs(rhs))
        mask = frame.valid.copy()
        if keep is not None:
            self.excluded += int(np.sum(mask & ~keep))
            mask &= keep
        finite = np.isfinite(residual)
        self.failed += int(np.sum(mask & ~finite)) + int(np.sum(~frame.valid))
        mask &= finite
        self.res.append(residual[mask])
        self.where.append((frame.chart.name, frame.points[mask]))

    def finish(self, verdict=None):
        r = np.concatenate(self.res) if self.res else np.zeros(0)
        if r.size:
            i = int(np.argmax(r))
            mx, mean = float(r[i]), float(r.mean())
            for chart, pts in self.where:
                if i < len(pts):
                    p = pts[i]
                    break
                i -= len(pts)
            argmax = {"chart": chart, "point": [float(v) for v in p]}
        else:
            mx = mean = float("nan")
            argmax = None
        ok = bool(r.size) and mx <= self.tol if verdict is None else verdict
        return IdentityRecord(
            self.name,
            _num(mx),
            _num(mean),
            argmax,
            float(self.tol),
            self.mode,
            bool(ok),
            int(r.size),
            self.excluded,
            self.failed,
            self.note,
        )

    @property
    def total(self):
        return sum(len(x) for x in self.res) + self.excluded + self.failed


def _apply_guard(frame, f):
    guard = getattr(f, "guard", None)
    if guard is None:
        return None
    return guard(frame.embedded)


def _finalize(report, accs, fail_fraction=MAX_FAILURE_FRACTION, exclude_fraction=MAX_EXCLUDED_FRACTION):
    report.records = [a.finish() for a in accs]
    for a in accs:
        total = max(a.total, 1)
        if a.failed / total > fail_fraction:
            report.valid = False
            report.notes.append(f"{a.name}: {a.failed}/{total} points failed to evaluate")
        if a.excluded / total > exclude_fraction:
            report.valid = False
            report.notes.append(f"{a.name}: {a.excluded}/{total} points excluded by guards")
    return report


# ---------------------------------------------------------------------------
# checks


def verify_family(manifold, family: EigenFamilySpec, points=None, tol=None, mode=None):
    """Residuals of ``tau(phi_i) = lam_i phi_i`` and ``kappa(phi_i, phi_j) = A_ij phi_i phi_j``."""
    sampling = _coerce_sampling(points)
    tol, mode = _tolerance(manifold, tol, mode)
    k = len(family)
    names = [f.label for f in family.fields]
    tau_acc = [_Accumulator(f"tau[{i}]", tol, mode, f"tau({names[i]}) = lam_{i} {names[i]}") for i in range(k)]
    kap_acc = {
        (i, j): _Accumulator(f"kappa[{i},{j}]", tol, mode, f"kappa({names[i]},{names[j]}) = A_{i}{j} {names[i]} {names[j]}")
        for i in range(k)
        for j in range(i, k)
    }
    for frame in sampling.frames(manifold):
        with np.errstate(all="ignore"):
            jets = [frame.jet(f) for f in family.fields]
            guards = [_apply_guard(frame, f) for f in family.fields]
            for i in range(k):
                rhs = family.lam[i] * jets[i].value
                tau_acc[i].add(frame, np.abs(frame.tau(jets[i]) - rhs), rhs, guards[i])
            for (i, j), acc in kap_acc.items():
                rhs = family.A[i, j] * jets[i].value * jets[j].value
                keep = _combine(guards[i], guards[j])
                acc.add(frame, np.abs(frame.kappa(jets[i], jets[j]) - rhs), rhs, keep)
    report = VerificationReport("verify_family", family.label)
    report.data = {"lambda": _cvec(family.lam), "A": _cmat(family.A), "sampling": asdict(sampling)}
    return _finalize(report, tau_acc + list(kap_acc.values()))


def _combine(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a & b


def _cvec(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def _cmat(m):
    return [_cvec(row) for row in np.asarray(m, dtype=complex)]


@dataclass
class AStructure:
    is_real: bool
    is_negative_semidefinite: bool
    is_negative_definite: bool
    is_reduced: bool
    eigenvalues: list
    kernel: list

    def to_dict(self):
        return asdict(self)


def _integerize(v, max_den=12, tol=1e-6):
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(v))
    if scale == 0:
        return v
    u = v / scale
    fr = [Fraction(x).limit_denominator(max_den) for x in u]
    if any(abs(float(f) - x) > tol for f, x in zip(fr, u)):
        return v / np.linalg.norm(v)
    lcm = 1
    for f in fr:
        lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
    ints = [int(f * lcm) for f in fr]
    g = 0
    for i in ints:
        g = math.gcd(g, abs(i))
    ints = [i // g for i in ints]
    first = next(i for i in ints if i != 0)
    if first < 0:
        ints = [-i for i in ints]
    return np.array(ints, dtype=float)


def _rref_rows(basis, tol=1e-10):
    """Row-reduced basis of the span of the rows of ``basis``."""
    m = np.array(basis, dtype=float)
    rows, cols = m.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(m[r:, c])))
        if abs(m[p, c]) <= tol:
            continue
        m[[r, p]] = m[[p, r]]
        m[r] /= m[r, c]
        for i in range(rows):
            if i != r:
                m[i] -= m[i, c] * m[r]
        r += 1
    return m[:r]


def check_A_structure(A, tol=1e-9) -> AStructure:
    """Definiteness, reducedness and kernel of a conformality matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    k = A.shape[0]
    norm = float(np.linalg.norm(A, 2))
    is_real = bool(np.max(np.abs(A.imag), initial=0.0) <= tol * max(norm, 1.0))
    reduced = bool(abs(np.linalg.det(A)) > tol * norm**k) if norm > 0 else False
    if is_real:
        eig, vecs = np.linalg.eigh(A.real)
        thresh = tol * norm
        semidef = bool(np.all(eig <= thresh))
        definite = bool(np.all(eig < -thresh)) and norm > 0
        null = vecs[:, np.abs(eig) <= thresh] if norm > 0 else np.eye(k)
        eigenvalues = [float(e) for e in eig]
    else:
        _, s, vh = np.linalg.svd(A)
        semidef = definite = False
        null = vh.conj().T[:, s <= tol * norm]
        eigenvalues = [[float(e.real), float(e.imag)] for e in np.linalg.eigvals(A)]
    kernel = []
    if null.shape[1] and not reduced:
        if np.iscomplexobj(null) and np.max(np.abs(null.imag)) > 1e-12:
            kernel = [[[float(z.real), float(z.imag)] for z in col] for col in null.T]
        else:
            for row in _rref_rows(np.real(null).T):
                kernel.append([float(x) for x in _integerize(row)])
    return AStructure(is_real, semidef, definite, reduced, eigenvalues, kernel)


@dataclass
class RelationResult:
    alpha: Optional[list]
    max_residual: float
    verdict: bool
    note: str = ""

    def to_dict(self):
        return asdict(self)


def multiplicative_relation(family: EigenFamilySpec, manifold, points=None, tol=1e-9):
    """Exponents ``alpha`` with ``prod phi_i^alpha_i`` constant, or ``None`` when ``A`` is reduced.

    The relation is confirmed through ``sum alpha_i grad(phi_i)/phi_i = 0``,
    which never touches a branch of the logarithm.
    """
    if not family.is_lambda_diagonal(tol):
        raise NotLambdaDiagonalError(
            f"{family.label}: family is not lambda-diagonal (lam={family.lam.tolist()}, diag A={np.diag(family.A).tolist()})"
        )
    structure = check_A_structure(family.A, tol)
    if structure.is_reduced or not structure.kernel:
        return None
    alpha = np.asarray(structure.kernel[0], dtype=float)
    sampling = _coerce_sampling(points)
    worst = 0.0
    for frame in sampling.frames(manifold):
        acc = np.zeros((frame.n, frame.chart.dim), dtype=complex)
        for a, f in zip(alpha, family.fields):
            j = frame.jet(f)
            small = np.abs(j.value) <= tol
            if np.any(small & frame.valid):
                p = frame.points[np.flatnonzero(small & frame.valid)[0]]
                raise VanishingFieldError(
                    f"{f.label} vanishes at {p.tolist()} in {frame.chart.name}; a lambda-diagonal family cannot vanish"
                )
            acc += a * j.grad / j.value[:, None]
        res = np.linalg.norm(acc[frame.valid], axis=1)
        if res.size:
            worst = max(worst, float(res.max()))
    return RelationResult([float(a) for a in alpha], worst, worst <= tol)


def polar_parts(jet_value):
    """Jets of ``ln|phi|`` and ``theta`` (phi = e^{i theta}|phi|), branch-free in derivatives."""
    lg = jet_value.log()
    return lg.real, lg.imag


def polar_checks(phi: ComplexField, lam, mu, manifold, points=None, tol=None, mode=None, guard=1e-3):
    """The four polar-form identities of a real (lam, mu)-eigenfunction:

    ``tau(theta) = 0``, ``tau(ln|phi|) = lam - mu``, ``kappa(theta, |phi|) = 0``
    and ``kappa(ln|phi|, ln|phi|) = kappa(theta, theta) + mu``.

    Points with ``|phi| <= guard`` are excluded.
    """
    sampling = _coerce_sampling(points)
    tol, mode = _tolerance(manifold, tol, mode)
    lam, mu = float(np.real(lam)), float(np.real(mu))
    accs = [
        _Accumulator("tau(theta)", tol, "abs", "= 0"),
        _Accumulator("tau(ln|phi|)", tol, mode, "= lam - mu"),
        _Accumulator("kappa(theta,|phi|)", tol, "abs", "= 0"),
        _Accumulator("kappa(ln|phi|,ln|phi|)", tol, mode, "= kappa(theta,theta) + mu"),
    ]
    for frame in sampling.frames(manifold):
        with np.errstate(all="ignore"):
            j = frame.jet(phi)
            keep = np.abs(j.value) > max(guard, 0.0)
            extra = _apply_guard(frame, phi)
            keep = keep if extra is None else keep & extra
            log_mod, theta = polar_parts(j)
            modulus = log_mod.exp()
            accs[0].add(frame, np.abs(frame.tau(theta)), None, keep)
            accs[1].add(frame, np.abs(frame.tau(log_mod) - (lam - mu)), np.full(frame.n, lam - mu), keep)
            accs[2].add(frame, np.abs(frame.kappa(theta, modulus)), None, keep)
            rhs = frame.kappa(theta, theta) + mu
            accs[3].add(frame, np.abs(frame.kappa(log_mod, log_mod) - rhs), rhs, keep)
    report = VerificationReport("polar_checks", phi.label, data={"lambda": lam, "mu": mu, "guard": guard})
    return _finalize(report, accs)


@dataclass
class ModulusDiagnostics:
    modulus_constant: bool
    min_modulus: float
    max_modulus: float

    def to_dict(self):
        return asdict(self)


def modulus_diagnostics(phi: ComplexField, manifold, points=None, tol=1e-9):
    """Whether ``|phi|`` is constant over the samples: ``max - min <= tol (1 + max)``."""
    sampling = _coerce_sampling(points)
    lo, hi = math.inf, -math.inf
    for frame in sampling.frames(manifold):
        with np.errstate(all="ignore"):
            m = np.abs(frame.jet(phi).value)[frame.valid]
        m = m[np.isfinite(m)]
        if m.size:
            lo, hi = min(lo, float(m.min())), max(hi, float(m.max()))
    if not math.isfinite(lo):
        raise VanishingFieldError(f"{phi.label}: no evaluable sample points")
    return ModulusDiagnostics(bool(hi - lo <= tol * (1 + hi)), lo, hi)


def phase_rotated(family: EigenFamilySpec, theta):
    """Same family with every field multiplied by ``e^{i theta}``."""
    c = np.exp(1j * theta)
    fields = [ComplexField(lambda x, f=f: f(x) * c, f"e^(i{theta:g}) {f.label}") for f in family.fields]
    return EigenFamilySpec(fields, family.lam, family.A, family.label + f" (phase {theta:g})")
