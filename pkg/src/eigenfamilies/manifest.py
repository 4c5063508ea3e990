"""Manifest parsing and check execution for the command-line front end.

A manifest is a JSON object::

    {
      "manifold":   {"type": "flat_torus", "basis": [[1, 0], [0, 1]]},
      "family":     {"type": "torus_characters", "K": [[1, 0], [1, 1]]},
      "transforms": [{"type": "monomial", "d": [1, -1]}],
      "checks":     [{"name": "verify_family", "tol": 1e-9}],
      "sampling":   {"count": 200, "seed": 0, "boundary_margin": 0.05}
    }

Complex numbers are ``[re, im]`` pairs (plain numbers are accepted for real
values); matrices are row-major nested lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .geometry import ComplexField
from .jet import Jet2
from .manifolds import (
    Lattice,
    MappingTorusSpec,
    flat_torus,
    mapping_torus,
    torus_family,
    weighted_sasakian,
)
from .submersions import (
    circle_submersion_check,
    projection_harmonicity_check,
    torus_submersion_check,
    volume_density_check,
)
from .transforms import (
    PolyPair,
    Polynomial,
    compose_monomial,
    harmonic_morphism_check,
    parse_complex,
    quotient_field,
)
from .verify import (
    EigenFamilySpec,
    IdentityRecord,
    NotLambdaDiagonalError,
    Sampling,
    VanishingFieldError,
    VerificationReport,
    check_A_structure,
    modulus_diagnostics,
    multiplicative_relation,
    polar_checks,
    verify_family,
)


class ManifestError(ValueError):
    """Configuration problem; ``path`` locates it inside the manifest."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# ---------------------------------------------------------------------------
# small typed readers with location-bearing errors


def _obj(value, path):
    if not isinstance(value, dict):
        raise ManifestError(path, f"expected an object, got {type(value).__name__}")
    return value


def _req(obj, key, path):
    if key not in obj:
        raise ManifestError(f"{path}.{key}", "missing required field")
    return obj[key]


def _real(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ManifestError(path, f"number must be finite, got {value!r}")
    return float(value)


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ManifestError(path, f"expected an integer, got {value!r}")
    return value


def _complex(value, path):
    try:
        z = parse_complex(value)
    except (TypeError, ValueError) as exc:
        raise ManifestError(path, str(exc)) from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ManifestError(path, "number must be finite")
    return z


def _list(value, path, length=None):
    if not isinstance(value, list):
        raise ManifestError(path, f"expected a list, got {type(value).__name__}")
    if length is not None and len(value) != length:
        raise ManifestError(path, f"expected {length} entries, got {len(value)}")
    return value


def _real_vec(value, path, length=None):
    return np.array([_real(v, f"{path}[{i}]") for i, v in enumerate(_list(value, path, length))])


def _real_mat(value, path, rows=None):
    rows_ = _list(value, path, rows)
    out = [_real_vec(r, f"{path}[{i}]") for i, r in enumerate(rows_)]
    if out and any(len(r) != len(out[0]) for r in out):
        raise ManifestError(path, "rows have different lengths")
    return np.array(out)


def _complex_vec(value, path, length=None):
    return np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(_list(value, path, length))])


def _complex_mat(value, path, n):
    return np.array([_complex_vec(r, f"{path}[{i}]", n) for i, r in enumerate(_list(value, path, n))])


# ---------------------------------------------------------------------------
# building blocks


@dataclass
class Built:
    manifold: Any
    base_family: EigenFamilySpec
    family: EigenFamilySpec
    mapping_spec: MappingTorusSpec | None = None
    transforms: list = field(default_factory=list)


def build_manifold(spec, path="manifold"):
    spec = _obj(spec, path)
    kind = _req(spec, "type", path)
    if kind == "flat_torus":
        basis = _real_mat(_req(spec, "basis", path), f"{path}.basis")
        try:
            lattice = Lattice(basis)
        except ValueError as exc:
            raise ManifestError(f"{path}.basis", str(exc)) from None
        return {"kind": kind, "lattice": lattice, "manifold": flat_torus(lattice)}
    if kind == "weighted_sasakian":
        n = _int(_req(spec, "n", path), f"{path}.n")
        if n < 1:
            raise ManifestError(f"{path}.n", "n must be a positive integer")
        w = _real_vec(_req(spec, "w", path), f"{path}.w", n)
        if np.any(w <= 0):
            raise ManifestError(f"{path}.w", f"weights must be positive, got {w.tolist()}")
        manifold, family = weighted_sasakian(n, w)
        return {"kind": kind, "manifold": manifold, "family": family}
    if kind == "mapping_torus":
        m = _int(_req(spec, "fiber_dim", path), f"{path}.fiber_dim")
        G = _list(_req(spec, "G", path), f"{path}.G", m)
        for i, row in enumerate(G):
            _list(row, f"{path}.G[{i}]", m)
        lam = _real(spec.get("lambda", -1.0), f"{path}.lambda")
        mono = spec.get("monodromy")
        mono = None if mono is None else _real_mat(mono, f"{path}.monodromy", m)
        try:
            mt = MappingTorusSpec.from_trig(G, lam, mono, label=spec.get("label", "mapping torus"))
            manifold, projection = mapping_torus(mt)
        except ValueError as exc:
            raise ManifestError(path, str(exc)) from None
        return {"kind": kind, "manifold": manifold, "mapping_spec": mt, "projection": projection}
    raise ManifestError(f"{path}.type", f"unknown manifold type {kind!r}")


def build_family(spec, man, path="family"):
    spec = _obj(spec, path)
    kind = _req(spec, "type", path)
    if kind == "torus_characters":
        if man["kind"] != "flat_torus":
            raise ManifestError(f"{path}.type", "torus_characters needs a flat_torus manifold")
        n = man["lattice"].dim
        K = [_real_vec(k, f"{path}.K[{i}]", n) for i, k in enumerate(_list(_req(spec, "K", path), f"{path}.K"))]
        if not K:
            raise ManifestError(f"{path}.K", "at least one dual vector is required")
        for i, k in enumerate(K):
            if not man["lattice"].is_dual_vector(k):
                p = man["lattice"].pairing(k)
                raise ManifestError(
                    f"{path}.K[{i}]", f"{k.tolist()} is not in the dual lattice (pairings {p.tolist()})"
                )
        family = torus_family(man["lattice"], K)
    elif kind == "sasakian_coordinates":
        if man["kind"] != "weighted_sasakian":
            raise ManifestError(f"{path}.type", "sasakian_coordinates needs a weighted_sasakian manifold")
        family = man["family"]
    elif kind == "projection":
        if man["kind"] != "mapping_torus":
            raise ManifestError(f"{path}.type", "projection needs a mapping_torus manifold")
        lam = man["mapping_spec"].lam
        family = EigenFamilySpec([man["projection"]], [lam], [[lam]], label="mapping-torus projection e^{it}")
    elif kind == "explicit":
        nvars = len(man["manifold"].charts[0].embed(_probe_coords(man["manifold"])))
        fields_spec = _list(_req(spec, "fields", path), f"{path}.fields")
        if not fields_spec:
            raise ManifestError(f"{path}.fields", "at least one field is required")
        fields = []
        for i, fs in enumerate(fields_spec):
            terms = _list(fs, f"{path}.fields[{i}]")
            try:
                poly = Polynomial.parse(terms, nvars)
            except ValueError as exc:
                raise ManifestError(f"{path}.fields[{i}]", str(exc)) from None
            fields.append(ComplexField(poly, f"p{i}"))
        k = len(fields)
        lam = _complex_vec(_req(spec, "lambda", path), f"{path}.lambda", k)
        A = _complex_mat(_req(spec, "A", path), f"{path}.A", k)
        try:
            family = EigenFamilySpec(fields, lam, A, label="explicit family")
        except ValueError as exc:
            raise ManifestError(f"{path}.A", str(exc)) from None
        return family
    else:
        raise ManifestError(f"{path}.type", f"unknown family type {kind!r}")
    k = len(family)
    lam = spec.get("lambda")
    A = spec.get("A")
    if lam is not None or A is not None:
        new_lam = family.lam if lam is None else _complex_vec(lam, f"{path}.lambda", k)
        new_A = family.A if A is None else _complex_mat(A, f"{path}.A", k)
        try:
            family = family.with_data(new_lam, new_A, family.label + " (claimed data overridden)")
        except ValueError as exc:
            raise ManifestError(f"{path}.A", str(exc)) from None
    return family


def _probe_coords(manifold):
    chart = manifold.charts[0]
    return Jet2.coordinates(0.5 * (chart.lower + chart.upper)[None])


def apply_transforms(family, specs, path="transforms"):
    applied = []
    for i, spec in enumerate(_list(specs, path)):
        p = f"{path}[{i}]"
        spec = _obj(spec, p)
        kind = _req(spec, "type", p)
        guard = _real(spec.get("guard", 1e-3), f"{p}.guard")
        if kind == "monomial":
            d = _real_vec(_req(spec, "d", p), f"{p}.d", len(family))
            if not np.all(d == np.round(d)):
                raise ManifestError(f"{p}.d", "degrees must be integers")
            composed = compose_monomial(family, d.astype(int), guard=guard)
            applied.append({"type": "monomial", "d": [int(x) for x in d], "prediction": composed.prediction.to_dict()})
            family = composed.as_family()
        elif kind == "quotient":
            try:
                P = Polynomial.parse(_list(_req(spec, "P", p), f"{p}.P"), len(family))
                Q = Polynomial.parse(_list(_req(spec, "Q", p), f"{p}.Q"), len(family))
                pair = PolyPair(P, Q)
                field_ = quotient_field(family, pair, guard=guard)
            except ValueError as exc:
                raise ManifestError(p, str(exc)) from None
            applied.append({"type": "quotient", "P": P.to_list(), "Q": Q.to_list(), "guard": guard})
            family = EigenFamilySpec([field_], [0.0], [[0.0]], label=field_.label)
        else:
            raise ManifestError(f"{p}.type", f"unknown transform type {kind!r}")
    return family, applied


# ---------------------------------------------------------------------------
# check catalog


@dataclass(frozen=True)
class CheckInfo:
    name: str
    description: str
    parameters: tuple
    default_tol: float | None  # None: the manifold's tolerance class
    runner: Callable


def _field_index(opts, family, path):
    i = _int(opts.get("field", 0), f"{path}.field")
    if not 0 <= i < len(family):
        raise ManifestError(f"{path}.field", f"field index {i} out of range for {len(family)} fields")
    return i


def _needs_mapping(built, path):
    if built.mapping_spec is None:
        raise ManifestError(path, "this check needs a mapping_torus manifold")
    return built.mapping_spec


def _run_verify_family(built, family, sampling, tol, opts, path):
    return verify_family(built.manifold, family, sampling, tol)


def _run_check_A(built, family, sampling, tol, opts, path):
    s = check_A_structure(family.A, 1e-9 if tol is None else tol)
    rec = IdentityRecord(
        "A real negative semidefinite",
        max(s.eigenvalues) if s.is_real else "excluded-point",
        float(np.mean(s.eigenvalues)) if s.is_real else "excluded-point",
        None,
        1e-9 if tol is None else tol,
        "eig",
        s.is_real and s.is_negative_semidefinite,
        note="largest eigenvalue of A",
    )
    rep = VerificationReport("check_A_structure", family.label, [rec], data=s.to_dict())
    if not s.is_reduced:
        rep.notes.append(f"A is degenerate (not reduced); kernel {s.kernel}")
    return rep


def _run_relation(built, family, sampling, tol, opts, path):
    tol = 1e-9 if tol is None else tol
    rep = VerificationReport("multiplicative_relation", family.label)
    try:
        res = multiplicative_relation(family, built.manifold, sampling, tol)
    except (NotLambdaDiagonalError, VanishingFieldError) as exc:
        rep.valid = False
        rep.notes.append(str(exc))
        return rep
    if res is None:
        rep.records.append(IdentityRecord("relation", 0.0, 0.0, None, tol, "abs", True, note="A reduced: no relation"))
        rep.data = {"alpha": None}
    else:
        rep.records.append(
            IdentityRecord(
                "sum alpha_i grad(phi_i)/phi_i",
                res.max_residual,
                res.max_residual,
                None,
                tol,
                "abs",
                res.verdict,
                note="= 0",
            )
        )
        rep.data = {"alpha": res.alpha}
    return rep


def _run_polar(built, family, sampling, tol, opts, path):
    i = _field_index(opts, family, path)
    lam = _real(opts.get("lambda", float(family.lam[i].real)), f"{path}.lambda")
    mu = _real(opts.get("mu", float(family.A[i, i].real)), f"{path}.mu")
    guard = _real(opts.get("guard", 1e-3), f"{path}.guard")
    return polar_checks(family.fields[i], lam, mu, built.manifold, sampling, tol, guard=guard)


def _run_modulus(built, family, sampling, tol, opts, path):
    i = _field_index(opts, family, path)
    tol = (built.manifold.info.get("tol", 1e-9) if tol is None else tol)
    d = modulus_diagnostics(family.fields[i], built.manifold, sampling, tol)
    lam_diag = abs(family.lam[i] - family.A[i, i]) <= 1e-9 * (1 + abs(family.A[i, i]))
    consistent = d.modulus_constant == lam_diag
    rec = IdentityRecord(
        "modulus constant <=> lambda = mu",
        d.max_modulus - d.min_modulus,
        d.max_modulus - d.min_modulus,
        None,
        tol,
        "abs",
        bool(consistent),
        note=f"constant={d.modulus_constant}, lambda=mu claimed={bool(lam_diag)}",
    )
    return VerificationReport("modulus_diagnostics", family.fields[i].label, [rec], data=d.to_dict())


def _run_hm(built, family, sampling, tol, opts, path):
    i = _field_index(opts, family, path)
    return harmonic_morphism_check(family.fields[i], built.manifold, sampling, 1e-7 if tol is None else tol)


def _run_circle(built, family, sampling, tol, opts, path):
    i = _field_index(opts, family, path)
    lam = _real(opts.get("lambda", float(family.lam[i].real)), f"{path}.lambda")
    if lam >= 0:
        raise ManifestError(f"{path}.lambda", f"lambda must be negative, got {lam}")
    return circle_submersion_check(family.fields[i], lam, built.manifold, sampling, tol)


def _run_torus(built, family, sampling, tol, opts, path):
    return torus_submersion_check(family, built.manifold, sampling, tol)


def _run_volume(built, family, sampling, tol, opts, path):
    return volume_density_check(_needs_mapping(built, path), sampling, 1e-8 if tol is None else tol)


def _run_projection(built, family, sampling, tol, opts, path):
    return projection_harmonicity_check(_needs_mapping(built, path), sampling, 1e-8 if tol is None else tol)


CHECKS = {
    c.name: c
    for c in (
        CheckInfo("verify_family", "tau(phi_i) = lam_i phi_i and kappa(phi_i, phi_j) = A_ij phi_i phi_j", (), None, _run_verify_family),
        CheckInfo("check_A_structure", "A real negative semidefinite; reducedness and kernel", (), 1e-9, _run_check_A),
        CheckInfo("multiplicative_relation", "exponents alpha with prod phi_i^alpha_i constant", (), 1e-9, _run_relation),
        CheckInfo("polar_checks", "polar-form identities of a (lambda, mu)-eigenfunction", ("field", "lambda", "mu", "guard"), None, _run_polar),
        CheckInfo("modulus_diagnostics", "|phi| constant exactly when lambda = mu", ("field",), None, _run_modulus),
        CheckInfo("harmonic_morphism_check", "tau(f) = 0 and kappa(f, f) = 0", ("field",), 1e-7, _run_hm),
        CheckInfo("circle_submersion_check", "phi/|phi(x0)| is a harmonic Riemannian submersion to (S^1, dt^2/|lambda|)", ("field", "lambda"), None, _run_circle),
        CheckInfo("torus_submersion_check", "(phi_i/|phi_i(x0)|) is a harmonic Riemannian submersion to (T^k, A^-1)", (), None, _run_torus),
        CheckInfo("volume_density_check", "d/dt ln det G(t) = 0", (), 1e-8, _run_volume),
        CheckInfo("projection_harmonicity_check", "tau(t) = 0 and kappa(t, t) = |lambda| on the mapping torus", (), 1e-8, _run_projection),
    )
}

COMMON_OPTIONS = ("name", "tol", "target")


def list_checks():
    """Static catalog: name, description, parameters and default tolerance, in a stable order."""
    return [
        {
            "name": c.name,
            "description": c.description,
            "parameters": list(COMMON_OPTIONS[1:] + c.parameters),
            "default_tol": c.default_tol if c.default_tol is not None else "manifold default",
        }
        for c in CHECKS.values()
    ]


# ---------------------------------------------------------------------------
# manifest


@dataclass
class Manifest:
    raw: dict
    sampling: Sampling
    checks: list
    global_tol: float | None = None

    @classmethod
    def parse(cls, doc, seed=None, points=None, tol=None):
        doc = _obj(doc, "manifest")
        _req(doc, "manifold", "manifest")
        _req(doc, "family", "manifest")
        s = _obj(doc.get("sampling", {}), "sampling")
        unknown = set(s) - {"count", "seed", "boundary_margin"}
        if unknown:
            raise ManifestError("sampling", f"unknown keys {sorted(unknown)}")
        count = _int(s.get("count", 200), "sampling.count") if points is None else int(points)
        seed_ = _int(s.get("seed", 0), "sampling.seed") if seed is None else int(seed)
        margin = _real(s.get("boundary_margin", 0.05), "sampling.boundary_margin")
        if count < 1:
            raise ManifestError("sampling.count", "must be positive")
        if not 0 <= margin < 0.5:
            raise ManifestError("sampling.boundary_margin", "must lie in [0, 0.5)")
        checks = []
        for i, c in enumerate(_list(_req(doc, "checks", "manifest"), "checks")):
            p = f"checks[{i}]"
            if isinstance(c, str):
                c = {"name": c}
            c = _obj(c, p)
            name = _req(c, "name", p)
            if name not in CHECKS:
                raise ManifestError(f"{p}.name", f"unknown check {name!r}; known: {', '.join(CHECKS)}")
            allowed = set(COMMON_OPTIONS) | set(CHECKS[name].parameters)
            extra = set(c) - allowed
            if extra:
                raise ManifestError(p, f"unknown options {sorted(extra)} for {name}")
            if "tol" in c:
                t = _real(c["tol"], f"{p}.tol")
                if t <= 0:
                    raise ManifestError(f"{p}.tol", "tolerance must be positive")
            if c.get("target", "transformed") not in ("base", "transformed"):
                raise ManifestError(f"{p}.target", "must be 'base' or 'transformed'")
            checks.append(dict(c))
        if tol is not None and tol <= 0:
            raise ManifestError("--tol", "tolerance must be positive")
        raw = dict(doc)
        raw["sampling"] = {"count": count, "seed": seed_, "boundary_margin": margin}
        return cls(raw, Sampling(count, seed_, margin), checks, tol)

    def build(self) -> Built:
        man = build_manifold(self.raw["manifold"])
        base = build_family(self.raw["family"], man)
        family, applied = apply_transforms(base, self.raw.get("transforms", []))
        return Built(man["manifold"], base, family, man.get("mapping_spec"), applied)

    def run(self, built: Built | None = None):
        built = built or self.build()
        reports = []
        for i, c in enumerate(self.checks):
            info = CHECKS[c["name"]]
            tol = self.global_tol if self.global_tol is not None else c.get("tol", info.default_tol)
            family = built.base_family if c.get("target") == "base" else built.family
            reports.append(info.runner(built, family, self.sampling, tol, c, f"checks[{i}]"))
        return built, reports
