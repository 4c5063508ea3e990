"""Harmonic Riemannian submersions to circles and tori, and mapping-torus projections.

Submersion conditions are read off angle gradients: for ``phi = |phi| e^{i theta}``
the map ``phi / |phi(x0)|`` is a harmonic Riemannian submersion onto a circle
or torus exactly when the moduli are constant, the angles are harmonic and
their gradient Gram matrix matches the target metric.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from . import jet as J
from .jet import Jet2
from .manifolds import MappingTorusSpec, mapping_torus, time_coordinate
from .verify import (
    EigenFamilySpec,
    IdentityRecord,
    VerificationReport,
    _Accumulator,
    _coerce_sampling,
    _finalize,
    _tolerance,
    check_A_structure,
    polar_parts,
)


def _base_modulus(field, frames, base_point):
    if base_point is None:
        frame = frames[0]
        idx = int(np.flatnonzero(frame.valid)[0])
        return abs(frame.jet(field).value[idx])
    chart, point = base_point
    value = field.on(chart, np.atleast_2d(point)).value[0]
    return abs(value)


def _well_defined_acc(name, frames, fields, tol, base_point):
    """Residual ``| |phi(x)| / |phi(x0)| - 1 |``: the normalised map lands on the unit circle."""
    acc = _Accumulator(name, tol, "abs", "|phi(x)|/|phi(x0)| = 1")
    bases = [_base_modulus(f, frames, base_point) for f in fields]
    if any(b <= tol for b in bases):
        return acc, False
    for frame in frames:
        res = np.zeros(frame.n)
        for f, b in zip(fields, bases):
            res = np.maximum(res, np.abs(np.abs(frame.jet(f).value) / b - 1.0))
        acc.add(frame, res)
    return acc, True


def circle_submersion_check(phi, lam, manifold, points=None, tol=None, base_point=None):
    """``x -> phi(x)/|phi(x0)|`` onto ``(S^1, dt^2/|lam|)``.

    Checks (a) constant modulus, (b) ``tau(theta) = 0``, (c) ``kappa(theta, theta) = |lam|``.
    ``base_point`` is an optional ``(chart, point)`` pair; by default the first
    sample point.
    """
    sampling = _coerce_sampling(points)
    tol, mode = _tolerance(manifold, tol, None)
    lam = float(np.real(lam))
    if lam >= 0:
        raise ValueError(f"lambda must be negative, got {lam}")
    frames = sampling.frames(manifold)
    modulus, ok = _well_defined_acc("modulus_constant", frames, [phi], tol, base_point)
    harmonic = _Accumulator("tau(theta)", tol, "abs", "= 0")
    isometry = _Accumulator("kappa(theta,theta)", tol, mode, "= |lambda|")
    for frame in frames:
        with np.errstate(all="ignore"):
            j = frame.jet(phi)
            keep = np.abs(j.value) > tol
            _, theta = polar_parts(j)
            harmonic.add(frame, np.abs(frame.tau(theta)), None, keep)
            isometry.add(frame, np.abs(frame.kappa(theta, theta) - abs(lam)), np.full(frame.n, abs(lam)), keep)
    report = VerificationReport("circle_submersion_check", phi.label, data={"lambda": lam})
    _finalize(report, [modulus, harmonic, isometry])
    if not ok:
        report.valid = False
        report.notes.append("phi vanishes at the base point; the map is not well defined")
    elif not report.record("modulus_constant").verdict:
        report.notes.append("|phi| is not constant: phi is not a (lambda, lambda)-eigenfunction")
    return report


def angle_gram(frame, family: EigenFamilySpec):
    """``G[n, i, j] = g(grad theta_i, grad theta_j)`` with ``grad theta_i = Im(grad phi_i / phi_i)``."""
    thetas = []
    for f in family.fields:
        j = frame.jet(f)
        thetas.append((j.grad / j.value[:, None]).imag)
    t = np.stack(thetas, axis=1)  # (N, k, d)
    return np.einsum("nab,nia,njb->nij", frame.ginv, t, t)


def torus_submersion_check(family: EigenFamilySpec, manifold, points=None, tol=None, base_point=None):
    """``x -> (phi_i(x)/|phi_i(x0)|)_i`` onto the flat torus ``(T^k, A^{-1})`` with ``A = -family.A``.

    Requires ``A`` positive definite (the family reduced), constant moduli,
    harmonic angles and angle Gram matrix equal to ``A``.
    """
    sampling = _coerce_sampling(points)
    tol, mode = _tolerance(manifold, tol, None)
    target = -np.real(family.A)
    k = len(family)
    frames = sampling.frames(manifold)
    structure = check_A_structure(-target, tol)

    modulus, ok = _well_defined_acc("modulus_constant", frames, family.fields, tol, base_point)
    harmonic = _Accumulator("tau(theta_i)", tol, "abs", "= 0")
    gram = _Accumulator("angle_gram", tol, mode, "g(grad theta_i, grad theta_j) = A_ij")
    for frame in frames:
        with np.errstate(all="ignore"):
            jets = [frame.jet(f) for f in family.fields]
            keep = np.ones(frame.n, dtype=bool)
            worst_tau = np.zeros(frame.n)
            for j in jets:
                keep &= np.abs(j.value) > tol
                _, theta = polar_parts(j)
                worst_tau = np.maximum(worst_tau, np.abs(frame.tau(theta)))
            harmonic.add(frame, worst_tau, None, keep)
            G = angle_gram(frame, family)
            diff = np.max(np.abs(G - target[None]), axis=(1, 2))
            gram.add(frame, diff, np.full(frame.n, np.abs(target).max()), keep)
    report = VerificationReport(
        "torus_submersion_check",
        family.label,
        data={"target_metric_inverse": target.tolist(), "reduced": structure.is_reduced},
    )
    _finalize(report, [modulus, harmonic, gram])
    definite = structure.is_negative_definite and structure.is_real
    report.records.append(
        IdentityRecord(
            "A_positive_definite",
            float(min(np.linalg.eigvalsh(target))) if k else float("nan"),
            float(np.mean(np.linalg.eigvalsh(target))) if k else float("nan"),
            None,
            float(tol),
            "eig",
            bool(definite),
            note="smallest eigenvalue of A (must be > 0)",
        )
    )
    if not definite:
        report.notes.append("A is degenerate or indefinite: the family is not reduced")
    if not ok:
        report.valid = False
        report.notes.append("a field vanishes at the base point; the map is not well defined")
    return report


def _time_samples(count, seed, margin):
    sampler = qmc.Halton(d=1, scramble=True, seed=np.random.default_rng(seed))
    u = sampler.random(count)[:, 0]
    return 2 * np.pi * (margin + (1 - 2 * margin) * u)


def log_det_derivative(spec: MappingTorusSpec, t):
    """``d/dt ln det G(t)`` with the determinant pushed through jets."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tj = Jet2.variable(t, 0, 1)
    G = spec.G(tj)
    G = [[g if isinstance(g, Jet2) else Jet2.constant(g, tj.n, 1) for g in row] for row in G]
    D = J.det(G)
    return D.grad[:, 0] / D.value, D.value


def volume_density_check(spec: MappingTorusSpec, points=None, tol=1e-8):
    """``|d/dt ln det G(t)|`` at sampled times; zero iff the fibre volume density is t-constant."""
    sampling = _coerce_sampling(points)
    spec.validate()
    t = _time_samples(sampling.count, sampling.seed, sampling.margin)
    with np.errstate(all="ignore"):
        rate, det = log_det_derivative(spec, t)
    if np.any(det <= 0):
        raise ValueError(f"{spec.label}: det G(t) <= 0 at t={t[np.flatnonzero(det <= 0)[0]]:.6g}")
    res = np.abs(rate)
    i = int(np.argmax(res))
    record = IdentityRecord(
        "d/dt ln det G(t)",
        float(res[i]),
        float(res.mean()),
        {"chart": "t", "point": [float(t[i])]},
        float(tol),
        "abs",
        bool(res[i] <= tol),
        int(res.size),
        note="= 0",
    )
    return VerificationReport("volume_density_check", spec.label, [record])


def projection_harmonicity_check(spec: MappingTorusSpec, points=None, tol=1e-8):
    """``tau(t) = 0`` and ``kappa(t, t) = |lambda|`` on the mapping-torus chart itself."""
    sampling = _coerce_sampling(points)
    manifold, _ = mapping_torus(spec)
    t = time_coordinate(spec)
    harmonic = _Accumulator("tau(t)", tol, "abs", "= 0")
    isometry = _Accumulator("kappa(t,t)", tol, "abs", "= |lambda|")
    for frame in sampling.frames(manifold):
        with np.errstate(all="ignore"):
            harmonic.add(frame, np.abs(frame.tau(t)))
            isometry.add(frame, np.abs(frame.kappa(t, t) - abs(spec.lam)))
    report = VerificationReport("projection_harmonicity_check", spec.label, data={"lambda": spec.lam})
    return _finalize(report, [harmonic, isometry])
