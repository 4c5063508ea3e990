"""Command-line front end: run a manifest, emit a JSON report.

Exit codes: 0 all checks pass, 1 at least one check fails, 2 configuration
or parse error (no report is written).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .manifest import Manifest, ManifestError, list_checks
from .verify import VerificationReport

SCHEMA = "eigenfamily-report/1"
TIMING_KEYS = ("timing",)


@dataclass
class ReportDocument:
    manifest: dict
    family: dict
    checks: list
    tool: dict = field(default_factory=lambda: {"name": "eigenfamilies", "version": __version__})
    timing: dict = field(default_factory=dict)
    schema: str = SCHEMA

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        return {
            "passed": self.passed,
            "checks": len(self.checks),
            "failed": [c.check for c in self.checks if not c.passed],
            "max_residual": _finite_max(c.max_residual for c in self.checks),
        }

    def to_dict(self):
        return {
            "schema": self.schema,
            "tool": self.tool,
            "manifest": self.manifest,
            "family": self.family,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary(),
            "timing": self.timing,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            d["manifest"],
            d["family"],
            [VerificationReport.from_dict(c) for c in d["checks"]],
            d["tool"],
            d.get("timing", {}),
            d["schema"],
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _finite_max(values):
    vals = [v for v in values if isinstance(v, float) and np.isfinite(v)]
    return max(vals) if vals else "excluded-point"


def _cvec(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).ravel()]


def strip_timing(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k not in TIMING_KEYS}


def run_manifest(doc, seed=None, points=None, tol=None) -> ReportDocument:
    """Parse, build and run; raises :class:`ManifestError` on configuration problems."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    manifest = Manifest.parse(doc, seed=seed, points=points, tol=tol)
    built, reports = manifest.run()
    family = {
        "label": built.family.label,
        "size": len(built.family),
        "lambda": _cvec(built.family.lam),
        "A": [_cvec(row) for row in built.family.A],
        "transforms": built.transforms,
    }
    return ReportDocument(
        manifest.raw,
        family,
        reports,
        timing={
            "started_at": started.isoformat(),
            "wall_clock_seconds": time.perf_counter() - t0,
        },
    )


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eigenfamilies",
        description="Verify eigenfamily identities on charted manifolds from a JSON manifest.",
    )
    parser.add_argument("--manifest", type=Path, help="path to the JSON manifest")
    parser.add_argument("--out", type=Path, help="write the report here instead of standard output")
    parser.add_argument("--seed", type=int, help="override sampling.seed")
    parser.add_argument("--points", type=int, help="override sampling.count (points per chart)")
    parser.add_argument("--tol", type=float, help="global tolerance override for every check")
    parser.add_argument("--quiet", action="store_true", help="no human-readable summary on stderr")
    parser.add_argument("--list-checks", action="store_true", help="print the check catalog and exit")
    args = parser.parse_args(argv)

    if args.list_checks:
        print(json.dumps(list_checks(), indent=2))
        return 0
    if args.manifest is None:
        parser.print_usage(sys.stderr)
        print("eigenfamilies: error: --manifest is required", file=sys.stderr)
        return 2
    if args.seed is not None and args.seed < 0:
        print("eigenfamilies: error: --seed must be non-negative", file=sys.stderr)
        return 2
    if args.points is not None and args.points < 1:
        print("eigenfamilies: error: --points must be positive", file=sys.stderr)
        return 2

    try:
        text = args.manifest.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"eigenfamilies: error: cannot read manifest: {exc}", file=sys.stderr)
        return 2
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"eigenfamilies: error: {args.manifest}:{exc.lineno}:{exc.colno}: {exc.msg}", file=sys.stderr)
        return 2
    try:
        report = run_manifest(doc, seed=args.seed, points=args.points, tol=args.tol)
    except ManifestError as exc:
        print(f"eigenfamilies: error: {exc}", file=sys.stderr)
        return 2

    payload = report.to_json()
    if args.out is not None:
        args.out.write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if not args.quiet:
        for c in report.checks:
            print(c.summary(), file=sys.stderr)
        print("PASS" if report.passed else "FAIL", file=sys.stderr)
    return 0 if report.passed else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
