"""Plot-ready CSV/JSON outputs and the run manifest that hashes them.

Data files are byte-stable: floats are written with ``repr``, JSON keys are
sorted, and nothing time-dependent goes into them.  Wall-clock time lives
only in ``manifest.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import OutputError, ParameterError
from .experiments import CheckReport, RateReport

CSV_COLUMNS = ("n", "epsilon", "kappa", "metric", "mean", "stderr", "R")
MANIFEST = "manifest.json"


def _num(x):
    """Float for JSON; non-finite values become ``null``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    return _num(obj)


def to_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv_field(x):
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def rate_csv(report):
    lines = [",".join(CSV_COLUMNS)]
    for p in report.points:
        row = (p.n, p.epsilon, p.kappa, p.metric, p.mean, p.stderr, p.replications)
        lines.append(",".join(_csv_field(v) for v in row))
    return "\n".join(lines) + "\n"


def rate_json(report):
    fits = {}
    for m, f in report.fits.items():
        fits[m] = {
            "slope": f.slope, "slope_se": f.slope_se, "r2": f.r2,
            "points_used": list(f.points_used), "note": f.note,
        }
    return to_json({"config": report.config, "fits": fits})


def checks_json(checks):
    return to_json({"checks": [c.to_dict() for c in checks]})


@dataclass(frozen=True)
class RunManifest:
    config: dict | None
    version: str
    seed: int | None
    wall_clock: float | None
    files: dict = field(default_factory=dict)  # name -> sha256
    summaries: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "config": self.config, "version": self.version, "seed": self.seed,
            "wall_clock_seconds": self.wall_clock, "files": dict(self.files),
            "summaries": self.summaries,
        }


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def _write(path, text):
    data = text.encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None
    return sha256_bytes(data)


def _summaries(report, checks):
    out = {}
    if report is not None:
        out["sweep"] = {m: {"slope": _num(f.slope), "r2": _num(f.r2)} for m, f in sorted(report.fits.items())}
    if checks:
        out["checks"] = {c.name: c.passed for c in checks}
    return out


def emit_reports(report, out_dir, *, seed=None, wall_clock=None, extra_files=None):
    """Write the data files for a sweep or a list of checks, then the manifest.

    ``report`` is a :class:`RateReport` or a list of :class:`CheckReport`.
    ``extra_files`` maps further file names to text (for example a dumped
    path).  Returns the :class:`RunManifest` that was written.
    """
    from . import __version__

    out_dir = Path(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OutputError(out_dir, exc.strerror or str(exc)) from None

    files = {}
    config = None
    checks = None
    rate = None
    if isinstance(report, RateReport):
        rate = report
        config = report.config
        files["series.csv"] = rate_csv(report)
        files["report.json"] = rate_json(report)
    elif isinstance(report, (list, tuple)) and all(isinstance(c, CheckReport) for c in report):
        checks = list(report)
        if checks:
            files["checks.json"] = checks_json(checks)
    elif report is not None:
        raise ParameterError(f"cannot emit {type(report).__name__}")
    files.update(extra_files or {})

    hashes = {name: _write(out_dir / name, text) for name, text in sorted(files.items())}
    manifest = RunManifest(
        config=config,
        version=__version__,
        seed=seed,
        wall_clock=wall_clock,
        files=hashes,
        summaries=_summaries(rate, checks),
    )
    _write(out_dir / MANIFEST, to_json(manifest.to_dict()))
    return manifest


def verify_manifest(out_dir):
    """Recompute every hash listed in a manifest; returns the names that no longer match."""
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST, encoding="utf-8") as fh:
        manifest = json.load(fh)
    bad = []
    for name, digest in manifest["files"].items():
        try:
            data = (out_dir / name).read_bytes()
        except OSError:
            bad.append(name)
            continue
        if sha256_bytes(data) != digest:
            bad.append(name)
    return bad
