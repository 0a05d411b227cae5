"""Experiment reports and their on-disk form."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from ..solver import DensityField, write_checkpoint


@dataclass
class Verdict:
    """Outcome of one check; ``passed`` is ``None`` when the verdict is withheld."""

    passed: bool | None
    value: float | None = None
    threshold: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"pass": self.passed, "value": self.value, "threshold": self.threshold, "note": self.note}


@dataclass
class Report:
    """Everything an experiment produces.

    ``tables`` maps a CSV file name to ``(header, rows)``; ``checkpoints``
    are written as ``rho_t*.csv`` files under ``checkpoints/<label>/``.
    """

    experiment: str
    config: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    checkpoints: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed is True for v in self.verdicts.values())

    def add_fit_table(self, name: str, x, y, fit):
        rows = [[float(a), float(b), float(c)] for a, b, c in zip(x, y, fit)]
        self.tables[f"fit_{name}.csv"] = (["x", "y", "fit"], rows)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "records": self.records,
            "fits": self.fits,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "warnings": self.warnings,
        }


def _clean(obj):
    """Plain JSON types; non-finite floats become strings so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_report(report: Report, directory, seed: int | None = None) -> list[Path]:
    """Write ``report.json``, CSV tables, checkpoints and ``manifest.json``.

    Outputs depend only on the report contents, so identical runs give
    identical bytes.  Returns the written paths in a fixed order.
    """
    from .. import __version__

    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written: list[Path] = []
    try:
        path = out / "report.json"
        path.write_text(json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n")
        written.append(path)
        for name in sorted(report.tables):
            header, rows = report.tables[name]
            path = out / name
            write_table(path, header, rows)
            written.append(path)
        for label in sorted(report.checkpoints):
            sub = out / "checkpoints" / label
            sub.mkdir(parents=True, exist_ok=True)
            fields_: list[DensityField] = report.checkpoints[label]
            for f in fields_:
                written.append(write_checkpoint(f, sub))
        manifest = {
            "experiment": report.experiment,
            "config": report.config,
            "seed": report.config.get("seed") if seed is None else seed,
            "versions": {
                "pmelab": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": {str(p.relative_to(out)): _sha256(p) for p in written},
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(_clean(manifest), sort_keys=True, indent=2) + "\n")
        written.append(path)
    except OSError as exc:
        raise OSError(f"failed writing report to {out}: {exc}") from exc
    return written
