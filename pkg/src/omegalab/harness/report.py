"""Experiment reports and their JSON / CSV serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
CSV_HEADER = ("sample_index", "x", "observed", "predicted", "ratio")


@dataclass(frozen=True)
class SampleRecord:
    sample_index: int
    x: int | float
    observed: int | float
    predicted: float
    ratio: float

    def as_dict(self) -> dict:
        return {"sample_index": self.sample_index, "x": self.x, "observed": self.observed,
                "predicted": self.predicted, "ratio": self.ratio}


@dataclass
class ExperimentReport:
    """Outcome of one experiment run.

    Attributes:
        params: Echo of the experiment spec.
        samples: Per-sample records in sample order.
        aggregate: Summary statistics; always holds ``mean_ratio``,
            ``median_ratio`` and ``exceptional_fraction``.
        tables: Kind-specific extra tables (trend rows, correlation cells...).
        runtime_ms: Wall time, or ``None`` when timing is not requested so
            that repeated runs give identical files.
    """

    kind: str
    params: dict
    samples: list
    aggregate: dict
    tables: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    rng: dict = field(default_factory=dict)
    runtime_ms: float | None = None
    schema_version: int = SCHEMA_VERSION

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s.ratio for s in self.samples], dtype=np.float64)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "samples": [s.as_dict() for s in self.samples],
            "aggregate": self.aggregate,
            "tables": self.tables,
            "warnings": list(self.warnings),
            "rng": self.rng,
            "versions": versions(),
            "runtime_ms": self.runtime_ms,
            "schema_version": self.schema_version,
        }

    def to_json(self) -> str:
        return json.dumps(_plain(self.as_dict()), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in self.samples:
            w.writerow([s.sample_index, s.x, s.observed, repr(float(s.predicted)), repr(float(s.ratio))])
        return buf.getvalue()

    def write(self, json_path=None, csv_path=None) -> None:
        if json_path is not None:
            Path(json_path).write_text(self.to_json())
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv())


def versions() -> dict:
    from .. import __version__

    return {"omegalab": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _plain(obj):
    """Convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def exceptional_fraction(ratios, lo: float, hi: float) -> float:
    """Fraction of ratios outside the closed band ``[lo, hi]``."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.size == 0:
        return 0.0
    return float(np.count_nonzero((r < lo) | (r > hi) | np.isnan(r))) / r.size


def summarize(ratios, lo: float, hi: float) -> dict:
    r = np.asarray(ratios, dtype=np.float64)
    return {
        "mean_ratio": float(np.mean(r)),
        "median_ratio": float(np.median(r)),
        "exceptional_fraction": exceptional_fraction(r, lo, hi),
        "min_ratio": float(np.min(r)),
        "max_ratio": float(np.max(r)),
        "std_ratio": float(np.std(r)),
    }


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_bundle(report: ExperimentReport, out_dir, stem: str, *, figures: bool = True) -> list:
    """Write ``<stem>.json``, ``<stem>.csv`` and, when requested, the SVG figures.

    Correlation reports also get ``<stem>_cells.csv`` with one row per
    ``(b, k1, k2)`` cell.  Returns the written paths in a fixed order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.json", out / f"{stem}.csv"]
    report.write(*paths)
    cells = report.tables.get("cells")
    if cells:
        keys = list(dict.fromkeys(k for c in cells for k in c))
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(cells)
        paths.append(out / f"{stem}_cells.csv")
        paths[-1].write_text(buf.getvalue())
    if figures:
        paths.extend(_figures(report, out, stem))
    return paths


def _figures(report: ExperimentReport, out: Path, stem: str) -> list:
    from . import plots

    written = []
    band = (report.params["band_lo"], report.params["band_hi"])
    if len(report.samples) > 1 and "cells" not in report.tables:
        p = out / f"{stem}_ratios.svg"
        plots.ratio_histogram(p, report.ratios, band, f"{report.kind}: observed / predicted")
        written.append(p)
    trend = report.tables.get("trend")
    if trend:
        p = out / f"{stem}_trend.svg"
        plots.trend_plot(p, [r["h"] for r in trend], [r["mean_ratio"] for r in trend],
                         [r["exceptional_fraction"] for r in trend], f"{report.kind}: ratio against h")
        written.append(p)
    cells = report.tables.get("cells")
    if cells:
        ks = sorted({c["k1"] for c in cells})
        for b in sorted({c["b"] for c in cells}):
            grid = np.full((len(ks), len(ks)), np.nan)
            for c in cells:
                if c["b"] == b:
                    grid[ks.index(c["k1"]), ks.index(c["k2"])] = c["ratio"]
            p = out / f"{stem}_b{b}.svg"
            plots.heatmap(p, grid, ks, ks, f"joint count / (delta_k1 delta_k2 X), b = {b}")
            written.append(p)
    return written
