"""Count-file ingestion, result persistence, and run configuration.

Counts travel as JSON lines (streamable, append-friendly from external
sampling jobs); results and tables as CSV or markdown.  Both schemas
carry a schema_version field.  All emitters write deterministic bytes:
fixed column order, shortest-round-trip float formatting, newline "\\n".

Count-file schema, one record per line:
  {"schema_version": 1, "example_id": str, "label": int, "predicted": int,
   "n_selection": int, "count_p": int, "count_q": int, "n_samples": int,
   "noise": {"kind": str, "sigma_p": float, "sigma_q": float, "k": int,
   "d": int}, "seed": int}
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .confidence import DEFAULT_ALPHA, DEFAULT_NUM_SAMPLES
from .distributions import NoiseSpec
from .neyman_pearson import DEFAULT_RADIUS_TOL
from .pipeline import acr, certified_accuracy
from .records import SCHEMA_VERSION, CertResult, CountRecord

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "example_id", "method", "radius", "abstained", "correct",
    "pa_low", "qa_low", "qa_high",
)
CURVE_COLUMNS = ("x", "np_value", "dsrs_value")
DEFAULT_GRID = "0.25:3.0:0.25"

_REQUIRED_FIELDS = (
    "schema_version", "example_id", "label", "predicted", "n_selection",
    "count_p", "count_q", "n_samples", "noise", "seed",
)
_NOISE_FIELDS = ("kind", "sigma_p", "sigma_q", "k", "d")


def _record_from_json(obj: dict) -> CountRecord:
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise ValueError(f"missing required field {name!r}")
    if obj["schema_version"] != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema_version {obj['schema_version']!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    noise = obj["noise"]
    if not isinstance(noise, dict):
        raise ValueError("noise must be an object")
    for name in _NOISE_FIELDS:
        if name not in noise:
            raise ValueError(f"missing noise field {name!r}")
    return CountRecord(
        example_id=str(obj["example_id"]),
        label=obj["label"],
        predicted=obj["predicted"],
        n_selection=obj["n_selection"],
        count_p=obj["count_p"],
        count_q=obj["count_q"],
        n_samples=obj["n_samples"],
        kind=noise["kind"],
        sigma_p=float(noise["sigma_p"]),
        sigma_q=float(noise["sigma_q"]),
        k=noise["k"],
        d=noise["d"],
        seed=obj["seed"],
    )


def parse_counts(path: str | Path, *, errors: list | None = None) -> Iterator[CountRecord]:
    """Stream CountRecords from a JSON-lines file.

    Malformed lines are logged with their line number and collected into
    the optional errors list as (line_number, message); parsing continues
    with the next line.  An empty file yields nothing, with a warning.
    """
    path = Path(path)
    seen = 0
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            seen += 1
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                record = _record_from_json(obj)
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                logger.warning("%s:%d: skipping malformed line: %s", path, lineno, exc)
                if errors is not None:
                    errors.append((lineno, str(exc)))
                continue
            yield record
    if seen == 0:
        logger.warning("%s: no count records found", path)


def _record_to_json(record: CountRecord) -> str:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "example_id": record.example_id,
        "label": record.label,
        "predicted": record.predicted,
        "n_selection": record.n_selection,
        "count_p": record.count_p,
        "count_q": record.count_q,
        "n_samples": record.n_samples,
        "noise": {
            "kind": record.kind,
            "sigma_p": record.sigma_p,
            "sigma_q": record.sigma_q,
            "k": record.k,
            "d": record.d,
        },
        "seed": record.seed,
    }
    return json.dumps(obj, separators=(",", ":"))


def emit_counts(records: Sequence[CountRecord], path: str | Path) -> None:
    """Write count records as JSON lines in the documented schema."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(_record_to_json(record) + "\n")


def _flat_results(results) -> list[CertResult]:
    if results and isinstance(results[0], (list, tuple)):
        raise ValueError("per-example formats take a flat result list, not runs")
    return list(results)


def _result_row(res: CertResult) -> list[str]:
    return [
        res.example_id, res.method, repr(float(res.radius)),
        "true" if res.abstained else "false",
        "true" if res.correct else "false",
        repr(float(res.pa_low)), repr(float(res.qa_low)), repr(float(res.qa_high)),
    ]


def emit_results(results, fmt: str, path: str | Path, *, grid: str = DEFAULT_GRID) -> None:
    """Persist certification results.

    csv and jsonl write one line per result with the documented columns.
    markdown renders the certified-accuracy table instead: one row per
    (run, method) with the accuracy at each grid radius and the ACR,
    mirroring the radius-grid table layout of certification papers.
    """
    path = Path(path)
    if fmt == "csv":
        rows = _flat_results(results)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for res in rows:
                writer.writerow(_result_row(res))
    elif fmt == "jsonl":
        rows = _flat_results(results)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for res in rows:
                obj = {
                    "schema_version": SCHEMA_VERSION,
                    "example_id": res.example_id,
                    "method": res.method,
                    "radius": res.radius,
                    "abstained": res.abstained,
                    "correct": res.correct,
                    "pa_low": res.pa_low,
                    "qa_low": res.qa_low,
                    "qa_high": res.qa_high,
                }
                handle.write(json.dumps(obj, separators=(",", ":")) + "\n")
    elif fmt == "markdown":
        runs = results if results and isinstance(results[0], (list, tuple)) else [results]
        emit_table(runs, grid, "markdown", path)
    else:
        raise ValueError(f"unknown results format {fmt!r}")


def emit_table(runs, grid: str, fmt: str, path: str | Path) -> None:
    """Certified-accuracy table over one or more result runs.

    One row per (approach, run): accuracy at each grid radius, then the
    ACR.  markdown renders the radius-grid table shape; csv writes the
    same rows with columns approach, run, r_<radius>..., acr.
    """
    path = Path(path)
    radii = parse_grid(grid)
    table_rows: list[list[str]] = []
    for method in ("np", "dsrs"):
        for i, run in enumerate(runs, start=1):
            subset = [res for res in run if res.method == method]
            accs = certified_accuracy(subset, radii) if subset else [
                {"radius": g, "accuracy": 0.0} for g in radii
            ]
            table_rows.append(
                [method, str(i)]
                + [f"{row['accuracy'] * 100.0:.1f}%" for row in accs]
                + [f"{acr(subset):.4f}"]
            )
    if fmt == "markdown":
        header = ["approach", "run"] + [f"r={g:g}" for g in radii] + ["ACR"]
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(["---"] * len(header)) + "|"]
        lines.extend("| " + " | ".join(row) + " |" for row in table_rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "csv":
        header = ["approach", "run"] + [f"r_{g:g}" for g in radii] + ["acr"]
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in table_rows:
                writer.writerow([cell.rstrip("%") for cell in row])
    else:
        raise ValueError(f"unknown table format {fmt!r}")


def parse_results(path: str | Path, *, errors: list | None = None) -> list[CertResult]:
    """Read certification results back from a csv or jsonl file.

    The format is chosen by extension (.jsonl / anything else as csv).
    Malformed rows are logged and collected like parse_counts.
    """
    path = Path(path)
    out: list[CertResult] = []

    def row_to_result(obj: dict) -> CertResult:
        return CertResult(
            example_id=str(obj["example_id"]),
            method=str(obj["method"]),
            radius=float(obj["radius"]),
            abstained=_as_bool(obj["abstained"]),
            correct=_as_bool(obj["correct"]),
            pa_low=float(obj["pa_low"]),
            qa_low=float(obj["qa_low"]),
            qa_high=float(obj["qa_high"]),
        )

    if path.suffix == ".jsonl":
        with path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    out.append(row_to_result(json.loads(line)))
                except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                    logger.warning("%s:%d: skipping malformed result: %s", path, lineno, exc)
                    if errors is not None:
                        errors.append((lineno, str(exc)))
    else:
        with path.open("r", encoding="utf-8", newline="") as handle:
            for lineno, row in enumerate(csv.DictReader(handle), start=2):
                try:
                    out.append(row_to_result(row))
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning("%s:%d: skipping malformed result: %s", path, lineno, exc)
                    if errors is not None:
                        errors.append((lineno, str(exc)))
    return out


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ValueError(f"expected a boolean, got {value!r}")


def emit_curve(rows: Sequence[dict], path: str | Path) -> None:
    """Write curve rows (x, np_value, dsrs_value) as CSV."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([
                repr(row["x"]) if isinstance(row["x"], float) else str(row["x"]),
                repr(float(row["np_value"])),
                repr(float(row["dsrs_value"])),
            ])


def parse_grid(text: str) -> list[float]:
    """Radius grid from "start:stop:step", endpoints inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0.0 or stop < start:
        raise ValueError(f"grid must ascend with positive step, got {text!r}")
    out = []
    value = start
    index = 0
    while value <= stop + 1e-9 * max(1.0, abs(stop)):
        out.append(round(value, 12))
        index += 1
        value = start + index * step
    return out


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat KEY=VALUE configuration: one pair per line, '#' comments."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


@dataclass
class RunConfig:
    """Validated settings for one command-line run.

    Precedence: explicit CLI flags over config-file entries over the
    defaults here.  build() applies that merge; validate() constructs
    both noise specs so every invariant fails before any work starts.
    """

    mode: str = "both"
    kind: str = "general-gaussian"
    sigma_p: float = 0.5
    sigma_q: float | None = None
    k: int = 0
    d: int = 784
    alpha: float = DEFAULT_ALPHA
    n_samples: int = DEFAULT_NUM_SAMPLES
    grid: str = DEFAULT_GRID
    tol: float = DEFAULT_RADIUS_TOL
    workers: int = 1
    seed: int = 0
    input_path: str | None = None
    out: str | None = None

    _FLOATS = ("sigma_p", "sigma_q", "alpha", "tol")
    _INTS = ("k", "d", "n_samples", "workers", "seed")

    @classmethod
    def build(cls, cli: dict, config_file: dict | None = None) -> "RunConfig":
        merged: dict = {}
        for source in (config_file or {}, cli):
            for key, value in source.items():
                if value is None:
                    continue
                merged[key] = value
        cfg = cls()
        for key, value in merged.items():
            if not hasattr(cfg, key) or key.startswith("_"):
                raise ValueError(f"unknown configuration key {key!r}")
            if key in cls._FLOATS and value is not None:
                value = float(value)
            elif key in cls._INTS:
                value = int(value)
            elif key in ("mode", "kind", "grid", "input_path", "out"):
                value = str(value)
            setattr(cfg, key, value)
        return cfg

    def validate(self) -> tuple[NoiseSpec, NoiseSpec]:
        if self.mode not in ("np", "dsrs", "both"):
            raise ValueError(f"mode must be np, dsrs, or both, got {self.mode!r}")
        if self.sigma_q is None:
            # default secondary pairing: sigma_Q = 0.8 * sigma_P
            self.sigma_q = 0.8 * self.sigma_p
        spec_p = NoiseSpec(kind=self.kind, sigma=self.sigma_p, k=self.k, d=self.d)
        spec_q = NoiseSpec(kind=self.kind, sigma=self.sigma_q, k=self.k, d=self.d)
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        parse_grid(self.grid)
        return spec_p, spec_q
