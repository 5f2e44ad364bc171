"""Results store: per-seed runs and ingested aggregate scores as CSV files.

Per-seed schema:  language,model,metric,seed,value
Aggregate schema: language,model,metric,mean,sd
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

RUN_FIELDS = ["language", "model", "metric", "seed", "value"]
AGG_FIELDS = ["language", "model", "metric", "mean", "sd"]
METRICS = ("LAS", "UAS")
MISSING = "NA"


class IngestError(ValueError):
    pass


def fmt(x: float | None, digits: int = 6) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return MISSING
    return f"{x:.{digits}f}"


@dataclass(frozen=True)
class ScoreRecord:
    language: str
    model: str
    metric: str
    mean: float
    sd: float
    values: tuple[float, ...] = ()
    source: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.language, self.model, self.metric)


@dataclass
class RunRow:
    language: str
    model: str
    metric: str
    seed: int
    value: float | None


def aggregate(values: Iterable[float]) -> tuple[float, float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return mean, sd


def _read_csv(text: str, required: list[str], name: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != required:
        raise IngestError(f"{name}: header must be {','.join(required)}, got {reader.fieldnames}")
    return list(reader)


def ingest_external_scores(source, name: str | None = None) -> list[ScoreRecord]:
    """Validate an aggregate-score CSV (language,model,metric,mean,sd)."""
    is_path = isinstance(source, Path) or (isinstance(source, str) and "\n" not in source)
    if is_path and Path(source).exists():
        name = name or str(source)
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
        name = name or "<scores>"
    rows = _read_csv(text, AGG_FIELDS, name)
    seen = set()
    records = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{name} row {lineno}"
        try:
            mean = float(row["mean"])
            sd = float(row["sd"])
        except (TypeError, ValueError):
            raise IngestError(f"{where}: mean and sd must be numbers") from None
        metric = row["metric"].strip().upper()
        if metric not in METRICS:
            raise IngestError(f"{where}: metric must be LAS or UAS, got {row['metric']!r}")
        if not (0.0 <= mean <= 100.0):
            raise IngestError(f"{where}: mean {mean} outside [0, 100]")
        if not sd >= 0.0:
            raise IngestError(f"{where}: sd {sd} is negative")
        rec = ScoreRecord(row["language"].strip(), row["model"].strip(), metric, mean, sd, source=name)
        if not rec.language or not rec.model:
            raise IngestError(f"{where}: language and model are required")
        if rec.key in seen:
            raise IngestError(f"{where}: duplicate key {rec.key}")
        seen.add(rec.key)
        records.append(rec)
    return records


def runs_to_csv(rows: Iterable[RunRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    for r in sorted(rows, key=lambda r: (r.language, r.model, r.metric, r.seed)):
        w.writerow([r.language, r.model, r.metric, r.seed, fmt(r.value, 10)])
    return buf.getvalue()


def runs_from_csv(text: str, name: str = "runs.csv") -> list[RunRow]:
    rows = []
    for row in _read_csv(text, RUN_FIELDS, name):
        v = row["value"]
        rows.append(RunRow(row["language"], row["model"], row["metric"], int(row["seed"]),
                           None if v == MISSING else float(v)))
    return rows


def records_to_csv(records: Iterable[ScoreRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_FIELDS)
    for r in sorted(records, key=lambda r: r.key):
        w.writerow([r.language, r.model, r.metric, fmt(r.mean, 10), fmt(r.sd, 10)])
    return buf.getvalue()


@dataclass
class ResultsStore:
    """Internal per-seed runs plus ingested external aggregates."""

    runs: list[RunRow] = field(default_factory=list)
    external: list[ScoreRecord] = field(default_factory=list)

    RUNS_FILE = "runs.csv"
    EXTERNAL_FILE = "external_scores.csv"

    def add_external(self, records: Iterable[ScoreRecord]) -> None:
        have = {r.key for r in self.external} | {k for k in self._run_keys()}
        for rec in records:
            if rec.key in have:
                raise IngestError(f"duplicate key {rec.key} already in results store")
            have.add(rec.key)
            self.external.append(rec)

    def _run_keys(self):
        return {(r.language, r.model, r.metric) for r in self.runs}

    def records(self) -> list[ScoreRecord]:
        """All scores as aggregate records, internal runs aggregated over seeds."""
        grouped: dict = {}
        for r in self.runs:
            grouped.setdefault((r.language, r.model, r.metric), []).append(r)
        out = []
        for key, rows in grouped.items():
            rows.sort(key=lambda r: r.seed)
            vals = [r.value for r in rows if r.value is not None]
            mean, sd = aggregate(vals)
            out.append(ScoreRecord(*key, mean=mean, sd=sd, values=tuple(vals), source="runs"))
        out.extend(self.external)
        return sorted(out, key=lambda r: r.key)

    def lookup(self) -> dict[tuple[str, str, str], ScoreRecord]:
        return {r.key: r for r in self.records()}

    def per_seed(self) -> dict[tuple[str, str, str], dict[int, float]]:
        out: dict = {}
        for r in self.runs:
            if r.value is not None:
                out.setdefault((r.language, r.model, r.metric), {})[r.seed] = r.value
        return out

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / self.RUNS_FILE).write_text(runs_to_csv(self.runs), encoding="utf-8")
        (d / self.EXTERNAL_FILE).write_text(records_to_csv(self.external), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "ResultsStore":
        d = Path(directory)
        store = cls()
        if (d / cls.RUNS_FILE).exists():
            store.runs = runs_from_csv((d / cls.RUNS_FILE).read_text(encoding="utf-8"))
        if (d / cls.EXTERNAL_FILE).exists():
            store.external = ingest_external_scores((d / cls.EXTERNAL_FILE).read_text(encoding="utf-8"),
                                                    name=str(d / cls.EXTERNAL_FILE))
        return store
