"""Experiment configuration (YAML).

Relative paths resolve against the directory of the config file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..parser.model import Hyperparams

INTERNAL_MODEL = "biaffine-lstm"


class ConfigError(ValueError):
    pass


@dataclass
class LanguageConfig:
    code: str
    treebank: Path | None = None
    train: Path | None = None
    dev: Path | None = None
    test: Path | None = None
    embeddings: Path | None = None
    embedding_dim: int | None = None
    synthetic: dict | None = None
    subsample: int | None = None
    train_sentences: int | None = None
    mattr: float | None = None

    @property
    def has_treebank(self) -> bool:
        return bool(self.treebank or self.train or self.synthetic)


@dataclass
class ExperimentConfig:
    languages: list[LanguageConfig]
    model: str = "internal"  # "internal" trains the biaffine parser, "external" only ingests scores
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    grid: dict[str, list] | None = None
    grid_budget_fraction: float = 0.25
    grid_runs: int | None = None
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    output_dir: Path = Path("results")
    punct: str = "include"
    single_root: bool = True
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 0
    external_scores: list[Path] = field(default_factory=list)
    baseline_model: str = INTERNAL_MODEL
    analysis: dict[str, Any] = field(default_factory=dict)
    jobs: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True, default=str).encode()).hexdigest()

    def language(self, code: str) -> LanguageConfig:
        for lang in self.languages:
            if lang.code == code:
                return lang
        raise ConfigError(f"language {code!r} not in config")


def _path(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def _check_exists(p: Path | None, what: str):
    if p is not None and not p.exists():
        raise ConfigError(f"{what} not found: {p}")


def config_from_dict(raw: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    base = Path(base_dir)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    langs = []
    for entry in raw.get("languages", []):
        if "code" not in entry:
            raise ConfigError("every language needs a code")
        lang = LanguageConfig(
            code=str(entry["code"]),
            treebank=_path(base, entry.get("treebank")),
            train=_path(base, entry.get("train")),
            dev=_path(base, entry.get("dev")),
            test=_path(base, entry.get("test")),
            embeddings=_path(base, entry.get("embeddings")),
            embedding_dim=entry.get("embedding_dim"),
            synthetic=entry.get("synthetic"),
            subsample=entry.get("subsample"),
            train_sentences=entry.get("train_sentences"),
            mattr=entry.get("mattr"),
        )
        for name in ("treebank", "train", "dev", "test", "embeddings"):
            _check_exists(getattr(lang, name), f"{lang.code} {name}")
        if lang.train is not None and (lang.dev is None or lang.test is None):
            raise ConfigError(f"{lang.code}: train given without dev and test")
        langs.append(lang)
    if not langs:
        raise ConfigError("config lists no languages")
    codes = [lang.code for lang in langs]
    if len(set(codes)) != len(codes):
        raise ConfigError("duplicate language codes")

    seeds = list(raw.get("seeds", [1, 2, 3, 4, 5]))
    if not seeds or len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be non-empty and distinct")

    hp_raw = dict(raw.get("hyperparams", {}))
    try:
        hp = Hyperparams(**hp_raw)
    except TypeError as exc:
        raise ConfigError(f"bad hyperparams: {exc}") from None

    grid_raw = raw.get("grid")
    grid = None
    budget = 0.25
    runs = None
    if grid_raw:
        grid = {k: list(grid_raw[k]) for k in ("learning_rate", "decay_rate", "decay_steps") if k in grid_raw}
        budget = float(grid_raw.get("budget_fraction", 0.25))
        runs = grid_raw.get("runs")

    ev = raw.get("evaluation", {})
    punct = ev.get("punct", "include")
    if punct not in ("include", "exclude"):
        raise ConfigError("evaluation.punct must be include or exclude")
    split = raw.get("split", {})
    ratios = tuple(split.get("ratios", (0.8, 0.1, 0.1)))
    ext = [_path(base, p) for p in raw.get("external_scores", [])]
    for p in ext:
        _check_exists(p, "external score file")
    model = raw.get("model", "internal")
    if model not in ("internal", "external"):
        raise ConfigError("model must be 'internal' or 'external'")
    return ExperimentConfig(
        languages=langs,
        model=model,
        hyperparams=hp,
        grid=grid,
        grid_budget_fraction=budget,
        grid_runs=runs,
        seeds=seeds,
        output_dir=_path(base, raw.get("output_dir", "results")),
        punct=punct,
        single_root=bool(ev.get("single_root", True)),
        split_ratios=ratios,
        split_seed=int(split.get("seed", 0)),
        external_scores=ext,
        baseline_model=raw.get("baseline_model", INTERNAL_MODEL),
        analysis=dict(raw.get("analysis", {})),
        jobs=int(raw.get("jobs", 1)),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    return config_from_dict(raw, path.parent)
