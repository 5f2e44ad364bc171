"""Multi-seed training orchestration."""

from __future__ import annotations

import hashlib
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..embeddings import EmbeddingTable, build_vocab, read_embeddings, synthetic_embeddings
from ..metrics import mattr
from ..parser.checkpoint import save_checkpoint
from ..parser.model import Hyperparams
from ..parser.training import grid_search, train
from ..synthetic import synthetic_treebank, synthetic_vocabulary
from ..treebank import TreebankSplit, read_conllu, split_treebank, subsample
from .config import INTERNAL_MODEL, ExperimentConfig, LanguageConfig
from .store import ResultsStore, RunRow, ingest_external_scores

log = logging.getLogger(__name__)


@dataclass
class LanguageData:
    code: str
    split: TreebankSplit
    table: EmbeddingTable | None
    checksums: dict[str, str]


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_language(lang: LanguageConfig, cfg: ExperimentConfig) -> LanguageData:
    checksums = {}
    if lang.synthetic is not None:
        syn = dict(lang.synthetic)
        sents = synthetic_treebank(int(syn.get("sentences", 200)), int(syn.get("seed", 0)), lang.code)
        split = split_treebank(sents, cfg.split_ratios, cfg.split_seed)
        checksums["synthetic"] = json.dumps(syn, sort_keys=True)
    elif lang.train is not None:
        split = TreebankSplit(read_conllu(lang.train, lang.code), read_conllu(lang.dev, lang.code),
                              read_conllu(lang.test, lang.code))
        for name in ("train", "dev", "test"):
            checksums[name] = _sha256(getattr(lang, name))
    elif lang.treebank is not None:
        split = split_treebank(read_conllu(lang.treebank, lang.code), cfg.split_ratios, cfg.split_seed)
        checksums["treebank"] = _sha256(lang.treebank)
    else:
        raise ValueError(f"{lang.code}: no treebank configured")
    if lang.subsample is not None and lang.subsample < len(split.train):
        split = TreebankSplit(subsample(split.train, lang.subsample, cfg.split_seed), split.dev, split.test)
    table = None
    if lang.embeddings is not None:
        table = read_embeddings(lang.embeddings, lang.embedding_dim)
        checksums["embeddings"] = _sha256(lang.embeddings)
    elif lang.synthetic is not None and lang.embedding_dim:
        table = synthetic_embeddings(synthetic_vocabulary(), lang.embedding_dim, int(lang.synthetic.get("seed", 0)))
    return LanguageData(lang.code, split, table, checksums)


def language_mattr(lang: LanguageConfig, cfg: ExperimentConfig, window: int = 500):
    """(raw MATTR, token count) from the training split, or the configured value."""
    if lang.has_treebank:
        data = load_language(lang, cfg)
        forms = [f for s in data.split.train for f in s.forms]
        score = mattr(forms, window, lang.code)
        return score.value, score.token_count
    if lang.mattr is None:
        return None, None
    return float(lang.mattr), None


def train_sentence_count(lang: LanguageConfig, cfg: ExperimentConfig) -> int | None:
    if lang.train_sentences is not None:
        return int(lang.train_sentences)
    if lang.has_treebank:
        return len(load_language(lang, cfg).split.train)
    return None


def _run_one(args):
    cfg, code, seed, hp_dict, out_dir = args
    lang = cfg.language(code)
    manifest = {
        "language": code,
        "model": INTERNAL_MODEL,
        "seed": seed,
        "config_sha256": cfg.digest(),
        "hyperparams": None,
        "status": "ok",
    }
    try:
        data = load_language(lang, cfg)
        manifest["data_sha256"] = data.checksums
        manifest["split_counts"] = data.split.counts
        hp = Hyperparams(**hp_dict).replace(seed=seed)
        manifest["hyperparams"] = hp.to_dict()
        vocab = build_vocab(data.split.train, hp.min_frequency)
        params, result = train(hp, data.split, vocab, data.table, language=code,
                               single_root=cfg.single_root, punct=cfg.punct)
        manifest["result"] = {"uas": result.uas, "las": result.las, "best_epoch": result.best_epoch,
                              "epochs_run": result.epochs_run}
        if out_dir is not None:
            ck = Path(out_dir) / "checkpoints" / f"{code}_seed{seed}.npz"
            ck.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(ck, params, hp, vocab, data.table.digest() if data.table is not None else None)
            manifest["checkpoint"] = str(ck.relative_to(out_dir))
        return manifest, result
    except Exception as exc:  # recorded, the batch carries on
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["traceback"] = traceback.format_exc()
        return manifest, None


def resolve_hyperparams(cfg: ExperimentConfig, code: str, out_dir: Path | None) -> Hyperparams:
    """Grid-search winner for the language if one was saved, else the config's."""
    if out_dir is not None:
        best = Path(out_dir) / "grid" / f"{code}.json"
        if best.exists():
            return Hyperparams(**json.loads(best.read_text())["best"])
    return cfg.hyperparams


def run_experiment(cfg: ExperimentConfig, seeds=None, out_dir=None, write: bool = True) -> ResultsStore:
    """Train and evaluate every language x seed; returns the results store.

    Manifests go to ``<out>/manifests``; failed runs are recorded with
    diagnostics and appear as NA values rather than aborting the batch.
    """
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    seeds = list(seeds) if seeds is not None else list(cfg.seeds)
    store = ResultsStore()
    for path in cfg.external_scores:
        store.add_external(ingest_external_scores(path))
    if cfg.model == "internal":
        jobs = []
        for lang in cfg.languages:
            if not lang.has_treebank:
                continue
            hp = resolve_hyperparams(cfg, lang.code, out)
            for seed in seeds:
                jobs.append((cfg, lang.code, seed, hp.to_dict(), out if write else None))
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                outcomes = list(pool.map(_run_one, jobs))
        else:
            outcomes = [_run_one(j) for j in jobs]
        for (manifest, result), job in zip(outcomes, jobs):
            code, seed = job[1], job[2]
            if result is None:
                log.error("run %s seed %s failed: %s", code, seed, manifest.get("error"))
            for metric in ("LAS", "UAS"):
                value = None if result is None else (result.las if metric == "LAS" else result.uas)
                store.runs.append(RunRow(code, INTERNAL_MODEL, metric, seed, value))
            if write:
                mdir = out / "manifests"
                mdir.mkdir(parents=True, exist_ok=True)
                (mdir / f"{code}_seed{seed}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if write:
        store.save(out)
    return store


def run_grid_search(cfg: ExperimentConfig, out_dir=None) -> dict[str, Hyperparams]:
    if not cfg.grid:
        raise ValueError("config has no grid section")
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    best = {}
    for lang in cfg.languages:
        if not lang.has_treebank:
            continue
        data = load_language(lang, cfg)
        vocab = build_vocab(data.split.train, cfg.hyperparams.min_frequency)
        hp, trials = grid_search(cfg.grid, cfg.hyperparams, data.split, vocab, data.table,
                                 budget_fraction=cfg.grid_budget_fraction, expected_runs=cfg.grid_runs,
                                 single_root=cfg.single_root, punct=cfg.punct)
        best[lang.code] = hp
        gdir = out / "grid"
        gdir.mkdir(parents=True, exist_ok=True)
        record = {
            "best": hp.to_dict(),
            "trials": [
                {"learning_rate": t.learning_rate, "decay_rate": t.decay_rate, "decay_steps": t.decay_steps,
                 "dev_uas": r.uas, "dev_las": r.las, "best_epoch": r.best_epoch}
                for t, r in trials
            ],
        }
        (gdir / f"{lang.code}.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return best
