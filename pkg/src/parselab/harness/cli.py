"""Command-line front door: ``parselab <subcommand> [options]``.

Exit status is 0 on success; failures print one JSON line
``{"error": <type>, "message": <text>}`` to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from ..metrics import evaluate, mattr, zscore
from ..treebank import read_conllu, write_conllu
from .config import ExperimentConfig, load_config
from .experiment import language_mattr, load_language, run_experiment, run_grid_search, train_sentence_count
from .report import LanguageInfo, emit_report, write_bundle
from .store import ResultsStore, ingest_external_scores


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "punct", None):
        cfg.punct = args.punct
    if getattr(args, "single_root", None):
        cfg.single_root = args.single_root == "on"
    if getattr(args, "out", None):
        cfg.output_dir = Path(args.out)
    return cfg


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ValueError("--config is required for this command")
    return _apply_overrides(load_config(args.config), args)


def collect_language_info(cfg: ExperimentConfig, window: int = 500) -> list[LanguageInfo]:
    out = []
    for lang in cfg.languages:
        value, tokens = language_mattr(lang, cfg, window)
        out.append(LanguageInfo(lang.code, train_sentence_count(lang, cfg), value, tokens))
    return out


def _store_for(cfg: ExperimentConfig | None, out: Path) -> ResultsStore:
    store = ResultsStore.load(out)
    if cfg is not None:
        have = {r.key for r in store.external}
        for path in cfg.external_scores:
            new = [r for r in ingest_external_scores(path) if r.key not in have]
            store.add_external(new)
    return store


def cmd_train(args):
    cfg = _config(args)
    seeds = [args.seed] if args.seed is not None else None
    store = run_experiment(cfg, seeds=seeds, out_dir=cfg.output_dir)
    for rec in store.records():
        if rec.source == "runs":
            print(f"{rec.language}\t{rec.model}\t{rec.metric}\t{rec.mean:.2f} +- {rec.sd:.2f}")


def cmd_grid_search(args):
    cfg = _config(args)
    best = run_grid_search(cfg, cfg.output_dir)
    for code, hp in best.items():
        print(f"{code}\tlearning_rate={hp.learning_rate}\tdecay_rate={hp.decay_rate}\tdecay_steps={hp.decay_steps}")


def cmd_evaluate(args):
    if args.gold and args.pred:
        gold = read_conllu(args.gold)
        pred = read_conllu(args.pred)
        score = evaluate(gold, [(s.heads, s.deprels) for s in pred], punct=args.punct or "include")
    else:
        from ..parser.checkpoint import load_checkpoint
        from ..parser.model import predict

        cfg = _config(args)
        if not args.checkpoint or not args.language:
            raise ValueError("evaluate needs --gold/--pred or --config with --checkpoint and --language")
        data = load_language(cfg.language(args.language), cfg)
        params, hp, vocab, _ = load_checkpoint(args.checkpoint)
        preds = predict(data.split.test, params, vocab, data.table, cfg.single_root)
        score = evaluate(data.split.test, preds, punct=cfg.punct)
        out = cfg.output_dir / "predictions"
        out.mkdir(parents=True, exist_ok=True)
        write_conllu(out / f"{args.language}.conllu",
                     [s.with_predictions(h, r) for s, (h, r) in zip(data.split.test, preds)])
    print(f"UAS\t{score.uas:.2f}\nLAS\t{score.las:.2f}\ntokens\t{score.token_count}")


def cmd_ingest_scores(args):
    out = Path(args.out or (load_config(args.config).output_dir if args.config else "results"))
    store = ResultsStore.load(out)
    manifest_path = out / "ingest_manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else []
    total = 0
    for path in args.files:
        recs = ingest_external_scores(path)
        store.add_external(recs)
        total += len(recs)
        manifest.append({"file": str(path), "sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest(),
                         "records": len(recs)})
    store.save(out)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"ingested {total} records into {out}")


def _report_inputs(args):
    cfg = load_config(args.config) if args.config else None
    if cfg is not None:
        _apply_overrides(cfg, args)
    out = Path(args.out) if args.out else (cfg.output_dir if cfg else Path("results"))
    store = _store_for(cfg, out)
    window = int((cfg.analysis.get("mattr") or {}).get("window", 500)) if cfg and isinstance(
        cfg.analysis.get("mattr"), dict) else 500
    info = collect_language_info(cfg, window) if cfg else []
    baseline = args.baseline or (cfg.baseline_model if cfg else "biaffine-lstm")
    return cfg, out, store, info, baseline


def cmd_rer(args):
    cfg, out, store, info, baseline = _report_inputs(args)
    bundle = emit_report(store, info, {"rer": True}, baseline)
    bundle.pop("attachment_scores.csv")
    write_bundle(bundle, out / "report")
    for name in ("rer_las.csv", "rer_uas.csv"):
        if name in bundle:
            print(f"# {name}")
            print(bundle[name], end="")


def cmd_mattr(args):
    if args.files:
        forms_by = {Path(f).stem: [w for s in read_conllu(f) for w in s.forms] for f in args.files}
        scores = {k: mattr(v, args.window, k) for k, v in forms_by.items()}
        zs = zscore([s.value for s in scores.values()]) if len(scores) > 1 else None
        print("language\ttokens\tmattr\tz")
        for i, (k, s) in enumerate(scores.items()):
            z = f"{zs[i].z:.3f}" if zs else ""
            print(f"{k}\t{s.token_count}\t{s.value:.3f}\t{z}")
        return
    cfg, out, store, _, baseline = _report_inputs(args)
    info = collect_language_info(cfg, args.window)
    bundle = emit_report(store, info, {"mattr": {"window": args.window}}, baseline)
    write_bundle({"mattr.csv": bundle["mattr.csv"]}, out / "report")
    print(bundle["mattr.csv"], end="")


def cmd_scaling_fit(args):
    cfg, out, store, info, baseline = _report_inputs(args)
    opts = {"scaling": (cfg.analysis.get("scaling") if cfg and cfg.analysis.get("scaling") else True),
            "lrt": True}
    bundle = emit_report(store, info, opts, baseline)
    bundle.pop("attachment_scores.csv")
    write_bundle(bundle, out / "report")
    for name in ("crossovers.csv", "lrt.csv", "spearman.csv", "scaling_fits.txt"):
        if name in bundle:
            print(f"# {name}")
            print(bundle[name], end="" if bundle[name].endswith("\n") else "\n")


def cmd_report(args):
    cfg, out, store, info, baseline = _report_inputs(args)
    opts = dict(cfg.analysis) if cfg else {}
    bundle = emit_report(store, info, opts, baseline)
    write_bundle(bundle, out / "report")
    for name in bundle:
        print(out / "report" / name)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parselab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config (YAML)")
        sp.add_argument("--out", help="output / results directory")
        sp.add_argument("--punct", choices=["include", "exclude"])
        sp.add_argument("--single-root", choices=["on", "off"])
        return sp

    sp = common(sub.add_parser("train", help="train and evaluate every language x seed"))
    sp.add_argument("--seed", type=int, help="run only this seed")
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("grid-search", help="hyperparameter grid per language"))
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_grid_search)

    sp = common(sub.add_parser("evaluate", help="score predictions or a checkpoint"))
    sp.add_argument("--gold")
    sp.add_argument("--pred")
    sp.add_argument("--checkpoint")
    sp.add_argument("--language")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_evaluate)

    sp = common(sub.add_parser("ingest-scores", help="merge external score CSVs into the store"))
    sp.add_argument("files", nargs="+")
    sp.set_defaults(func=cmd_ingest_scores)

    for name, func, helptext in (("rer", cmd_rer, "relative error rate tables"),
                                 ("scaling-fit", cmd_scaling_fit, "mixed-model scaling fits, LRTs, crossovers"),
                                 ("report", cmd_report, "full report bundle")):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--baseline")
        sp.add_argument("--seed", type=int)
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("mattr", help="MATTR and z-scores"))
    sp.add_argument("files", nargs="*", help="CoNLL-U training files (instead of --config)")
    sp.add_argument("--window", type=int, default=500)
    sp.add_argument("--baseline")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_mattr)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
