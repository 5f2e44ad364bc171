"""Report bundle: score tables, RER, MATTR, scaling fits, LRTs and plot data.

``emit_report`` is a pure function from the results store (plus per-language
metadata) to a mapping of file name -> text, so identical inputs always
produce byte-identical bundles.

Plot-data files are tab-separated with a header row:

* ``rer_by_size_<metric>.tsv``  language, train_sentences, log10_train, model, rer
* ``scaling_fit_<model>_<metric>.tsv``  kind (point|curve), language, log10_train, rer
* ``partial_mattr_<model>_<metric>.tsv``  kind (point|line), language, mattr_resid, rer_resid
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..metrics import relative_error_rate, zscore
from ..scaling import (
    ScalingObservation,
    crossover,
    fit_mixed_model,
    likelihood_ratio_test,
    partial_regression,
    spearman,
)
from .store import METRICS, ResultsStore, fmt


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class LanguageInfo:
    code: str
    train_sentences: int | None = None
    mattr: float | None = None
    tokens: int | None = None


def _csv(rows, header, delimiter=",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _language_order(codes, info: dict[str, LanguageInfo]):
    def key(code):
        n = info.get(code).train_sentences if code in info else None
        return (0 if n is not None else 1, -(n or 0), code)
    return sorted(codes, key=key)


def compute_rer(store: ResultsStore, baseline: str, metric: str, languages=None) -> dict:
    """{(language, model): rer} for every non-baseline model with a score."""
    recs = store.lookup()
    langs = sorted({k[0] for k in recs if k[2] == metric}) if languages is None else list(languages)
    models = sorted({k[1] for k in recs if k[2] == metric and k[1] != baseline})
    missing = sorted(l for l in langs
                     if any((l, m, metric) in recs for m in models) and (l, baseline, metric) not in recs)
    if missing:
        raise ReportError(f"baseline {baseline!r} has no {metric} score for: {', '.join(missing)}")
    out = {}
    for lang in langs:
        if (lang, baseline, metric) not in recs:
            continue
        base = recs[(lang, baseline, metric)].mean
        for model in models:
            rec = recs.get((lang, model, metric))
            if rec is not None and not math.isnan(rec.mean):
                out[(lang, model)] = relative_error_rate(base, rec.mean)
    return out


def scaling_observations(store: ResultsStore, baseline: str, model: str, metric: str,
                         info: dict[str, LanguageInfo], mattr_z: dict[str, float]) -> list[ScalingObservation]:
    """One RER observation per paired seed when both models have per-seed
    scores, otherwise one per language from the means."""
    recs = store.lookup()
    seeds = store.per_seed()
    obs = []
    for lang in sorted(info):
        n = info[lang].train_sentences
        if n is None or (lang, baseline, metric) not in recs or (lang, model, metric) not in recs:
            continue
        log_train = math.log10(n)
        z = mattr_z.get(lang, 0.0)
        bs = seeds.get((lang, baseline, metric), {})
        cs = seeds.get((lang, model, metric), {})
        shared = sorted(set(bs) & set(cs))
        if shared:
            for s in shared:
                obs.append(ScalingObservation(lang, log_train, relative_error_rate(bs[s], cs[s]), z,
                                              metric, model, s))
        else:
            rer = relative_error_rate(recs[(lang, baseline, metric)].mean, recs[(lang, model, metric)].mean)
            obs.append(ScalingObservation(lang, log_train, rer, z, metric, model))
    return obs


def emit_report(store: ResultsStore, languages: list[LanguageInfo] | None = None,
                options: dict | None = None, baseline: str = "biaffine-lstm") -> dict[str, str]:
    options = options or {}
    info = {l.code: l for l in (languages or [])}
    bundle: dict[str, str] = {}

    records = store.records()
    bundle["attachment_scores.csv"] = _csv(
        [[r.language, r.model, r.metric, fmt(r.mean, 2), fmt(r.sd, 2), len(r.values) or ""] for r in records],
        ["language", "model", "metric", "mean", "sd", "n_seeds"],
    )

    if options.get("rer"):
        long_rows = []
        for metric in METRICS:
            rer = compute_rer(store, baseline, metric)
            if not rer:
                continue
            models = sorted({m for _, m in rer})
            langs = _language_order({l for l, _ in rer}, info)
            wide = [[l] + [fmt(rer.get((l, m)), 3) if (l, m) in rer else "" for m in models] for l in langs]
            bundle[f"rer_{metric.lower()}.csv"] = _csv(wide, ["language", *models])
            long_rows += [[l, m, metric, fmt(rer[(l, m)], 6)] for l in langs for m in models if (l, m) in rer]
        bundle["rer.csv"] = _csv(long_rows, ["language", "comparison_model", "metric", "rer"])

    mattr_z: dict[str, float] = {}
    with_mattr = [l for l in _language_order(info, info) if info[l].mattr is not None]
    if len(with_mattr) >= 2:
        zs = zscore([info[l].mattr for l in with_mattr])
        mattr_z = {l: s.z for l, s in zip(with_mattr, zs)}
    if options.get("mattr") and with_mattr:
        order = sorted(with_mattr, key=lambda l: -info[l].mattr)
        window = options["mattr"].get("window", 500) if isinstance(options["mattr"], dict) else 500
        bundle["mattr.csv"] = _csv(
            [[l, info[l].tokens if info[l].tokens is not None else "", window, fmt(info[l].mattr, 3),
              fmt(mattr_z[l], 3) if l in mattr_z else ""] for l in order],
            ["language", "tokens", "window", "mattr", "z"],
        )

    scaling = options.get("scaling")
    want_lrt = bool(options.get("lrt"))
    if scaling or want_lrt:
        sc = scaling if isinstance(scaling, dict) else {}
        metrics = [m.upper() for m in sc.get("metrics", METRICS)]
        all_models = sorted({r.model for r in records if r.model != baseline})
        models = sc.get("models", all_models)
        method = sc.get("method", "ML" if want_lrt else "REML")
        fit_lines, cross_rows, lrt_rows, rho_rows = [], [], [], []
        for model in models:
            for metric in metrics:
                obs = scaling_observations(store, baseline, model, metric, info, mattr_z)
                if len({o.language for o in obs}) < 3:
                    continue
                fit_lines.append(f"[{model} {metric}]")
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        fit = fit_mixed_model(obs, ["log_train"], method=method)
                except (ValueError, RuntimeError) as exc:
                    fit_lines += [f"error: {exc}", ""]
                    cross_rows.append([model, metric, "NA", "NA"])
                    if want_lrt:
                        lrt_rows.append([model, metric, "NA", 1, "NA", "NA", "NA"])
                    continue
                fit_lines.append(fit.summary())
                try:
                    cx = crossover(fit)
                    cross_rows.append([model, metric, fmt(cx.log10_sentences, 3), cx.sentences])
                    fit_lines.append(f"crossover.log10_sentences: {cx.log10_sentences:.6f}")
                    fit_lines.append(f"crossover.sentences: {cx.sentences}")
                except ValueError as exc:
                    cross_rows.append([model, metric, "NA", "NA"])
                    fit_lines.append(f"crossover: none ({exc})")
                fit_lines.append("")
                by_lang: dict[str, list[float]] = {}
                for o in obs:
                    by_lang.setdefault(o.language, []).append(o.rer)
                langs = sorted(by_lang)
                try:
                    rho = spearman([info[l].train_sentences for l in langs],
                                   [float(np.mean(by_lang[l])) for l in langs])
                    rho_rows.append([model, metric, fmt(rho.rho, 3), fmt(rho.p_value, 3), rho.n])
                except ValueError:
                    pass
                if want_lrt and mattr_z:
                    try:
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore")
                            null = fit_mixed_model(obs, ["log_train"], method="ML")
                            alt = fit_mixed_model(obs, ["log_train", "mattr_z"], method="ML")
                        lrt = likelihood_ratio_test(null, alt)
                        b = alt.params["mattr_z"]
                        p_b = float(alt.p_values[alt.names.index("mattr_z")])
                        lrt_rows.append([model, metric, fmt(lrt.chi2, 3), lrt.df, fmt(lrt.p_value, 3),
                                         fmt(b, 3), fmt(p_b, 3)])
                    except (ValueError, RuntimeError):
                        lrt_rows.append([model, metric, "NA", 1, "NA", "NA", "NA"])
                if options.get("plots"):
                    pts = [["point", o.language, fmt(o.log_train, 6), fmt(o.rer, 6)] for o in obs]
                    lo = min(o.log_train for o in obs)
                    hi = max(o.log_train for o in obs)
                    curve = [["curve", "", fmt(x, 6), fmt(fit.predict(log_train=x), 6)]
                             for x in np.linspace(lo, hi, 50)]
                    bundle[f"plots/scaling_fit_{model}_{metric.lower()}.tsv"] = _csv(
                        pts + curve, ["kind", "language", "log10_train", "rer"], "\t")
                    if mattr_z:
                        try:
                            pr = partial_regression(obs, "mattr_z", ["log_train"])
                        except ValueError:
                            continue
                        rows = [["point", o.language, fmt(x, 6), fmt(y, 6)]
                                for o, (x, y) in zip(obs, pr.pairs)]
                        xs = [x for x, _ in pr.pairs]
                        rows += [["line", "", fmt(x, 6), fmt(pr.slope * x, 6)] for x in (min(xs), max(xs))]
                        bundle[f"plots/partial_mattr_{model}_{metric.lower()}.tsv"] = _csv(
                            rows, ["kind", "language", "mattr_resid", "rer_resid"], "\t")
        if scaling:
            bundle["scaling_fits.txt"] = "\n".join(fit_lines)
            bundle["crossovers.csv"] = _csv(cross_rows, ["model", "metric", "log10_train", "sentences"])
            bundle["spearman.csv"] = _csv(rho_rows, ["model", "metric", "rho", "p_value", "n"])
        if want_lrt:
            bundle["lrt.csv"] = _csv(lrt_rows, ["model", "metric", "chi2", "df", "p_value",
                                                "beta_mattr_z", "p_beta_mattr_z"])

    if options.get("plots"):
        for metric in METRICS:
            try:
                rer = compute_rer(store, baseline, metric)
            except ReportError:
                continue
            rows = []
            for (lang, model), v in sorted(rer.items()):
                n = info[lang].train_sentences if lang in info else None
                rows.append([lang, n if n is not None else "", fmt(math.log10(n), 6) if n else "", model, fmt(v, 6)])
            if rows:
                bundle[f"plots/rer_by_size_{metric.lower()}.tsv"] = _csv(
                    rows, ["language", "train_sentences", "log10_train", "model", "rer"], "\t")
    return dict(sorted(bundle.items()))


def write_bundle(bundle: dict[str, str], directory) -> None:
    root = Path(directory)
    for name, text in bundle.items():
        p = root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
