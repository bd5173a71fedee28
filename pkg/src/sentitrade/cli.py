"""Command-line front end.

Subcommands mirror the pipeline stages: build-datasets, label-qa, train,
finalize, backtest. Configuration comes from a plain key=value file plus
flag overrides (flags win); every run is deterministic given its inputs and
the single seed. Exit codes: 0 success, 2 input/config error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import urllib.parse
import urllib.request
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import backtest as bt
from . import corpus, labeling
from .core import DatasetVariant, SentimentClass, SentitradeError, parse_iso_date
from .models import ModelFamily, NonConvergence
from .selection import (
    GridDefinition,
    Metric,
    Vectorizer,
    compare_equal_weighting,
    cross_validate,
    grid_search,
    load_model,
    objective,
    save_model,
    select_best_cell,
    train_final,
)
from .selection.persistence import _spec_from_doc, _spec_to_doc

DEFAULT_SEED = 42
DEFAULT_SVD_K = 100
DEFAULT_FOLDS = 10
DEFAULT_MIN_ARTICLES = (0, 50, 100, 150, 200)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGENCE = 3


class ConfigError(SentitradeError):
    """Bad or missing configuration."""


@dataclass
class RunConfig:
    articles: str | None = None
    responses: str | None = None
    prices: str | None = None
    companies: str | None = None
    model_dir: str = "models"
    out: str = "out"
    datasets_dir: str | None = None  # defaults to out
    labels_dir: str | None = None  # defaults to out
    manifest: str | None = None  # defaults to out/selection_manifest.json
    seed: int = DEFAULT_SEED
    jobs: int = 0  # 0 -> available cores
    svd_k: int = DEFAULT_SVD_K
    folds: int = DEFAULT_FOLDS
    metric: str = "eq1"
    vectorizers: tuple[str, ...] = ("bigram", "unigram")
    svd: tuple[str, ...] = ("off", "on")
    families: tuple[str, ...] = ("logreg", "mnb", "rbf_svm", "kmeans")
    min_articles: tuple[int, ...] = DEFAULT_MIN_ARTICLES
    start: str | None = None
    end: str | None = None
    benchmarks: tuple[str, ...] = ()
    chart_tickers: tuple[str, ...] = ()
    grid_logreg_C: tuple[float, ...] | None = None
    grid_mnb_alpha: tuple[float, ...] | None = None
    grid_svm_C: tuple[float, ...] | None = None
    grid_svm_gamma: tuple[float, ...] | None = None
    grid_kmeans_n: tuple[int, ...] | None = None
    force: bool = False
    fetch_endpoint: str | None = None
    fetch_from: str | None = None
    fetch_to: str | None = None

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def out_dir(self) -> Path:
        return Path(self.out)

    def datasets_path(self) -> Path:
        return Path(self.datasets_dir) if self.datasets_dir else self.out_dir()

    def labels_path(self) -> Path:
        return Path(self.labels_dir) if self.labels_dir else self.out_dir()

    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else self.out_dir() / "selection_manifest.json"

    def grid(self) -> GridDefinition:
        defaults = GridDefinition()
        return GridDefinition(
            logreg_C=self.grid_logreg_C or defaults.logreg_C,
            mnb_alpha=self.grid_mnb_alpha or defaults.mnb_alpha,
            svm_C=self.grid_svm_C or defaults.svm_C,
            svm_gamma=self.grid_svm_gamma or defaults.svm_gamma,
            kmeans_n=self.grid_kmeans_n or defaults.kmeans_n,
        )

    def preprocessings(self) -> list[tuple[Vectorizer, bool]]:
        vecs = [Vectorizer(v) for v in self.vectorizers]
        flags = [s == "on" for s in self.svd]
        return [(vec, flag) for flag in flags for vec in vecs]

    def family_list(self) -> list[ModelFamily]:
        return [ModelFamily(f) for f in self.families]

    def metric_enum(self) -> Metric:
        return Metric.from_text(self.metric)


_LIST_KEYS = {
    "vectorizers": str,
    "svd": str,
    "families": str,
    "benchmarks": str,
    "chart_tickers": str,
    "min_articles": int,
    "grid_logreg_C": float,
    "grid_mnb_alpha": float,
    "grid_svm_C": float,
    "grid_svm_gamma": float,
    "grid_kmeans_n": int,
}
_INT_KEYS = {"seed", "jobs", "svd_k", "folds"}
_CONFIG_ALIASES = {
    "grid.logreg.c": "grid_logreg_C",
    "grid.mnb.alpha": "grid_mnb_alpha",
    "grid.svm.c": "grid_svm_C",
    "grid.svm.gamma": "grid_svm_gamma",
    "grid.kmeans.n": "grid_kmeans_n",
}


def _parse_list(raw: str, cast) -> tuple:
    items = [part.strip() for part in raw.split(",") if part.strip()]
    try:
        return tuple(cast(item) for item in items)
    except ValueError as exc:
        raise ConfigError(f"bad list value {raw!r}: {exc}") from None


def load_config_file(path: str) -> dict:
    """Parse the key=value config format ('#' begins a comment line)."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        key = _CONFIG_ALIASES.get(key, key.replace("-", "_"))
        value = value.strip()
        if key not in RunConfig.__dataclass_fields__:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in _LIST_KEYS:
            values[key] = _parse_list(value, _LIST_KEYS[key])
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer") from None
        elif key == "force":
            values[key] = value.lower() in ("true", "1", "yes")
        else:
            values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(config, key, value)
    for key in RunConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None and flag != ():
            setattr(config, key, flag)
    return config


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        value = float(value)  # numpy scalars repr differently
        if value != value:
            return "nan"
        if value == float("inf"):
            return "inf"
        if value == float("-inf"):
            return "-inf"
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    import csv as _csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _require(config: RunConfig, attr: str, flag: str) -> str:
    value = getattr(config, attr)
    if not value:
        raise ConfigError(f"missing required input: set {flag} (flag) or {attr} (config key)")
    if attr in ("articles", "responses", "prices") and not Path(value).exists():
        raise ConfigError(f"{flag}: file not found: {value}")
    return value


def _http_transport(endpoint: str) -> corpus.Transport:
    def transport(request: corpus.FetchRequest) -> bytes:
        query = urllib.parse.urlencode(
            {"q": request.query_string, "day": request.day.isoformat(), "page": request.page}
        )
        with urllib.request.urlopen(f"{endpoint}?{query}") as response:  # noqa: S310
            return response.read()

    return transport


def _load_companies(path: str) -> list[tuple[str, str, str]]:
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("company_id", "name", "ticker") if c not in header]
        if missing:
            raise ConfigError(f"companies CSV lacks: {', '.join(missing)}")
        return [(row["company_id"], row["name"], row["ticker"]) for row in reader]


def cmd_build_datasets(config: RunConfig) -> int:
    records: list[corpus.ArticleRecord] = []
    if config.fetch_endpoint:
        companies = _load_companies(_require(config, "companies", "--companies"))
        if not config.fetch_from or not config.fetch_to:
            raise ConfigError("--fetch needs --fetch-from and --fetch-to dates")
        transport = _http_transport(config.fetch_endpoint)
        for company_id, name, ticker in companies:
            query = corpus.build_query(name, ticker, company_id=company_id)
            records.extend(
                corpus.fetch_articles(
                    query, parse_iso_date(config.fetch_from), parse_iso_date(config.fetch_to), transport
                )
            )
    if config.articles:
        with open(_require(config, "articles", "--articles"), "rb") as fh:
            records.extend(corpus.ingest_articles(fh))
    if not config.articles and not config.fetch_endpoint:
        raise ConfigError("build-datasets needs --articles (or --fetch)")
    unique = corpus.deduplicate(records)
    datasets = corpus.build_datasets(unique)
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    for variant, dataset in datasets.items():
        with open(out / f"{variant.value}.csv", "w", encoding="utf-8", newline="") as fh:
            corpus.write_dataset_csv(dataset, fh)
    print(f"ingested {len(records)} rows, {len(unique)} unique")
    for variant in DatasetVariant:
        print(f"{variant.value}.csv: {len(datasets[variant])} rows")
    return EXIT_OK


def _kappa_for_variant(responses: list[labeling.HitResponse]) -> tuple[str, str, int, int, int]:
    """(kappa, status, n_raters, used, skipped) for one variant's responses."""
    groups = labeling.group_by_sample(responses)
    sizes = sorted(len(g) for g in groups.values())
    modal = max(set(sizes), key=lambda s: (sizes.count(s), s))
    usable = {sid: g for sid, g in groups.items() if len(g) == modal}
    skipped = len(groups) - len(usable)
    if modal < 2:
        return "", "insufficient-raters", modal, len(usable), skipped
    kappa = labeling.fleiss_kappa(usable, modal)
    if kappa is None:
        return "", "degenerate", modal, len(usable), skipped
    return _fmt(kappa), "ok", modal, len(usable), skipped


def cmd_label_qa(config: RunConfig) -> int:
    with open(_require(config, "responses", "--responses"), "rb") as fh:
        responses = labeling.read_responses_csv(fh)
    if not responses:
        raise ConfigError("responses CSV has no data rows")
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)

    by_variant: dict[DatasetVariant, list[labeling.HitResponse]] = {}
    for resp in responses:
        by_variant.setdefault(resp.dataset_variant, []).append(resp)

    # Aggregated gold labels per variant.
    for variant in sorted(by_variant, key=lambda v: v.value):
        labels = labeling.aggregate_median(labeling.group_by_sample(by_variant[variant]))
        _write_csv(
            out / f"labels_{variant.value}.csv",
            ("sample_id", "label", "n_responses"),
            [(lab.sample_id, lab.label.text, lab.n_responses) for lab in labels],
        )

    # Worker statistics: global for the screener, per-variant for the
    # answer-time histograms.
    stats = labeling.worker_stats(responses)
    _write_csv(
        out / "worker_stats.csv",
        ("worker_id", "n_responses", "mean_work_time", "gold_accuracy"),
        [(s.worker_id, s.n_responses, s.mean_work_time, s.gold_accuracy) for s in stats],
    )
    time_rows = []
    for variant in sorted(by_variant, key=lambda v: v.value):
        for s in labeling.worker_stats(by_variant[variant]):
            time_rows.append((variant.value, s.worker_id, s.n_responses, s.mean_work_time))
    _write_csv(
        out / "worker_times.csv",
        ("dataset_variant", "worker_id", "n_responses", "mean_work_time"),
        time_rows,
    )

    answers: dict[str, list[SentimentClass]] = {}
    for resp in responses:
        answers.setdefault(resp.worker_id, []).append(resp.answer)
    _write_csv(
        out / "worker_answers.csv",
        ("worker_id", "negative", "neutral", "positive"),
        [(wid, *labeling.answer_distribution(answers[wid])) for wid in sorted(answers)],
    )

    flagged = labeling.screen_cheaters(stats)
    _write_csv(out / "cheaters.csv", ("worker_id",), [(wid,) for wid in flagged])

    kappa_rows = []
    for variant in sorted(by_variant, key=lambda v: v.value):
        kappa, status, n_raters, used, skipped = _kappa_for_variant(by_variant[variant])
        kappa_rows.append((variant.value, n_raters, used, skipped, kappa, status))
        shown = kappa if kappa else status
        print(f"kappa[{variant.value}] = {shown}")
    _write_csv(
        out / "kappa.csv",
        ("dataset_variant", "n_raters", "n_samples", "n_skipped", "kappa", "status"),
        kappa_rows,
    )

    dist_rows = []
    for variant in sorted(by_variant, key=lambda v: v.value):
        variant_responses = by_variant[variant]
        gold = {r.sample_id: r.gold_answer for r in variant_responses if r.is_gold}
        gold_counts = labeling.answer_distribution(gold.values())
        agg = labeling.aggregate_median(labeling.group_by_sample(variant_responses))
        agg_counts = labeling.answer_distribution(lab.label for lab in agg)
        dist_rows.append((variant.value, "gold", *gold_counts))
        dist_rows.append((variant.value, "aggregated", *agg_counts))
    _write_csv(
        out / "distributions.csv",
        ("dataset_variant", "source", "negative", "neutral", "positive"),
        dist_rows,
    )
    print(f"workers: {len(stats)}, flagged cheaters: {len(flagged)}")
    return EXIT_OK


def _load_labeled_dataset(config: RunConfig, variant: DatasetVariant) -> corpus.FeatureDataset:
    dataset_path = config.datasets_path() / f"{variant.value}.csv"
    labels_path = config.labels_path() / f"labels_{variant.value}.csv"
    if not dataset_path.exists():
        raise ConfigError(f"dataset file not found: {dataset_path} (run build-datasets first)")
    with open(dataset_path, "rb") as fh:
        dataset = corpus.read_dataset_csv(fh, variant)
    if all(row.label is not None for row in dataset.rows) and len(dataset.rows):
        return dataset
    if not labels_path.exists():
        raise ConfigError(f"labels file not found: {labels_path} (run label-qa first)")
    import csv as _csv

    with open(labels_path, encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        labels = {
            row["sample_id"]: SentimentClass.from_text(row["label"]) for row in reader
        }
    labeled = corpus.with_labels(dataset, labels)
    if not labeled.rows:
        raise ConfigError(f"{variant.value}: no dataset row matches a label sample_id")
    return labeled


_PREPROCESSING_ORDER = [
    (Vectorizer.UNIGRAM_BIGRAM, False),
    (Vectorizer.UNIGRAM_ONLY, False),
    (Vectorizer.UNIGRAM_BIGRAM, True),
    (Vectorizer.UNIGRAM_ONLY, True),
]


def _combo_label(vectorizer: Vectorizer, use_svd: bool) -> str:
    return f"{vectorizer.value}+svd" if use_svd else vectorizer.value


def _hyper_label(spec) -> str:
    parts = [f"{name}={_fmt(value)}" for name, value in spec.model.hyperparameters().items()]
    return " ".join(parts)


def cmd_train(config: RunConfig) -> int:
    metric = config.metric_enum()
    grid = config.grid()
    preprocessings = [p for p in _PREPROCESSING_ORDER if p in config.preprocessings()]
    if not preprocessings:
        raise ConfigError("no preprocessing combinations selected")
    families = config.family_list()
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)

    combos = [_combo_label(v, s) for v, s in preprocessings]
    grid_rows = []
    eq1_rows = []
    recall_rows = []
    weighting_rows = []
    final_rows = []
    manifest: dict = {
        "metric": metric.value,
        "seed": config.seed,
        "folds": config.folds,
        "svd_k": config.svd_k,
        "variants": {},
    }

    for variant in DatasetVariant:
        dataset = _load_labeled_dataset(config, variant)
        cells = grid_search(
            dataset,
            preprocessings,
            grid=grid,
            k=config.folds,
            seed=config.seed,
            metric=metric,
            svd_k=config.svd_k,
            jobs=config.effective_jobs(),
            families=families,
        )
        by_key = {(c.vectorizer, c.use_svd, c.family): c for c in cells}
        for family in families:
            row_grid = [variant.value, family.value]
            row_eq1: list = [variant.value, family.value]
            row_recall: list = [variant.value, family.value]
            for vec, use_svd in preprocessings:
                cell = by_key[(vec, use_svd, family)]
                if cell.best is None:
                    row_grid.append(f"n/a ({cell.error})")
                    row_eq1.extend(["", "", ""])
                    row_recall.extend(["", "", ""])
                else:
                    row_grid.append(_hyper_label(cell.best.spec))
                    row_eq1.extend(_fmt(x) for x in cell.best.eq1_mean)
                    row_recall.extend(_fmt(x) for x in cell.best.recall_mean)
            grid_rows.append(row_grid)
            eq1_rows.append(row_eq1)
            recall_rows.append(row_recall)

        best_cell = select_best_cell(cells, metric)
        best_spec = best_cell.best.spec
        chosen, plain_score, weighted_score = compare_equal_weighting(
            best_spec, dataset, seed=config.seed, metric=metric
        )
        weighting_rows.append(
            (
                variant.value,
                best_spec.model.family.value,
                best_spec.preprocessing_label(),
                plain_score,
                weighted_score,
                chosen.value,
            )
        )
        final_spec = replace(best_spec, model=replace(best_spec.model, class_weighting=chosen))
        final_report = cross_validate(final_spec, dataset, k=config.folds, seed=config.seed)
        final_rows.append(
            (
                variant.value,
                final_spec.model.family.value,
                final_spec.preprocessing_label(),
                _hyper_label(final_spec),
                chosen.value,
                *[_fmt(x) for x in final_report.eq1_mean],
                *[_fmt(x) for x in final_report.recall_mean],
            )
        )
        manifest["variants"][variant.value] = {
            "pipeline": _spec_to_doc(final_spec),
            "objective": objective(final_report, metric),
            "weighting_comparison": {
                "unweighted": plain_score,
                "weighted": weighted_score,
                "chosen": chosen.value,
            },
        }
        print(
            f"{variant.value}: {final_spec.model.family.value} "
            f"[{final_spec.preprocessing_label()}] objective={objective(final_report, metric)!r}"
        )

    _write_csv(out / "grid_hyperparameters.csv", ["variant", "model_class", *combos], grid_rows)
    score_header = ["variant", "model_class"]
    for combo in combos:
        score_header += [f"{combo} negative", f"{combo} neutral", f"{combo} positive"]
    _write_csv(out / "cv_scores_eq1.csv", score_header, eq1_rows)
    _write_csv(out / "cv_scores_recall.csv", score_header, recall_rows)
    _write_csv(
        out / "weighting_comparison.csv",
        ("variant", "model_class", "preprocessing", "unweighted", "weighted", "chosen"),
        weighting_rows,
    )
    _write_csv(
        out / "final_models.csv",
        (
            "variant",
            "model_class",
            "preprocessing",
            "hyperparameters",
            "weighting",
            "eq1 negative",
            "eq1 neutral",
            "eq1 positive",
            "recall negative",
            "recall neutral",
            "recall positive",
        ),
        final_rows,
    )
    manifest_path = config.manifest_path()
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_finalize(config: RunConfig) -> int:
    manifest_path = config.manifest_path()
    if not manifest_path.exists():
        raise ConfigError(f"selection manifest not found: {manifest_path} (run train first)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    model_dir = Path(config.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    for variant in DatasetVariant:
        entry = manifest["variants"].get(variant.value)
        if entry is None:
            raise ConfigError(f"manifest has no entry for variant {variant.value}")
        spec = _spec_from_doc(entry["pipeline"])
        target = model_dir / f"{variant.value}.model"
        if target.exists() and not config.force:
            raise ConfigError(f"{target} exists; pass --force to overwrite")
        dataset = _load_labeled_dataset(config, variant)
        pipeline = train_final(spec, dataset)
        save_model(pipeline, target)
        print(f"wrote {target}")
    return EXIT_OK


def cmd_backtest(config: RunConfig) -> int:
    model_dir = Path(config.model_dir)
    pipelines = {}
    for variant in DatasetVariant:
        path = model_dir / f"{variant.value}.model"
        if not path.exists():
            raise ConfigError(f"model file not found: {path} (run finalize first)")
        pipelines[variant] = load_model(path)

    with open(_require(config, "articles", "--articles"), "rb") as fh:
        records = corpus.deduplicate(corpus.ingest_articles(fh))
    if not records:
        raise ConfigError("articles CSV has no data rows")
    with open(_require(config, "prices", "--prices"), "rb") as fh:
        prices = bt.read_prices_csv(fh)
    if not prices:
        raise ConfigError("price CSV has no data rows")

    signals = bt.build_signals(pipelines, records)
    if config.start:
        start = parse_iso_date(config.start)
    else:
        start = min(d for s in prices.values() for d in s.dates)
    if config.end:
        end = parse_iso_date(config.end)
    else:
        end = max(d for s in prices.values() for d in s.dates)

    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    distribution_rows = []
    report_doc: dict = {"start": start.isoformat(), "end": end.isoformat(), "runs": []}
    for threshold in config.min_articles:
        try:
            report = bt.run_report(prices, signals, threshold, start, end, config.benchmarks)
        except bt.EmptyReport:
            summary_rows.append((threshold, 0, "", "", "", "", "", ""))
            report_doc["runs"].append({"min_articles": threshold, "n_assets": 0})
            continue
        s = report.summary
        summary_rows.append(
            (threshold, report.n_assets, s.avg_roi, s.max_win, s.max_loss, s.avg_win, s.avg_loss, s.wl_ratio)
        )
        for ticker in sorted(report.asset_rois):
            distribution_rows.append((threshold, ticker, report.asset_rois[ticker]))
        report_doc["runs"].append(
            {
                "min_articles": threshold,
                "n_assets": report.n_assets,
                "avg_roi": s.avg_roi,
                "max_win": s.max_win,
                "max_loss": s.max_loss,
                "avg_win": s.avg_win,
                "avg_loss": s.avg_loss,
                "wl_ratio": None if s.wl_ratio is None else (s.wl_ratio if s.wl_ratio != float("inf") else "inf"),
                "n_winners": s.n_winners,
                "n_losers": s.n_losers,
                "asset_rois": {t: report.asset_rois[t] for t in sorted(report.asset_rois)},
                "benchmarks": report.benchmarks,
            }
        )
        print(f"min_articles={threshold}: {report.n_assets} assets, avg ROI {s.avg_roi!r}")

    benchmark_rows = []
    for ticker in config.benchmarks:
        if ticker not in prices:
            raise ConfigError(f"benchmark ticker {ticker} not in the price CSV")
        benchmark_rows.append((ticker, bt.benchmark_roi(prices[ticker], start, end)))
    report_doc["benchmarks"] = {t: roi for t, roi in benchmark_rows}

    _write_csv(
        out / "backtest_summary.csv",
        ("min_articles", "n_assets", "avg_roi", "max_win", "max_loss", "avg_win", "avg_loss", "wl_ratio"),
        summary_rows,
    )
    if benchmark_rows:
        _write_csv(out / "benchmarks.csv", ("ticker", "roi"), benchmark_rows)
    _write_csv(out / "roi_distribution.csv", ("min_articles", "ticker", "roi"), distribution_rows)

    signal_by_ticker = {signal.ticker: signal for signal in signals.values()}
    for ticker in config.chart_tickers:
        if ticker not in prices or ticker not in signal_by_ticker:
            raise ConfigError(f"chart ticker {ticker} needs both prices and signals")
        rows = bt.emit_chart_data(prices[ticker], signal_by_ticker[ticker], start, end)
        _write_csv(
            out / f"chart_{ticker}.csv",
            ("date", "scaled_close", "scaled_sentiment"),
            [(d.isoformat(), c, s) for d, c, s in rows],
        )

    (out / "backtest_report.json").write_text(
        json.dumps(report_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 42)")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads (default: cores)")
    parser.add_argument("--out", default=None, help="output directory (default ./out)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentitrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-datasets", help="ingest articles and write the four text datasets")
    _add_common(p)
    p.add_argument("--articles", default=None, help="article CSV path")
    p.add_argument("--fetch", dest="fetch_endpoint", default=None, help="fetch endpoint URL (network)")
    p.add_argument("--companies", default=None, help="company list CSV (company_id,name,ticker)")
    p.add_argument("--fetch-from", dest="fetch_from", default=None)
    p.add_argument("--fetch-to", dest="fetch_to", default=None)

    p = sub.add_parser("label-qa", help="aggregate labels and emit the QA report")
    _add_common(p)
    p.add_argument("--responses", default=None, help="worker response CSV path")

    p = sub.add_parser("train", help="grid search + cross-validated model selection")
    _add_common(p)
    p.add_argument("--datasets-dir", dest="datasets_dir", default=None)
    p.add_argument("--labels-dir", dest="labels_dir", default=None)
    p.add_argument("--svd-k", dest="svd_k", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--metric", choices=("eq1", "standard-recall"), default=None)

    p = sub.add_parser("finalize", help="retrain the selected pipelines on all data and persist them")
    _add_common(p)
    p.add_argument("--datasets-dir", dest="datasets_dir", default=None)
    p.add_argument("--labels-dir", dest="labels_dir", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--model-dir", dest="model_dir", default=None)
    p.add_argument("--force", action="store_true", default=None)

    p = sub.add_parser("backtest", help="run the trading simulation from persisted models")
    _add_common(p)
    p.add_argument("--articles", default=None)
    p.add_argument("--prices", default=None)
    p.add_argument("--model-dir", dest="model_dir", default=None)
    p.add_argument("--min-articles", dest="min_articles", default=None, help="comma list of thresholds")
    p.add_argument("--start", default=None)
    p.add_argument("--end", default=None)
    p.add_argument("--benchmarks", default=None, help="comma list of benchmark tickers")
    p.add_argument("--chart-tickers", dest="chart_tickers", default=None, help="comma list of tickers")
    return parser


_COMMANDS = {
    "build-datasets": cmd_build_datasets,
    "label-qa": cmd_label_qa,
    "train": cmd_train,
    "finalize": cmd_finalize,
    "backtest": cmd_backtest,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    # Comma-list flags arrive as strings; normalize before merging.
    for key, cast in _LIST_KEYS.items():
        value = getattr(args, key, None)
        if isinstance(value, str):
            setattr(args, key, _parse_list(value, cast))
    try:
        config = build_config(args)
        return _COMMANDS[args.command](config)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (SentitradeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
