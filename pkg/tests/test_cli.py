"""The five subcommands end to end on small synthetic worlds."""

import csv
import json
from datetime import date
from pathlib import Path

import numpy as np
import pytest

import synthetic
from sentitrade.cli import main
from sentitrade.core import DatasetVariant, SentimentClass
from sentitrade.corpus import DatasetRow, FeatureDataset
from sentitrade.models import ModelFamily, ModelSpec
from sentitrade.selection import PipelineSpec, Vectorizer, save_model, train_final

D0 = date(2020, 3, 9)


def read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


class TestBuildDatasets:
    def test_three_articles_four_files(self, tmp_path, capsys):
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(
            articles,
            [("acme", "ACM", D0, 2), ("acme", "ACM", D0, 0), ("bight", "BGT", D0, 1)],
        )
        out = tmp_path / "out"
        assert main(["build-datasets", "--articles", str(articles), "--out", str(out)]) == 0
        for variant in ("title", "description", "content", "combination"):
            assert len(read_csv(out / f"{variant}.csv")) == 3
        assert "3 unique" in capsys.readouterr().out

    def test_duplicates_reported(self, tmp_path, capsys):
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(articles, [("acme", "ACM", D0, 2)])
        text = articles.read_text()
        data_line = text.splitlines()[1]
        articles.write_text(text + data_line + "\n")
        out = tmp_path / "out"
        assert main(["build-datasets", "--articles", str(articles), "--out", str(out)]) == 0
        assert "ingested 2 rows, 1 unique" in capsys.readouterr().out

    def test_missing_column_exits_two(self, tmp_path):
        bad = tmp_path / "articles.csv"
        bad.write_text("company_id,title\nacme,hello\n")
        assert main(["build-datasets", "--articles", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main(["build-datasets", "--articles", str(tmp_path / "nope.csv")]) == 2


def build_world(tmp_path, plan, seed=0):
    articles = tmp_path / "articles.csv"
    synthetic.write_articles(articles, plan, seed=seed)
    out = tmp_path / "out"
    assert main(["build-datasets", "--articles", str(articles), "--out", str(out)]) == 0
    return articles, out


class TestLabelQa:
    def test_unanimous_fixture_kappa_one(self, tmp_path, capsys):
        plan = [("acme", "ACM", D0, cls) for cls in (0, 1, 2, 2, 0)]
        _, out = build_world(tmp_path, plan)
        responses = tmp_path / "responses.csv"
        synthetic.write_unanimous_responses(out, responses)
        assert main(["label-qa", "--responses", str(responses), "--out", str(out)]) == 0
        kappa_rows = {row["dataset_variant"]: row for row in read_csv(out / "kappa.csv")}
        for variant in ("title", "description", "content", "combination"):
            assert float(kappa_rows[variant]["kappa"]) == pytest.approx(1.0, abs=1e-12)
        labels = read_csv(out / "labels_title.csv")
        assert len(labels) == 5
        assert {row["label"] for row in labels} == {"negative", "neutral", "positive"}

    def test_screener_fixture_flags_exactly_one(self, tmp_path):
        plan = [("acme", "ACM", D0, 1)]
        _, out = build_world(tmp_path, plan)
        sample_id = synthetic.read_dataset_samples(out / "title.csv")[0][0]
        rows = []
        # two diligent workers, one fast-and-wrong cheater; gold everywhere
        for w, (seconds, accurate) in enumerate([(100.0, True), (100.0, True), (10.0, False)]):
            for g in range(10):
                answer = "neutral" if accurate or g >= 9 else "positive"
                rows.append(
                    (f"h{w}-{g}", sample_id, "title", f"worker{w}", answer, repr(seconds), "true", "neutral")
                )
        responses = tmp_path / "responses.csv"
        with open(responses, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ("hit_id", "sample_id", "dataset_variant", "worker_id", "answer", "work_time_seconds", "is_gold", "gold_answer")
            )
            writer.writerows(rows)
        assert main(["label-qa", "--responses", str(responses), "--out", str(out)]) == 0
        flagged = [row["worker_id"] for row in read_csv(out / "cheaters.csv")]
        assert flagged == ["worker2"]

    def test_empty_responses_exit_two(self, tmp_path):
        responses = tmp_path / "responses.csv"
        responses.write_text(
            "hit_id,sample_id,dataset_variant,worker_id,answer,work_time_seconds,is_gold,gold_answer\n"
        )
        assert main(["label-qa", "--responses", str(responses), "--out", str(tmp_path / "o")]) == 2


def trained_world(tmp_path, n_per_class=4, seed=0):
    """build-datasets + label-qa + a tiny-grid train, returning paths."""
    plan = []
    i = 0
    for cls in (0, 1, 2):
        for _ in range(n_per_class):
            plan.append((f"co{i % 3}", f"T{i % 3}", D0, cls))
            i += 1
    articles, out = build_world(tmp_path, plan, seed=seed)
    responses = tmp_path / "responses.csv"
    synthetic.write_unanimous_responses(out, responses)
    assert main(["label-qa", "--responses", str(responses), "--out", str(out)]) == 0
    config = tmp_path / "train.cfg"
    synthetic.write_config(
        config,
        seed=7,
        folds=3,
        svd_k=4,
        **{
            "grid.logreg.c": "1.0",
            "grid.mnb.alpha": "1.0",
            "grid.svm.c": "10.0",
            "grid.svm.gamma": "1.0",
            "grid.kmeans.n": "3",
        },
        families="logreg,mnb,kmeans",
        vectorizers="unigram",
        svd="off,on",
    )
    return articles, out, config


class TestTrain:
    def test_train_writes_tables_and_manifest(self, tmp_path):
        import time

        _, out, config = trained_world(tmp_path)
        started = time.perf_counter()
        assert main(["train", "--config", str(config), "--out", str(out)]) == 0
        assert time.perf_counter() - started < 60.0
        manifest = json.loads((out / "selection_manifest.json").read_text())
        assert sorted(manifest["variants"]) == ["combination", "content", "description", "title"]
        for entry in manifest["variants"].values():
            assert "pipeline" in entry and "objective" in entry
        grid_table = read_csv(out / "grid_hyperparameters.csv")
        # 4 variants x 3 families
        assert len(grid_table) == 12
        # MNB on the SVD combination is recorded as undefined, not fabricated
        mnb_rows = [row for row in grid_table if row["model_class"] == "mnb"]
        assert all("n/a" in row["unigram+svd"] for row in mnb_rows)
        assert (out / "cv_scores_eq1.csv").exists()
        assert (out / "cv_scores_recall.csv").exists()
        assert (out / "weighting_comparison.csv").exists()
        assert (out / "final_models.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        _, out, config = trained_world(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for target in (out_a, out_b):
            code = main(
                [
                    "train",
                    "--config",
                    str(config),
                    "--datasets-dir",
                    str(out),
                    "--labels-dir",
                    str(out),
                    "--out",
                    str(target),
                ]
            )
            assert code == 0
        for name in (
            "grid_hyperparameters.csv",
            "cv_scores_eq1.csv",
            "cv_scores_recall.csv",
            "weighting_comparison.csv",
            "final_models.csv",
            "selection_manifest.json",
        ):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_missing_datasets_exit_two(self, tmp_path):
        assert main(["train", "--out", str(tmp_path / "empty")]) == 2


class TestFinalize:
    def test_finalize_writes_models_and_respects_force(self, tmp_path):
        _, out, config = trained_world(tmp_path)
        assert main(["train", "--config", str(config), "--out", str(out)]) == 0
        model_dir = tmp_path / "models"
        args = [
            "finalize",
            "--config",
            str(config),
            "--out",
            str(out),
            "--model-dir",
            str(model_dir),
        ]
        assert main(args) == 0
        for variant in DatasetVariant:
            assert (model_dir / f"{variant.value}.model").exists()
        assert main(args) == 2  # refuses to overwrite
        assert main(args + ["--force"]) == 0

    def test_loaded_model_predicts(self, tmp_path):
        from sentitrade.selection import load_model

        _, out, config = trained_world(tmp_path)
        assert main(["train", "--config", str(config), "--out", str(out)]) == 0
        model_dir = tmp_path / "models"
        assert (
            main(
                [
                    "finalize",
                    "--config",
                    str(config),
                    "--out",
                    str(out),
                    "--model-dir",
                    str(model_dir),
                ]
            )
            == 0
        )
        pipeline = load_model(model_dir / "title.model")
        predictions = pipeline.predict_texts(["surge approval market", "plunge lawsuit market"])
        assert len(predictions) == 2

    def test_missing_manifest_exit_two(self, tmp_path):
        assert main(["finalize", "--out", str(tmp_path)]) == 2


def neutral_pipelines(model_dir: Path):
    """Persist four constant-neutral pipelines (one cluster, neutral data)."""
    rows = tuple(
        DatasetRow(f"s{i}", "c0", D0, text, SentimentClass.NEUTRAL if i else SentimentClass(i))
        for i, text in enumerate(["update meeting report"] * 8)
    )
    # one negative row so training has two classes where needed; kmeans with
    # a single cluster still maps to the neutral majority
    rows = (
        DatasetRow("s-neg", "c0", D0, "plunge lawsuit losses", SentimentClass.NEGATIVE),
    ) + rows[1:]
    model_dir.mkdir(parents=True, exist_ok=True)
    for variant in DatasetVariant:
        dataset = FeatureDataset(variant=variant, rows=rows)
        spec = PipelineSpec(
            dataset_variant=variant,
            vectorizer=Vectorizer.UNIGRAM_ONLY,
            use_svd=False,
            svd_k=None,
            model=ModelSpec(ModelFamily.KMEANS, n_clusters=1, seed=0),
        )
        save_model(train_final(spec, dataset), model_dir / f"{variant.value}.model")


def lexicon_pipelines(model_dir: Path, seed=5):
    """Persist four pipelines that recover the planted lexicon class."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(45):
        cls = i % 3
        rows.append(
            DatasetRow(
                f"s{i}", "c0", D0, synthetic.lexicon_text(cls, rng), SentimentClass(cls)
            )
        )
    model_dir.mkdir(parents=True, exist_ok=True)
    for variant in DatasetVariant:
        dataset = FeatureDataset(variant=variant, rows=tuple(rows))
        spec = PipelineSpec(
            dataset_variant=variant,
            vectorizer=Vectorizer.UNIGRAM_ONLY,
            use_svd=False,
            svd_k=None,
            model=ModelSpec(ModelFamily.LOGREG, C=10.0),
        )
        save_model(train_final(spec, dataset), model_dir / f"{variant.value}.model")


class TestBacktestCommand:
    def test_all_neutral_models_trade_nothing(self, tmp_path):
        model_dir = tmp_path / "models"
        neutral_pipelines(model_dir)
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(
            articles, [("acme", "ACM", synthetic.trading_week(D0, 3)[i], 2) for i in range(3)]
        )
        prices = tmp_path / "prices.csv"
        synthetic.write_prices(
            prices, {"ACM": [(d, 10.0 + i) for i, d in enumerate(synthetic.trading_week(D0, 3))]}
        )
        out = tmp_path / "out"
        code = main(
            [
                "backtest",
                "--articles",
                str(articles),
                "--prices",
                str(prices),
                "--model-dir",
                str(model_dir),
                "--out",
                str(out),
                "--min-articles",
                "0",
            ]
        )
        assert code == 0
        summary = read_csv(out / "backtest_summary.csv")
        assert summary[0]["avg_roi"] == "0.0"
        report = json.loads((out / "backtest_report.json").read_text())
        assert report["runs"][0]["asset_rois"]["ACM"] == 0.0

    def test_hand_scripted_two_trip_scenario(self, tmp_path):
        model_dir = tmp_path / "models"
        lexicon_pipelines(model_dir)
        week = synthetic.trading_week(D0, 6)
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(
            articles,
            [
                ("acme", "ACM", week[0], 2),
                ("acme", "ACM", week[2], 0),
                ("acme", "ACM", week[3], 2),
                ("acme", "ACM", week[5], 0),
            ],
        )
        prices = tmp_path / "prices.csv"
        closes = [10.0, 11.0, 12.0, 6.0, 7.0, 9.0]
        synthetic.write_prices(prices, {"ACM": list(zip(week, closes))})
        out = tmp_path / "out"
        code = main(
            [
                "backtest",
                "--articles",
                str(articles),
                "--prices",
                str(prices),
                "--model-dir",
                str(model_dir),
                "--out",
                str(out),
                "--min-articles",
                "0",
            ]
        )
        assert code == 0
        report = json.loads((out / "backtest_report.json").read_text())
        # (12/10) * (9/6) - 1 = 0.8
        assert report["runs"][0]["asset_rois"]["ACM"] == pytest.approx(0.8)

    def test_missing_price_names_asset_and_date(self, tmp_path, capsys):
        model_dir = tmp_path / "models"
        lexicon_pipelines(model_dir)
        week = synthetic.trading_week(D0, 3)
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(articles, [("acme", "ACM", week[2], 2)])
        prices = tmp_path / "prices.csv"
        synthetic.write_prices(prices, {"ACM": [(week[0], 10.0), (week[1], 11.0)]})
        code = main(
            [
                "backtest",
                "--articles",
                str(articles),
                "--prices",
                str(prices),
                "--model-dir",
                str(model_dir),
                "--out",
                str(tmp_path / "out"),
                "--min-articles",
                "0",
                "--end",
                week[2].isoformat(),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "ACM" in err and week[2].isoformat() in err

    def test_benchmarks_and_charts(self, tmp_path):
        model_dir = tmp_path / "models"
        lexicon_pipelines(model_dir)
        week = synthetic.trading_week(D0, 3)
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(articles, [("acme", "ACM", week[0], 2)])
        prices = tmp_path / "prices.csv"
        synthetic.write_prices(
            prices,
            {
                "ACM": list(zip(week, [10.0, 11.0, 12.0])),
                "IDX": list(zip(week, [100.0, 99.0, 97.0])),
            },
        )
        out = tmp_path / "out"
        code = main(
            [
                "backtest",
                "--articles",
                str(articles),
                "--prices",
                str(prices),
                "--model-dir",
                str(model_dir),
                "--out",
                str(out),
                "--min-articles",
                "0",
                "--benchmarks",
                "IDX",
                "--chart-tickers",
                "ACM",
            ]
        )
        assert code == 0
        benchmarks = read_csv(out / "benchmarks.csv")
        assert float(benchmarks[0]["roi"]) == pytest.approx(-0.03)
        chart = read_csv(out / "chart_ACM.csv")
        assert chart[0]["scaled_close"] == "0.0"
        assert chart[-1]["scaled_close"] == "1.0"
        assert chart[0]["scaled_sentiment"] == "1.0"  # signal 2.0 scales to 1

    def test_missing_models_exit_two(self, tmp_path):
        assert (
            main(
                [
                    "backtest",
                    "--articles",
                    "x.csv",
                    "--prices",
                    "y.csv",
                    "--model-dir",
                    str(tmp_path / "nope"),
                ]
            )
            == 2
        )


class TestExitCodes:
    def test_nonconvergence_maps_to_exit_three(self, tmp_path, monkeypatch, capsys):
        from sentitrade import cli
        from sentitrade.models import NonConvergence

        def blow_up(config):
            raise NonConvergence("solver stalled with KKT residual 4.2e-01", residual=0.42)

        monkeypatch.setitem(cli._COMMANDS, "train", blow_up)
        assert main(["train", "--out", str(tmp_path)]) == 3
        assert "4.2e-01" in capsys.readouterr().err


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        config = tmp_path / "c.cfg"
        synthetic.write_config(config, out=str(tmp_path / "from_config"), seed=1)
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(articles, [("acme", "ACM", D0, 1)])
        flag_out = tmp_path / "from_flag"
        code = main(
            [
                "build-datasets",
                "--config",
                str(config),
                "--articles",
                str(articles),
                "--out",
                str(flag_out),
            ]
        )
        assert code == 0
        assert flag_out.exists() and not (tmp_path / "from_config").exists()

    def test_unknown_config_key_exit_two(self, tmp_path):
        config = tmp_path / "c.cfg"
        config.write_text("no_such_key=1\n")
        assert main(["label-qa", "--config", str(config), "--responses", "r.csv"]) == 2

    def test_comments_and_blank_lines(self, tmp_path):
        config = tmp_path / "c.cfg"
        config.write_text("# comment\n\nseed=9\n")
        articles = tmp_path / "articles.csv"
        synthetic.write_articles(articles, [("acme", "ACM", D0, 1)])
        assert main(["build-datasets", "--config", str(config), "--articles", str(articles), "--out", str(tmp_path / "o")]) == 0
