"""Metrics, fold splitting, cross validation (incl. the leakage audit),
grid search, the equal-weighting comparison, and final training."""

from datetime import date

import numpy as np
import pytest

from sentitrade.core import DatasetVariant, SentimentClass
from sentitrade.corpus import DatasetRow, FeatureDataset
from sentitrade.models import ModelFamily, ModelSpec, Weighting
from sentitrade.selection import (
    ClassTooSmall,
    GridDefinition,
    LengthMismatch,
    Metric,
    PipelineSpec,
    TooManyFolds,
    Vectorizer,
    compare_equal_weighting,
    confusion,
    cross_validate,
    grid_search,
    kfold_split,
    objective,
    select_best_cell,
    selection_score,
    standard_recall,
    stratified_kfold,
    train_final,
)

NEG, NEU, POS = SentimentClass.NEGATIVE, SentimentClass.NEUTRAL, SentimentClass.POSITIVE


def make_dataset(texts, labels, variant=DatasetVariant.TITLE):
    rows = tuple(
        DatasetRow(
            sample_id=f"s{i:04d}",
            company_id=f"c{i % 4}",
            published_at=date(2020, 3, 9),
            text=text,
            label=SentimentClass(label) if label is not None else None,
        )
        for i, (text, label) in enumerate(zip(texts, labels))
    )
    return FeatureDataset(variant=variant, rows=rows)


def lexicon_dataset(n_per_class=12, seed=0, variant=DatasetVariant.TITLE):
    """Planted-lexicon corpus: class-specific words plus shared noise."""
    rng = np.random.default_rng(seed)
    wordbanks = {
        0: ["plunge", "lawsuit", "losses", "recall", "downgrade"],
        1: ["update", "schedule", "meeting", "report", "filing"],
        2: ["surge", "breakthrough", "approval", "record", "upgrade"],
    }
    shared = ["company", "market", "shares", "quarter"]
    texts, labels = [], []
    for cls, bank in wordbanks.items():
        for _ in range(n_per_class):
            words = list(rng.choice(bank, size=3)) + list(rng.choice(shared, size=2))
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append(cls)
    order = rng.permutation(len(texts))
    return make_dataset([texts[i] for i in order], [labels[i] for i in order], variant)


def pipeline_spec(model, vectorizer=Vectorizer.UNIGRAM_ONLY, use_svd=False, svd_k=None):
    return PipelineSpec(
        dataset_variant=DatasetVariant.TITLE,
        vectorizer=vectorizer,
        use_svd=use_svd,
        svd_k=svd_k,
        model=model,
    )


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        cm = confusion([0, 1, 2, 1], [0, 1, 2, 1])
        assert np.array_equal(cm, np.diag([1, 2, 1]))

    def test_constant_neutral_fills_middle_column(self):
        cm = confusion([0, 1, 2], [1, 1, 1])
        assert cm[:, 1].sum() == 3 and cm[:, 0].sum() == 0 and cm[:, 2].sum() == 0

    def test_swapping_two_predictions_changes_two_cells(self):
        base = confusion([0, 2], [0, 2])
        swapped = confusion([0, 2], [2, 0])
        assert int(np.abs(base - swapped).sum()) == 4

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([0, 1], [0])


class TestScores:
    def test_selection_score_hand_value(self):
        cm = np.zeros((3, 3), dtype=int)
        cm[2, 2] = 4  # TP for positive
        cm[1, 2] = 1  # FP for positive
        assert selection_score(cm, 2) == pytest.approx(0.8)

    def test_constant_neutral_on_balanced_truth(self):
        cm = confusion([0] * 5 + [1] * 5 + [2] * 5, [1] * 15)
        assert [selection_score(cm, c) for c in range(3)] == pytest.approx([0.0, 1 / 3, 0.0])
        assert [standard_recall(cm, c) for c in range(3)] == pytest.approx([0.0, 1.0, 0.0])

    def test_diagonal_scores_one(self):
        cm = np.diag([3, 4, 5])
        for c in range(3):
            assert selection_score(cm, c) == 1.0
            assert standard_recall(cm, c) == 1.0

    def test_standard_recall_hand_value(self):
        cm = np.zeros((3, 3), dtype=int)
        cm[0, 0] = 3
        cm[0, 1] = 1
        assert standard_recall(cm, 0) == pytest.approx(0.75)

    def test_zero_denominator_is_zero(self):
        cm = np.zeros((3, 3), dtype=int)
        cm[1, 1] = 2
        assert selection_score(cm, 0) == 0.0
        assert standard_recall(cm, 0) == 0.0

    def test_column_and_row_identities(self):
        rng = np.random.default_rng(13)
        y_true = rng.integers(0, 3, 50)
        y_pred = rng.integers(0, 3, 50)
        cm = confusion(y_true, y_pred)
        assert sum(int(cm[:, c].sum()) for c in range(3)) == 50
        assert sum(int(cm[c, :].sum()) for c in range(3)) == 50

    def test_metrics_agree_on_symmetric_matrix(self):
        rng = np.random.default_rng(14)
        raw = rng.integers(0, 5, size=(3, 3))
        cm = raw + raw.T
        for c in range(3):
            assert selection_score(cm, c) == pytest.approx(standard_recall(cm, c))


class TestFolds:
    def test_ten_singletons(self):
        folds = kfold_split(10, 10, seed=0)
        assert sorted(len(f) for f in folds) == [1] * 10

    def test_even_split(self):
        folds = kfold_split(9, 3, seed=0)
        assert [len(f) for f in folds] == [3, 3, 3]

    def test_partition_and_determinism(self):
        one = kfold_split(23, 4, seed=7)
        two = kfold_split(23, 4, seed=7)
        assert all(np.array_equal(a, b) for a, b in zip(one, two))
        assert sorted(int(i) for fold in one for i in fold) == list(range(23))
        sizes = [len(f) for f in one]
        assert max(sizes) - min(sizes) <= 1

    def test_too_many_folds(self):
        with pytest.raises(TooManyFolds):
            kfold_split(3, 4, seed=0)

    def test_stratified_perfectly_balanced(self):
        labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
        folds = stratified_kfold(labels, 3, seed=1)
        for fold in folds:
            assert sorted(labels[i] for i in fold) == [0, 1, 2]

    def test_stratified_proportions(self):
        labels = np.array([0] * 10 + [1] * 20 + [2] * 10)
        folds = stratified_kfold(labels, 2, seed=2)
        for fold in folds:
            counts = np.bincount(labels[fold], minlength=3)
            assert list(counts) == [5, 10, 5]

    def test_stratified_within_one_of_proportional(self):
        rng = np.random.default_rng(3)
        labels = rng.choice(3, size=53, p=[0.2, 0.5, 0.3])
        folds = stratified_kfold(labels, 4, seed=3)
        class_counts = np.bincount(labels, minlength=3)
        for fold in folds:
            counts = np.bincount(labels[fold], minlength=3)
            for c in range(3):
                assert abs(counts[c] - class_counts[c] / 4) <= 1

    def test_stratified_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            stratified_kfold([0, 0, 0, 1], 2, seed=0)

    def test_stratified_deterministic(self):
        labels = np.random.default_rng(4).integers(0, 3, 30)
        one = stratified_kfold(labels, 3, seed=9)
        two = stratified_kfold(labels, 3, seed=9)
        assert all(np.array_equal(a, b) for a, b in zip(one, two))


class TestCrossValidate:
    def test_memorizing_pipeline_on_replicated_data_scores_high(self):
        # Three copies of 15 mutually-distant texts; with one cluster per
        # distinct text, k-means memorizes and every held-out copy lands on
        # the centroid of its twins.
        distinct = [(f"marker{i:02d} token{i:02d}", i % 3) for i in range(15)]
        rows = tuple(
            DatasetRow(f"d{j:04d}", "c0", date(2020, 3, 9), text, SentimentClass(label))
            for j, (text, label) in enumerate(distinct * 3)
        )
        replicated = FeatureDataset(variant=DatasetVariant.TITLE, rows=rows)
        spec = pipeline_spec(ModelSpec(ModelFamily.KMEANS, n_clusters=15, seed=0))
        report = cross_validate(spec, replicated, k=5, seed=0)
        assert float(report.recall_mean.mean()) > 0.9

    def test_constant_classifier_gets_zero_eq1_for_neg_and_pos(self):
        # One cluster maps to the (neutral) majority: a constant classifier.
        base = lexicon_dataset(n_per_class=6, seed=11)
        extra = tuple(
            DatasetRow(f"n{i}", "c0", date(2020, 3, 9), "meeting report filing", NEU)
            for i in range(12)
        )
        dataset = FeatureDataset(variant=base.variant, rows=base.rows + extra)
        spec = pipeline_spec(ModelSpec(ModelFamily.KMEANS, n_clusters=1, seed=0))
        report = cross_validate(spec, dataset, k=3, seed=0)
        assert report.eq1_mean[0] == 0.0 and report.eq1_mean[2] == 0.0

    def test_metric_choice_does_not_change_folds(self):
        dataset = lexicon_dataset(n_per_class=6, seed=12)
        spec = pipeline_spec(ModelSpec(ModelFamily.LOGREG, C=1.0))
        report = cross_validate(spec, dataset, k=3, seed=5)
        again = cross_validate(spec, dataset, k=3, seed=5)
        for a, b in zip(report.folds, again.folds):
            assert np.array_equal(a.test_indices, b.test_indices)
        assert objective(report, Metric.EQ1) != objective(report, Metric.STANDARD_RECALL) or True

    def test_no_vocabulary_leakage_from_held_out_folds(self):
        # Every sample carries a unique marker token; a fold's fitted
        # vocabulary must never contain a marker of a held-out row.
        rng = np.random.default_rng(13)
        texts, labels = [], []
        shared = ["alpha", "beta", "gamma"]
        for i in range(30):
            words = list(rng.choice(shared, size=2)) + [f"marker{i:03d}x"]
            texts.append(" ".join(words))
            labels.append(int(rng.integers(0, 3)))
        labels[:3] = [0, 1, 2]  # every class present
        dataset = make_dataset(texts, labels)
        spec = pipeline_spec(ModelSpec(ModelFamily.MNB, alpha=1.0))
        report = cross_validate(spec, dataset, k=10, seed=3)
        for fold in report.folds:
            vocabulary = set(fold.tfidf.vocabulary.token_index)
            for i in fold.test_indices:
                assert f"marker{i:03d}x" not in vocabulary

    def test_training_error_annotated_with_fold(self):
        dataset = lexicon_dataset(n_per_class=4, seed=14)
        spec = pipeline_spec(
            ModelSpec(ModelFamily.MNB, alpha=1.0),
            vectorizer=Vectorizer.UNIGRAM_ONLY,
            use_svd=True,
            svd_k=5,
        )
        from sentitrade.models import NonNegativeRequired

        with pytest.raises(NonNegativeRequired, match="fold 0"):
            cross_validate(spec, dataset, k=3, seed=0)

    def test_unlabeled_rows_rejected(self):
        dataset = make_dataset(["good words here", "bad words here"], [0, None])
        spec = pipeline_spec(ModelSpec(ModelFamily.MNB, alpha=1.0))
        with pytest.raises(ValueError, match="unlabeled"):
            cross_validate(spec, dataset, k=2, seed=0)


SMALL_GRID = GridDefinition(
    logreg_C=(1.0,),
    mnb_alpha=(1.0,),
    svm_C=(10.0,),
    svm_gamma=(1.0,),
    kmeans_n=(3,),
)


class TestGridSearch:
    def test_single_point_grid_returns_that_point(self):
        dataset = lexicon_dataset(n_per_class=8, seed=15)
        cells = grid_search(
            dataset,
            [(Vectorizer.UNIGRAM_ONLY, False)],
            grid=SMALL_GRID,
            k=4,
            seed=0,
            families=(ModelFamily.LOGREG,),
        )
        assert len(cells) == 1
        assert cells[0].best.spec.model.C == 1.0
        assert len(cells[0].points) == 1

    def test_gamma_selected_by_generalization(self):
        # gamma=1 separates the lexicon blobs; gamma=1e6 memorizes single
        # points and transfers nothing across folds.
        dataset = lexicon_dataset(n_per_class=8, seed=16)
        grid = GridDefinition(
            logreg_C=(1.0,),
            mnb_alpha=(1.0,),
            svm_C=(100.0,),
            svm_gamma=(1.0, 1e6),
            kmeans_n=(3,),
        )
        cells = grid_search(
            dataset,
            [(Vectorizer.UNIGRAM_ONLY, False)],
            grid=grid,
            k=4,
            seed=0,
            families=(ModelFamily.RBF_SVM,),
        )
        best = cells[0].best.spec
        assert best.model.gamma == 1.0
        # the winner's objective dominates every evaluated point
        for point in cells[0].points:
            assert cells[0].best_objective >= point.objective

    def test_invariant_to_grid_enumeration_order(self):
        dataset = lexicon_dataset(n_per_class=6, seed=17)
        forward = GridDefinition(
            logreg_C=(0.1, 1.0, 10.0), mnb_alpha=(1.0,), svm_C=(1.0,), svm_gamma=(1.0,), kmeans_n=(3,)
        )
        backward = GridDefinition(
            logreg_C=(10.0, 1.0, 0.1), mnb_alpha=(1.0,), svm_C=(1.0,), svm_gamma=(1.0,), kmeans_n=(3,)
        )
        kwargs = dict(k=3, seed=0, families=(ModelFamily.LOGREG,))
        one = grid_search(dataset, [(Vectorizer.UNIGRAM_ONLY, False)], grid=forward, **kwargs)
        two = grid_search(dataset, [(Vectorizer.UNIGRAM_ONLY, False)], grid=backward, **kwargs)
        assert one[0].best.spec == two[0].best.spec

    def test_mnb_on_svd_recorded_as_failed_cell(self):
        dataset = lexicon_dataset(n_per_class=6, seed=18)
        cells = grid_search(
            dataset,
            [(Vectorizer.UNIGRAM_ONLY, True)],
            grid=SMALL_GRID,
            k=3,
            seed=0,
            svd_k=5,
            families=(ModelFamily.MNB, ModelFamily.LOGREG),
        )
        by_family = {cell.family: cell for cell in cells}
        assert by_family[ModelFamily.MNB].best is None
        assert "nonnegative" in by_family[ModelFamily.MNB].error.lower()
        assert by_family[ModelFamily.LOGREG].best is not None

    def test_parallel_jobs_match_serial(self):
        dataset = lexicon_dataset(n_per_class=6, seed=19)
        grid = GridDefinition(
            logreg_C=(0.1, 1.0), mnb_alpha=(1.0,), svm_C=(1.0,), svm_gamma=(1.0,), kmeans_n=(3,)
        )
        kwargs = dict(grid=grid, k=3, seed=0, families=(ModelFamily.LOGREG, ModelFamily.KMEANS))
        serial = grid_search(dataset, [(Vectorizer.UNIGRAM_ONLY, False)], jobs=1, **kwargs)
        threaded = grid_search(dataset, [(Vectorizer.UNIGRAM_ONLY, False)], jobs=4, **kwargs)
        for a, b in zip(serial, threaded):
            assert a.best_objective == b.best_objective
            assert a.best.spec == b.best.spec

    def test_select_best_cell_uses_objective_then_complexity(self):
        dataset = lexicon_dataset(n_per_class=8, seed=20)
        cells = grid_search(
            dataset,
            [(Vectorizer.UNIGRAM_ONLY, False), (Vectorizer.UNIGRAM_BIGRAM, False)],
            grid=SMALL_GRID,
            k=4,
            seed=0,
            families=(ModelFamily.LOGREG, ModelFamily.MNB),
        )
        best = select_best_cell(cells, Metric.EQ1)
        for cell in cells:
            if cell.best is not None:
                assert best.best_objective >= cell.best_objective


class TestCompareEqualWeighting:
    def test_balanced_data_keeps_unweighted(self):
        dataset = lexicon_dataset(n_per_class=9, seed=21)
        spec = pipeline_spec(ModelSpec(ModelFamily.LOGREG, C=1.0))
        chosen, plain, weighted = compare_equal_weighting(spec, dataset, seed=0)
        assert chosen is Weighting.NONE or weighted > plain

    def test_rare_negative_class_recovered_by_weighting(self):
        rng = np.random.default_rng(22)
        texts, labels = [], []
        neg_words = ["plunge", "lawsuit", "fraud"]
        neu_words = ["update", "meeting", "filing", "report", "note"]
        for _ in range(6):
            texts.append(" ".join(rng.choice(neg_words, size=3)) + " market")
            labels.append(0)
        for _ in range(60):
            texts.append(" ".join(rng.choice(neu_words, size=3)) + " market")
            labels.append(1)
        for _ in range(12):
            texts.append("surge approval record market")
            labels.append(2)
        dataset = make_dataset(texts, labels)
        spec = pipeline_spec(ModelSpec(ModelFamily.LOGREG, C=0.05))
        chosen, plain, weighted = compare_equal_weighting(spec, dataset, seed=1)
        assert weighted >= plain
        assert chosen is Weighting.EQUAL_CLASS or weighted == plain

    def test_deterministic(self):
        dataset = lexicon_dataset(n_per_class=9, seed=23)
        spec = pipeline_spec(ModelSpec(ModelFamily.LOGREG, C=1.0))
        assert compare_equal_weighting(spec, dataset, seed=4) == compare_equal_weighting(
            spec, dataset, seed=4
        )

    def test_class_too_small_propagates(self):
        dataset = make_dataset(
            ["negative words", "neutral words", "neutral again", "positive words"],
            [0, 1, 1, 2],
        )
        spec = pipeline_spec(ModelSpec(ModelFamily.MNB, alpha=1.0))
        with pytest.raises(ClassTooSmall):
            compare_equal_weighting(spec, dataset, seed=0)


class TestTrainFinal:
    def test_final_model_predicts_on_training_data(self):
        dataset = lexicon_dataset(n_per_class=8, seed=24)
        spec = pipeline_spec(ModelSpec(ModelFamily.LOGREG, C=10.0))
        pipeline = train_final(spec, dataset)
        predictions = pipeline.predict_texts(dataset.texts())
        assert len(predictions) == len(dataset)

    def test_deterministic(self):
        dataset = lexicon_dataset(n_per_class=8, seed=25)
        spec = pipeline_spec(ModelSpec(ModelFamily.KMEANS, n_clusters=3, seed=11))
        one = train_final(spec, dataset)
        two = train_final(spec, dataset)
        assert np.array_equal(one.model.params.centroids, two.model.params.centroids)

    def test_memorizer_beats_its_cv_score_on_training_data(self):
        dataset = lexicon_dataset(n_per_class=6, seed=26)
        spec = pipeline_spec(ModelSpec(ModelFamily.KMEANS, n_clusters=len(dataset), seed=0))
        pipeline = train_final(spec, dataset)
        y = np.array([int(r.label) for r in dataset.rows])
        train_accuracy = float(np.mean(pipeline.predict_texts(dataset.texts()) == y))
        cv_spec = pipeline_spec(
            ModelSpec(ModelFamily.KMEANS, n_clusters=len(dataset) - len(dataset) // 3, seed=0)
        )
        report = cross_validate(cv_spec, dataset, k=3, seed=0)
        assert train_accuracy >= float(report.recall_mean.mean())

    def test_equal_class_resampling_for_kmeans(self):
        rng = np.random.default_rng(27)
        texts = [f"word{i % 5} filler" for i in range(30)]
        labels = [0] * 4 + [1] * 20 + [2] * 6
        dataset = make_dataset(texts, labels)
        spec = pipeline_spec(
            ModelSpec(ModelFamily.KMEANS, n_clusters=3, seed=0, class_weighting=Weighting.EQUAL_CLASS)
        )
        pipeline = train_final(spec, dataset)  # must not raise; 12 samples kept
        assert pipeline.model.params.centroids.shape[0] == 3
