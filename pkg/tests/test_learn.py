import numpy as np
import pytest

from fusegraph.dataset import FeatureTable
from fusegraph.embedding import FusionVector
from fusegraph.errors import (
    AlignmentError,
    ArityError,
    DegenerateLabelsError,
    ShapeError,
    StratificationError,
)
from fusegraph.learn import (
    Estimator,
    TrainConfig,
    concat_features,
    majority_vote,
    predict_label,
    predict_proba,
    stratified_folds,
    train_classifier,
)


def separable_binary(n=20, seed=0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.uniform(-3, -1, (n, 2)), rng.uniform(1, 3, (n, 2))])
    y = ["neg"] * n + ["pos"] * n
    return X, y


def one_hot_three(copies=10):
    X = np.vstack([np.tile(np.eye(3)[i], (copies, 1)) for i in range(3)])
    y = [f"c{i}" for i in range(3) for _ in range(copies)]
    return X, y


class TestTrainClassifier:
    def test_separable_training_accuracy(self):
        X, y = separable_binary()
        est = train_classifier(X, y, TrainConfig(reg_grid=[0.01], folds=3, epochs=100))
        assert all(predict_label(est, x) == t for x, t in zip(X, y))
        assert est.weights.shape == (1, 2)  # binary tasks use a single vector

    def test_one_hot_cv_score(self):
        X, y = one_hot_three()
        est = train_classifier(X, y, TrainConfig(reg_grid=[0.01, 0.1], folds=5, epochs=100))
        assert est.meta["cv_score"] == pytest.approx(1.0)
        assert est.weights.shape == (3, 3)

    def test_deterministic(self):
        X, y = one_hot_three()
        cfg = TrainConfig(reg_grid=[0.01, 0.1], folds=5, epochs=80, seed=9)
        a = train_classifier(X, y, cfg)
        b = train_classifier(X, y, cfg)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.biases, b.biases)
        assert a.meta == b.meta

    def test_accepts_fusion_vectors(self):
        X = [
            FusionVector("V", 3, [(0, 1.0)]),
            FusionVector("V", 3, [(0, 0.9)]),
            FusionVector("V", 3, [(1, 1.0)]),
            FusionVector("V", 3, [(1, 1.1)]),
        ]
        y = ["a", "a", "b", "b"]
        est = train_classifier(X, y, TrainConfig(reg_grid=[0.01], folds=2, epochs=80))
        assert predict_label(est, FusionVector("V", 3, [(0, 1.2)])) == "a"
        assert predict_label(est, FusionVector("V", 3, [(1, 0.8)])) == "b"

    def test_loss_non_increasing(self):
        X, y = separable_binary(seed=4)
        for objective in ("logistic", "hinge"):
            est = train_classifier(
                X, y, TrainConfig(reg_grid=[0.05], folds=2, epochs=120, objective=objective)
            )
            history = est.meta["loss_history"]
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_grid_never_selects_dominated_point(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((40, 4))
        y = ["a" if x[0] + 0.3 * rng.standard_normal() > 0 else "b" for x in X]
        if len(set(y)) < 2:
            pytest.skip("degenerate draw")
        cfg = TrainConfig(reg_grid=[1e-3, 1e-1, 10.0], folds=4, epochs=60, seed=2)
        est = train_classifier(X, y, cfg)
        scores = dict((r, s) for r, s in est.meta["grid_scores"])
        assert scores[est.regularization] >= max(scores.values()) - 1e-12

    def test_grid_tie_prefers_smaller_constant(self):
        X, y = one_hot_three()
        est = train_classifier(X, y, TrainConfig(reg_grid=[0.5, 0.01], folds=5, epochs=80))
        scores = dict(est.meta["grid_scores"])
        if scores[0.01] == scores[0.5]:
            assert est.regularization == 0.01

    def test_single_class_rejected(self):
        X = np.zeros((6, 2))
        with pytest.raises(DegenerateLabelsError):
            train_classifier(X, ["same"] * 6, TrainConfig(reg_grid=[0.1], folds=2))

    def test_dim_mismatch_rejected(self):
        X = [FusionVector("V", 3, [(0, 1.0)]), FusionVector("V", 4, [(0, 1.0)])]
        with pytest.raises(ShapeError):
            train_classifier(X, ["a", "b"], TrainConfig(reg_grid=[0.1], folds=2))

    def test_tiny_class_rejected_for_cv(self):
        X = np.eye(3)
        with pytest.raises(StratificationError):
            train_classifier(X, ["a", "a", "b"], TrainConfig(reg_grid=[0.1], folds=2, epochs=5))


class TestStratifiedFolds:
    def test_every_class_in_every_training_portion(self):
        y = ["a"] * 7 + ["b"] * 5 + ["c"] * 3
        folds = stratified_folds(y, 3, seed=0)
        all_idx = set(range(len(y)))
        assert sorted(i for f in folds for i in f.tolist()) == sorted(all_idx)
        for val in folds:
            train_labels = {y[i] for i in all_idx - set(val.tolist())}
            assert train_labels == {"a", "b", "c"}


class TestPredict:
    def test_bias_argmax(self):
        est = Estimator(["a", "b"], np.zeros((2, 3)), np.array([1.0, 0.0]), 0.1, "logistic")
        assert predict_label(est, np.zeros(3)) == "a"

    def test_one_hot_axis(self):
        est = Estimator(["a", "b", "c"], np.eye(3), np.zeros(3), 0.1, "logistic")
        assert predict_label(est, np.array([0.0, 1.0, 0.0])) == "b"

    def test_tie_goes_to_first_class(self):
        est = Estimator(["a", "b"], np.zeros((2, 2)), np.zeros(2), 0.1, "logistic")
        assert predict_label(est, np.ones(2)) == "a"

    def test_argmax_invariant_under_rescaling(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            W = rng.standard_normal((4, 5))
            est1 = Estimator(["a", "b", "c", "d"], W, np.zeros(4), 0.1, "logistic")
            est2 = Estimator(["a", "b", "c", "d"], 3.7 * W, np.zeros(4), 0.1, "logistic")
            x = rng.standard_normal(5)
            assert predict_label(est1, x) == predict_label(est2, x)

    def test_margin_zero_is_half(self):
        est = Estimator(["a", "b"], np.zeros((1, 2)), np.zeros(1), 0.1, "logistic")
        assert predict_proba(est, np.ones(2)) == 0.5

    def test_saturated_margin(self):
        est = Estimator(["a", "b"], np.array([[1e6, 0.0]]), np.zeros(1), 0.1, "logistic")
        assert predict_proba(est, np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-6)

    def test_equal_scores_uniform_simplex(self):
        est = Estimator(["a", "b", "c"], np.zeros((3, 2)), np.zeros(3), 0.1, "logistic")
        p = predict_proba(est, np.ones(2))
        assert p == pytest.approx([1 / 3] * 3)

    def test_multiclass_simplex(self):
        rng = np.random.default_rng(7)
        est = Estimator(["a", "b", "c"], rng.standard_normal((3, 4)), rng.standard_normal(3), 0.1, "logistic")
        for _ in range(20):
            p = predict_proba(est, rng.standard_normal(4))
            assert p.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(p >= 0)

    def test_shape_error(self):
        est = Estimator(["a", "b"], np.zeros((1, 2)), np.zeros(1), 0.1, "logistic")
        with pytest.raises(ShapeError):
            predict_label(est, np.ones(5))


class TestConcatFeatures:
    def test_min_max_arithmetic(self):
        t1 = FeatureTable("p", 1, {"a": np.array([0.0]), "b": np.array([10.0]), "c": np.array([5.0])})
        t2 = FeatureTable("q", 1, {"a": np.array([5.0]), "b": np.array([5.0]), "c": np.array([15.0])})
        cat = concat_features([t1, t2], ["a", "b", "c"])
        assert cat.rows["b"] == pytest.approx([1.0, 0.0])
        assert cat.dim == 2
        assert cat.descriptor_name == "p+q"

    def test_identical_table_duplicates_columns(self):
        t = FeatureTable("p", 2, {"a": np.array([1.0, 2.0]), "b": np.array([3.0, 4.0])})
        cat = concat_features([t, t], ["a", "b"])
        for sid in ("a", "b"):
            assert np.array_equal(cat.rows[sid][:2], cat.rows[sid][2:])

    def test_constant_attribute_maps_to_zero(self):
        t = FeatureTable("p", 1, {"a": np.array([2.0]), "b": np.array([2.0])})
        cat = concat_features([t], ["a", "b"])
        assert cat.rows["a"] == pytest.approx([0.0])

    def test_test_rows_use_train_stats_and_clip(self):
        t = FeatureTable("p", 1, {"a": np.array([0.0]), "b": np.array([10.0]), "z": np.array([20.0])})
        cat = concat_features([t], ["a", "b"])  # z is a test row
        assert cat.rows["z"] == pytest.approx([1.0])  # clipped to [0,1]

    def test_id_mismatch(self):
        t1 = FeatureTable("p", 1, {"a": np.array([0.0])})
        t2 = FeatureTable("q", 1, {"b": np.array([0.0])})
        with pytest.raises(AlignmentError):
            concat_features([t1, t2], ["a"])


class TestMajorityVote:
    def test_simple_majority(self):
        assert majority_vote([["a"], ["a"], ["b"]]) == ["a"]

    def test_full_tie_takes_first_predictor(self):
        assert majority_vote([["a"], ["b"], ["c"]]) == ["a"]

    def test_identical_predictors(self):
        votes = [["x", "y"], ["x", "y"], ["x", "y"]]
        assert majority_vote(votes) == ["x", "y"]

    def test_even_count_rejected(self):
        with pytest.raises(ArityError):
            majority_vote([["a"], ["b"]])

    def test_ragged_rejected(self):
        with pytest.raises(ShapeError):
            majority_vote([["a"], ["a", "b"], ["a"]])
