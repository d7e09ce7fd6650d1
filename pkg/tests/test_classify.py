import numpy as np
import pytest

from beamcanyon.classify import (
    evaluate,
    knn_classifier,
    majority_classifier,
    predict,
)


class TestMajorityClassifier:
    def test_predicts_most_frequent(self):
        model = majority_classifier(np.zeros((3, 2)), np.array([1, 1, 2]))
        assert predict(model, np.zeros((4, 2))).tolist() == [1, 1, 1, 1]

    def test_tie_goes_to_smallest_label(self):
        model = majority_classifier(np.zeros((4, 2)), np.array([2, 2, 1, 1]))
        assert model.label == 1

    def test_train_accuracy_equals_class_frequency(self):
        y = np.array([1, 1, 1, 2, 2, 3])
        model = majority_classifier(np.zeros((6, 1)), y)
        report = evaluate(model, np.zeros((6, 1)), y, np.zeros(6, dtype=bool))
        assert report.accuracy_all == pytest.approx(3 / 6)

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            majority_classifier(np.zeros((0, 2)), np.array([], dtype=int))


class TestKnnClassifier:
    def test_exact_training_point(self):
        x = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        y = np.array([1, 2, 3])
        model = knn_classifier(x, y, k=1)
        assert predict(model, np.array([10.0, 0.0]))[0] == 2

    def test_k_equal_n_reduces_to_majority(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([7, 7, 7, 2])
        model = knn_classifier(x, y, k=4)
        assert predict(model, np.array([[100.0], [-50.0]])).tolist() == [7, 7]

    def test_two_separated_clusters(self):
        # separation much larger than the noise: perfect accuracy
        rng = np.random.default_rng(14)
        a = rng.normal(0.0, 0.5, size=(30, 8))
        b = rng.normal(100.0, 0.5, size=(30, 8))
        x = np.vstack([a, b])
        y = np.array([1] * 30 + [2] * 30)
        model = knn_classifier(x, y, k=3)
        queries = np.vstack(
            [rng.normal(0.0, 0.5, size=(10, 8)), rng.normal(100.0, 0.5, size=(10, 8))]
        )
        expected = np.array([1] * 10 + [2] * 10)
        assert (predict(model, queries) == expected).all()

    def test_distance_tie_takes_lower_train_index(self):
        x = np.array([[0.0, 0.0], [2.0, 0.0]])
        y = np.array([5, 3])
        model = knn_classifier(x, y, k=1)
        assert predict(model, np.array([1.0, 0.0]))[0] == 5

    def test_vote_tie_takes_smallest_label(self):
        x = np.array([[0.0, 0.0], [2.0, 0.0]])
        y = np.array([5, 3])
        model = knn_classifier(x, y, k=2)
        assert predict(model, np.array([1.0, 0.0]))[0] == 3

    def test_training_accuracy_with_distinct_points(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=(25, 4))
        y = rng.integers(1, 5, size=25)
        model = knn_classifier(x, y, k=1)
        assert (predict(model, x) == y).all()

    def test_dimension_mismatch_rejected(self):
        model = knn_classifier(np.zeros((3, 4)), np.array([1, 2, 3]), k=1)
        with pytest.raises(ValueError):
            predict(model, np.zeros((2, 5)))

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            knn_classifier(np.zeros((3, 2)), np.array([1, 2, 3]), k=0)
        with pytest.raises(ValueError):
            knn_classifier(np.zeros((3, 2)), np.array([1, 2, 3]), k=4)


class TestEvaluate:
    def test_perfect_predictor(self):
        x = np.arange(8, dtype=float).reshape(-1, 1) * 10
        y = np.array([1, 2, 3, 4, 1, 2, 3, 4])
        model = knn_classifier(x, y, k=1)
        report = evaluate(model, x, y, np.array([True] * 4 + [False] * 4))
        assert report.accuracy_all == 1.0
        assert report.accuracy_nlos == 1.0
        off_diagonal = report.confusion.sum() - np.trace(report.confusion)
        assert off_diagonal == 0

    def test_hand_counted_fixture(self):
        # majority model trained on {1,1,2} always predicts 1;
        # y_true = [1,1,1,2,2,2,3,3,1,2], NLOS at even positions.
        # correct overall: positions 0,1,2,8 -> 4/10; correct NLOS: 0,2,8 of
        # {0,2,4,6,8} -> 3/5; confusion: [1,1]=4, [2,1]=4, [3,1]=2.
        model = majority_classifier(np.zeros((3, 1)), np.array([1, 1, 2]))
        y = np.array([1, 1, 1, 2, 2, 2, 3, 3, 1, 2])
        nlos = np.array([i % 2 == 0 for i in range(10)])
        report = evaluate(model, np.zeros((10, 1)), y, nlos)
        assert report.accuracy_all == pytest.approx(0.4)
        assert report.accuracy_nlos == pytest.approx(0.6)
        assert report.confusion[1, 1] == 4
        assert report.confusion[2, 1] == 4
        assert report.confusion[3, 1] == 2
        assert report.confusion.sum() == 10
        assert report.n_examples == 10

    def test_accuracies_consistent_with_confusion(self):
        rng = np.random.default_rng(16)
        x = rng.normal(size=(40, 3))
        y = rng.integers(1, 4, size=40)
        model = knn_classifier(x[:30], y[:30], k=3)
        report = evaluate(model, x[30:], y[30:], rng.random(10) < 0.5)
        assert report.accuracy_all == pytest.approx(
            np.trace(report.confusion) / report.confusion.sum()
        )

    def test_no_nlos_examples_gives_none(self):
        model = majority_classifier(np.zeros((2, 1)), np.array([1, 1]))
        report = evaluate(model, np.zeros((3, 1)), np.array([1, 1, 2]), np.zeros(3, dtype=bool))
        assert report.accuracy_nlos is None

    def test_empty_test_rejected(self):
        model = majority_classifier(np.zeros((2, 1)), np.array([1, 1]))
        with pytest.raises(ValueError):
            evaluate(model, np.zeros((0, 1)), np.array([], dtype=int), np.array([], dtype=bool))
