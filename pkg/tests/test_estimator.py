import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from gossipopt.datasets import synth_binary
from gossipopt.estimator import CompressedGossipClassifier


def toy_problem(m=300, d=40, seed=0):
    data = synth_binary(m=m, d=d, seed=seed)
    return data.features, data.labels


class TestParams:
    def test_get_params_round_trip(self):
        est = CompressedGossipClassifier(rounds=50, compressor="topk:3")
        params = est.get_params()
        assert params["rounds"] == 50
        assert params["compressor"] == "topk:3"
        rebuilt = CompressedGossipClassifier(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        est = CompressedGossipClassifier()
        est.set_params(rounds=10, eta=0.1)
        assert est.rounds == 10 and est.eta == 0.1

    def test_clone_preserves_params(self):
        est = CompressedGossipClassifier(algorithm="choco", n_nodes=6)
        twin = clone(est)
        assert twin.get_params() == est.get_params()


class TestFit:
    def test_fit_sets_attributes(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(rounds=40).fit(X, y)
        assert est.coef_.shape == (40,)
        assert est.n_features_in_ == 40
        np.testing.assert_array_equal(est.classes_, [-1.0, 1.0])
        assert est.eta_ > 0 and 0 < est.gamma_ <= 1

    def test_training_improves_accuracy(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(rounds=200, eta=0.5, gamma=0.5).fit(X, y)
        assert est.score(X, y) >= 0.8

    def test_history_records_decay(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(rounds=100, eta=0.5, gamma=0.5).fit(X, y)
        assert est.history_[0].round == 0
        assert est.history_[-1].round == 100
        assert est.history_[-1].grad_norm_sq < est.history_[0].grad_norm_sq

    def test_determinism(self):
        X, y = toy_problem()
        a = CompressedGossipClassifier(rounds=30, seed=5).fit(X, y)
        b = CompressedGossipClassifier(rounds=30, seed=5).fit(X, y)
        np.testing.assert_array_equal(a.coef_, b.coef_)

    def test_arbitrary_label_pair(self):
        X, y = toy_problem()
        named = np.where(y > 0, "spam", "ham")
        est = CompressedGossipClassifier(rounds=30).fit(X, named)
        pred = est.predict(X[:10])
        assert set(pred) <= {"spam", "ham"}

    def test_rejects_multiclass(self):
        X, _ = toy_problem(m=90)
        y = np.arange(90) % 3
        with pytest.raises(ValueError, match="binary"):
            CompressedGossipClassifier().fit(X, y)

    def test_rejects_too_few_samples(self):
        X, y = toy_problem(m=100)
        keep = np.concatenate([np.where(y > 0)[0][:3], np.where(y < 0)[0][:2]])
        est = CompressedGossipClassifier(n_nodes=8)
        with pytest.raises(ValueError, match="n_nodes"):
            est.fit(X[keep], y[keep])

    def test_rejects_unknown_algorithm(self):
        X, y = toy_problem()
        with pytest.raises(ValueError, match="unknown algorithm"):
            CompressedGossipClassifier(algorithm="adam").fit(X, y)

    def test_rejects_compressed_baseline(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(algorithm="dsgd", compressor="gsgd:5")
        with pytest.raises(ValueError, match="uncompressed"):
            est.fit(X, y)


class TestPredict:
    def test_predict_before_fit_raises(self):
        X, _ = toy_problem(m=20)
        with pytest.raises(NotFittedError):
            CompressedGossipClassifier().predict(X)

    def test_feature_count_mismatch(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(rounds=10).fit(X, y)
        with pytest.raises(ValueError, match="features"):
            est.predict(X[:, :5])

    def test_decision_function_sign_matches_predict(self):
        X, y = toy_problem()
        est = CompressedGossipClassifier(rounds=50, eta=0.5, gamma=0.5).fit(X, y)
        scores = est.decision_function(X)
        pred = est.predict(X)
        np.testing.assert_array_equal(pred, est.classes_[(scores >= 0).astype(int)])


class TestSklearnIntegration:
    def test_pipeline_and_cross_val(self):
        X, y = toy_problem(m=240)
        pipe = make_pipeline(
            StandardScaler(),
            CompressedGossipClassifier(rounds=60, eta=0.5, gamma=0.5, n_nodes=3),
        )
        scores = cross_val_score(pipe, X, y, cv=3)
        assert scores.shape == (3,)
        assert scores.mean() > 0.5
