"""Scikit-learn estimator wrapping the decentralized training loop.

``CompressedGossipClassifier`` fits the regularized logistic objective by
simulating a gossip network over shards of the training set, then predicts
with the network-average iterate.  It exists so the solver can sit inside
sklearn pipelines and grid searches; everything heavy lives in
:mod:`gossipopt.algorithms`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import algorithms, diagnostics
from .compression import Identity, parse_compressor
from .datasets import Dataset, partition_shuffled
from .oracles import LogisticObjective, smoothness_estimate
from .rng import RngStream
from .topology import build_graph, metropolis_weights


class CompressedGossipClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier trained by compressed decentralized gradient descent.

    Parameters mirror the experiment config: the training set is split
    across ``n_nodes`` simulated clients on the given topology, and the
    chosen algorithm runs for ``rounds`` gossip rounds.
    """

    def __init__(
        self,
        algorithm="beer",
        compressor="gsgd:5",
        topology="ring",
        n_nodes=4,
        rounds=200,
        eta="auto",
        gamma="auto",
        batch=None,
        reg=0.05,
        metrics_every=10,
        seed=0,
    ):
        self.algorithm = algorithm
        self.compressor = compressor
        self.topology = topology
        self.n_nodes = n_nodes
        self.rounds = rounds
        self.eta = eta
        self.gamma = gamma
        self.batch = batch
        self.reg = reg
        self.metrics_every = metrics_every
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(
                f"expected a binary problem, got {self.classes_.shape[0]} classes"
            )
        if self.algorithm not in algorithms.ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        labels = np.where(y == self.classes_[1], 1.0, -1.0)
        m, d = X.shape
        if m < self.n_nodes:
            raise ValueError(f"need at least n_nodes={self.n_nodes} samples, got {m}")

        comp = parse_compressor(self.compressor)
        if self.algorithm in ("dsgd", "d2") and not isinstance(comp, Identity):
            raise ValueError(f"{self.algorithm} is uncompressed; use compressor='identity'")
        graph = build_graph(self.topology, self.n_nodes, seed=self.seed)
        mix = metropolis_weights(graph)
        data = Dataset(features=X, labels=labels)
        shards = partition_shuffled(data, self.n_nodes, self.seed)
        obj = LogisticObjective(d=d, reg=self.reg)
        info = smoothness_estimate(obj, shards)

        gamma, eta = self._resolve_steps(comp.alpha(d), mix, info.lipschitz)
        hp = algorithms.HyperParams(eta=eta, gamma=gamma, batch=self.batch)
        step = algorithms.STEP_FUNCTIONS[self.algorithm]
        stream = RngStream(self.seed)
        state = algorithms.init_state(obj, shards, np.zeros(d), hp, stream)
        history = [self._row(state, obj, shards)]
        for _ in range(self.rounds):
            state = step(state, obj, shards, mix, comp, hp, stream)
            if not np.all(np.isfinite(state.x)):
                raise RuntimeError(f"training diverged at round {state.round}")
            if state.round % self.metrics_every == 0 or state.round == self.rounds:
                history.append(self._row(state, obj, shards))

        self.coef_ = state.x.mean(axis=1)
        self.history_ = history
        self.n_features_in_ = d
        self.eta_ = eta
        self.gamma_ = gamma
        return self

    def _resolve_steps(self, alpha, mix, lipschitz):
        auto_gamma, auto_eta = algorithms.theoretical_stepsizes(
            alpha, mix.rho, mix.c, lipschitz
        )
        gamma = auto_gamma if self.gamma == "auto" else float(self.gamma)
        if self.eta == "auto":
            eta = auto_eta if self.gamma == "auto" else (auto_eta / auto_gamma) * gamma
        else:
            eta = float(self.eta)
        return gamma, eta

    def _row(self, state, obj, shards):
        om = diagnostics.omegas(state)
        return diagnostics.MetricsRow(
            round=state.round,
            cum_bits=0,
            grad_norm_sq=diagnostics.grad_norm_at_mean(state, obj, shards),
            omega1=om.omega1,
            omega3=om.omega3,
        )

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores >= 0).astype(int)]
