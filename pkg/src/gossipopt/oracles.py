"""Objective functions and gradient oracles.

Two problem families:

* ``LogisticObjective``: regularized logistic loss per client,
  f_i(x) = mean_j log(1 + exp(-y_j a_j^T x)) + reg * sum_k x_k^2/(1+x_k^2).
  The regularizer is smooth but nonconvex; its Hessian is bounded by 2*reg.
* ``QuadraticObjective``: f_i(x) = 0.5 ||A_i x - b_i||^2 with the shard
  carrying A_i and b_i.

Minibatch draws sample indices i.i.d. with replacement and *return* the
index draw so a later caller can re-evaluate the same stochastic gradient at
the same point.  That replay is what keeps the gradient-tracking mean
identity exact; see :mod:`gossipopt.algorithms`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import symmetric_eigenvalues
from .rng import GRAD, RngStream

L_FLOOR = 1e-12


@dataclass(frozen=True)
class LogisticObjective:
    d: int
    reg: float = 0.05

    def __post_init__(self):
        if self.reg < 0:
            raise ValueError(f"regularizer weight must be >= 0, got {self.reg}")


@dataclass(frozen=True)
class QuadraticObjective:
    d: int


@dataclass(frozen=True)
class SmoothnessInfo:
    lipschitz: float
    strong_convexity: float | None = None
    noise_bound: float | None = None


def _sigmoid(z):
    """Numerically stable logistic function."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _reg_value(obj: LogisticObjective, x) -> float:
    xx = x * x
    return obj.reg * float(np.sum(xx / (1.0 + xx)))


def _reg_gradient(obj: LogisticObjective, x):
    return 2.0 * obj.reg * x / (1.0 + x * x) ** 2


def value(obj, shard, x) -> float:
    """Local objective f_i(x) on one shard."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(obj, LogisticObjective):
        margins = shard.labels * (shard.features @ x)
        return float(np.mean(np.logaddexp(0.0, -margins))) + _reg_value(obj, x)
    if isinstance(obj, QuadraticObjective):
        r = shard.features @ x - shard.labels
        return 0.5 * float(r @ r)
    raise TypeError(f"unknown objective {type(obj).__name__}")


def full_gradient(obj, shard, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if isinstance(obj, LogisticObjective):
        margins = shard.labels * (shard.features @ x)
        weights = -shard.labels * _sigmoid(-margins)
        return shard.features.T @ weights / shard.m + _reg_gradient(obj, x)
    if isinstance(obj, QuadraticObjective):
        return shard.features.T @ (shard.features @ x - shard.labels)
    raise TypeError(f"unknown objective {type(obj).__name__}")


def gradient_at_indices(obj, shard, x, indices) -> np.ndarray:
    """Stochastic gradient for an explicit index draw (with replacement).

    Per-sample gradients are defined so that averaging over all indices
    reproduces ``full_gradient`` exactly; for the quadratic family that means
    each sampled row carries the factor m_i (the local objective is a sum,
    not a mean, over rows).
    """
    x = np.asarray(x, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.intp)
    a = shard.features[indices]
    y = shard.labels[indices]
    if isinstance(obj, LogisticObjective):
        weights = -y * _sigmoid(-(y * (a @ x)))
        return a.T @ weights / indices.shape[0] + _reg_gradient(obj, x)
    if isinstance(obj, QuadraticObjective):
        return shard.m * (a.T @ (a @ x - y)) / indices.shape[0]
    raise TypeError(f"unknown objective {type(obj).__name__}")


def minibatch_gradient(obj, shard, x, batch: int, stream: RngStream):
    """Draw a batch i.i.d. with replacement; return (gradient, indices)."""
    if not (1 <= batch):
        raise ValueError(f"batch size must be >= 1, got {batch}")
    indices = stream.generator().integers(0, shard.m, size=batch)
    return gradient_at_indices(obj, shard, x, indices), indices


def global_value(obj, shards, x) -> float:
    return float(np.mean([value(obj, s, x) for s in shards]))


def global_gradient(obj, shards, x) -> np.ndarray:
    g = np.zeros(np.asarray(x).shape[0])
    for s in shards:
        g += full_gradient(obj, s, x)
    return g / len(shards)


def full_gradient_matrix(obj, shards, xs: np.ndarray) -> np.ndarray:
    """Column i is the full local gradient of client i at ``xs[:, i]``.

    Vectorized across clients when all shards have equal sample counts
    (always true for synthetic quadratics), which matters in long runs.
    """
    n = len(shards)
    sizes = {s.m for s in shards}
    if len(sizes) == 1 and isinstance(obj, QuadraticObjective):
        a = np.stack([s.features for s in shards])  # (n, m, d)
        b = np.stack([s.labels for s in shards])  # (n, m)
        resid = np.einsum("nmd,dn->nm", a, xs) - b
        return np.einsum("nmd,nm->dn", a, resid)
    out = np.empty((xs.shape[0], n))
    for i, s in enumerate(shards):
        out[:, i] = full_gradient(obj, s, xs[:, i])
    return out


def smoothness_estimate(obj, shards) -> SmoothnessInfo:
    """Curvature constants used by the theoretical step-size rule.

    Logistic: L = (1/4) max_i lambda_max(A_i^T A_i)/m_i + 2*reg (the logistic
    Hessian is bounded by A^T A/(4m), the regularizer's by 2*reg).
    Quadratic: L = max_i lambda_max(A_i^T A_i) exactly, and the exact
    strong-convexity constant of the averaged Hessian.
    """
    if isinstance(obj, LogisticObjective):
        lam = max(
            float(symmetric_eigenvalues(s.features.T @ s.features)[0]) / s.m
            for s in shards
        )
        return SmoothnessInfo(lipschitz=max(lam / 4.0 + 2.0 * obj.reg, L_FLOOR))
    if isinstance(obj, QuadraticObjective):
        hessians = [s.features.T @ s.features for s in shards]
        l_max = max(float(symmetric_eigenvalues(h)[0]) for h in hessians)
        mean_h = sum(hessians) / len(hessians)
        mu = float(symmetric_eigenvalues(mean_h)[-1])
        return SmoothnessInfo(
            lipschitz=max(l_max, L_FLOOR), strong_convexity=max(mu, 0.0)
        )
    raise TypeError(f"unknown objective {type(obj).__name__}")


def accuracy(features, labels, x) -> float:
    """Classification accuracy of sign(a^T x), with sign(0) counted as +1."""
    pred = np.where(np.asarray(features) @ np.asarray(x) >= 0.0, 1.0, -1.0)
    return float(np.mean(pred == np.asarray(labels)))


def reference_minimum(obj, shards, x0=None, tol: float = 1e-10, max_rounds: int = 500000):
    """High-precision stationary value via full-gradient descent.

    Runs plain gradient descent with step 1/L until the global gradient norm
    drops below ``tol``.  Used to pin f* for objectives without a closed
    form; the result is a stationary point, which for the mildly nonconvex
    logistic objective is the relevant reference value.
    """
    info = smoothness_estimate(obj, shards)
    step = 1.0 / info.lipschitz
    d = shards[0].features.shape[1]
    x = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    for _ in range(max_rounds):
        g = global_gradient(obj, shards, x)
        if float(np.linalg.norm(g)) <= tol:
            break
        x -= step * g
    else:
        raise RuntimeError(
            f"reference minimum did not reach gradient norm {tol} in {max_rounds} rounds"
        )
    return x, global_value(obj, shards, x)
