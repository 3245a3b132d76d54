"""Decentralized optimization loops with compressed communication.

All algorithms operate on d x n state matrices (one column per node) and a
shared gossip matrix W.  The compressed tracking method ("beer") maintains

* X: iterates, updated as X' = X + gamma H (W - I) - eta V,
* H: each node's public surrogate of X, advanced by compressed residuals
  H' = H + C(X' - H),
* V: gradient-tracking directions,
  V' = V + gamma G (W - I) + g(X'; xi') - g(X; xi),
* G: the public surrogate of V, advanced the same way as H.

The single most load-bearing detail is the gradient cache: the subtrahend
g(X; xi) in the V update must be the *stored draw from the previous round*,
not a fresh evaluation at X.  Reusing the draw telescopes the V update so
that mean(V) equals the mean of the current stochastic gradients exactly
(to roundoff) at every round; re-sampling silently breaks that identity and
with it every downstream convergence bound.  ``AlgoState.cached_grad`` and
``cached_indices`` exist for exactly this purpose, and the baselines follow
the same discipline so that their trajectories are comparable draw for draw.

Baselines: "choco" drops G and replaces the V update with fresh local
gradients; "dsgd" is plain gossip SGD, X' = X W - eta g(X; xi); "d2" applies
the variance-correction X' = (2X - X_prev - eta (g - g_prev)) W after a
dsgd-style first round.  The last two are uncompressed.

Every step function is pure: it consumes an ``AlgoState`` and returns a new
one.  Per-node randomness comes from substreams keyed by (purpose, round,
node), so results are independent of evaluation order; pass an executor to
evaluate per-node minibatch gradients in parallel without changing a bit of
the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compression import Compressor, Identity, compress_matrix
from .oracles import full_gradient_matrix, minibatch_gradient
from .rng import COMPRESS_G, COMPRESS_H, GRAD, RngStream
from .topology import MixingMatrix

ALGORITHMS = ("beer", "choco", "dsgd", "d2")

# Broadcasts per node per round: the tracking method sends two compressed
# messages (state residual and direction residual), choco sends one, the
# uncompressed baselines exchange one dense vector.
MESSAGES_PER_ROUND = {"beer": 2, "choco": 1, "dsgd": 1, "d2": 1}


@dataclass(eq=False)
class HyperParams:
    eta: float
    gamma: float
    batch: int | None = None  # None means full local gradients

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.batch is not None and self.batch < 1:
            raise ValueError(f"batch must be >= 1 or None, got {self.batch}")


@dataclass(eq=False)
class AlgoState:
    x: np.ndarray  # iterates, d x n
    v: np.ndarray  # tracking directions (or current gradients for baselines)
    h: np.ndarray  # compressed surrogate of x
    g: np.ndarray  # compressed surrogate of v
    cached_grad: np.ndarray  # the stochastic gradients drawn at the current x
    cached_indices: tuple  # per-node index draws (None entries in full mode)
    round: int
    prev_x: np.ndarray | None = None  # previous iterates (d2 only)
    prev_grad: np.ndarray | None = None  # previous round's draw (d2 only)

    @property
    def n(self) -> int:
        return self.x.shape[1]


def _client_grads(obj, shards, xs, batch, stream, round_idx, executor=None):
    """Per-node stochastic gradients at columns of xs, plus the index draws.

    Full mode consumes no randomness.  Minibatch draws come from the
    substream (GRAD, round, node), so any execution order -- including the
    executor's threads -- produces identical results.
    """
    n = len(shards)
    if batch is None:
        return full_gradient_matrix(obj, shards, xs), (None,) * n

    def one(i):
        return minibatch_gradient(
            obj, shards[i], xs[:, i], batch, stream.child(GRAD, round_idx, i)
        )

    if executor is None:
        results = [one(i) for i in range(n)]
    else:
        results = list(executor.map(one, range(n)))
    grads = np.empty_like(xs)
    for i, (g, _) in enumerate(results):
        grads[:, i] = g
    return grads, tuple(idx for _, idx in results)


def init_state(obj, shards, x0, hp: HyperParams, stream: RngStream, executor=None) -> AlgoState:
    """Common starting state: consensus at x0, zero surrogates, round-0 draw."""
    x0 = np.asarray(x0, dtype=np.float64)
    n = len(shards)
    xs = np.tile(x0[:, None], (1, n))
    grads, indices = _client_grads(obj, shards, xs, hp.batch, stream, 0, executor)
    return AlgoState(
        x=xs,
        v=grads.copy(),
        h=np.zeros_like(xs),
        g=np.zeros_like(xs),
        cached_grad=grads,
        cached_indices=indices,
        round=0,
    )


def beer_step(
    state: AlgoState,
    obj,
    shards,
    mix: MixingMatrix,
    comp: Compressor,
    hp: HyperParams,
    stream: RngStream,
    executor=None,
) -> AlgoState:
    t = state.round
    wmi = mix.w_minus_i
    x_new = state.x + hp.gamma * (state.h @ wmi) - hp.eta * state.v

    if isinstance(comp, Identity):
        # C(z) = z makes H' = X' in exact arithmetic; assigning directly
        # keeps the equality exact in floats too instead of leaking ulps
        # through H + (X' - H).
        h_new = x_new.copy()
    else:
        h_new = state.h + compress_matrix(comp, x_new - state.h, stream.child(COMPRESS_H, t))

    grads, indices = _client_grads(obj, shards, x_new, hp.batch, stream, t + 1, executor)
    v_new = state.v + hp.gamma * (state.g @ wmi) + grads - state.cached_grad

    if isinstance(comp, Identity):
        g_new = v_new.copy()
    else:
        g_new = state.g + compress_matrix(comp, v_new - state.g, stream.child(COMPRESS_G, t))

    return AlgoState(
        x=x_new,
        v=v_new,
        h=h_new,
        g=g_new,
        cached_grad=grads,
        cached_indices=indices,
        round=t + 1,
    )


def choco_step(
    state: AlgoState,
    obj,
    shards,
    mix: MixingMatrix,
    comp: Compressor,
    hp: HyperParams,
    stream: RngStream,
    executor=None,
) -> AlgoState:
    """Compressed gossip without gradient tracking.

    Identical to :func:`beer_step` in the X and H updates; the direction is
    simply the fresh local stochastic gradient, so under heterogeneous data
    the method stalls at a bias floor that the tracking update removes.
    """
    t = state.round
    x_new = state.x + hp.gamma * (state.h @ mix.w_minus_i) - hp.eta * state.v
    if isinstance(comp, Identity):
        h_new = x_new.copy()
    else:
        h_new = state.h + compress_matrix(comp, x_new - state.h, stream.child(COMPRESS_H, t))
    grads, indices = _client_grads(obj, shards, x_new, hp.batch, stream, t + 1, executor)
    return AlgoState(
        x=x_new,
        v=grads.copy(),
        h=h_new,
        g=state.g,
        cached_grad=grads,
        cached_indices=indices,
        round=t + 1,
    )


def dsgd_step(
    state: AlgoState,
    obj,
    shards,
    mix: MixingMatrix,
    comp: Compressor,
    hp: HyperParams,
    stream: RngStream,
    executor=None,
) -> AlgoState:
    """Gossip SGD: X' = X W - eta g(X; xi), uncompressed."""
    t = state.round
    x_new = state.x @ mix.w - hp.eta * state.cached_grad
    grads, indices = _client_grads(obj, shards, x_new, hp.batch, stream, t + 1, executor)
    return AlgoState(
        x=x_new,
        v=grads.copy(),
        h=state.h,
        g=state.g,
        cached_grad=grads,
        cached_indices=indices,
        round=t + 1,
        prev_x=state.x,
        prev_grad=state.cached_grad,
    )


def d2_step(
    state: AlgoState,
    obj,
    shards,
    mix: MixingMatrix,
    comp: Compressor,
    hp: HyperParams,
    stream: RngStream,
    executor=None,
) -> AlgoState:
    """Decentralized variance correction; falls back to dsgd on round 0.

    X' = (2X - X_prev - eta (g(X; xi) - g_prev)) W, where g_prev is the
    previous round's stored draw.  With identical shards the correction
    cancels and the trajectory coincides with dsgd's.
    """
    if state.prev_x is None:
        return dsgd_step(state, obj, shards, mix, comp, hp, stream, executor)
    t = state.round
    combined = (
        2.0 * state.x
        - state.prev_x
        - hp.eta * (state.cached_grad - state.prev_grad)
    )
    x_new = combined @ mix.w
    grads, indices = _client_grads(obj, shards, x_new, hp.batch, stream, t + 1, executor)
    return AlgoState(
        x=x_new,
        v=grads.copy(),
        h=state.h,
        g=state.g,
        cached_grad=grads,
        cached_indices=indices,
        round=t + 1,
        prev_x=state.x,
        prev_grad=state.cached_grad,
    )


STEP_FUNCTIONS = {
    "beer": beer_step,
    "choco": choco_step,
    "dsgd": dsgd_step,
    "d2": d2_step,
}


def theoretical_stepsizes(
    alpha: float,
    rho: float,
    c: float,
    lipschitz: float,
    c_gamma: float | None = None,
    c_eta: float | None = None,
) -> tuple[float, float]:
    """Step sizes gamma = c_gamma * alpha * rho and eta = c_eta * gamma * rho^2 / L.

    Defaults c_gamma = 1/(6 sqrt(C)) and c_eta = 1/9 guarantee the two
    contraction margins

        1 - alpha/2 + 6 gamma^2 C / alpha <= 1 - alpha/4,
        1 - gamma rho / 2 + 18 L^2 eta^2 / (gamma rho) <= 1 - gamma rho / 4.

    gamma is clamped into (0, 1]; C = 0 (single node) forces gamma = 1.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not (0.0 < rho <= 1.0):
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if c < 0:
        raise ValueError(f"C must be >= 0, got {c}")
    if not (lipschitz > 0):
        raise ValueError(f"L must be > 0, got {lipschitz}")
    if c_eta is None:
        c_eta = 1.0 / 9.0
    if c <= 0.0:
        gamma = 1.0
    else:
        if c_gamma is None:
            c_gamma = 1.0 / (6.0 * math.sqrt(c))
        gamma = min(1.0, c_gamma * alpha * rho)
    eta = c_eta * gamma * rho**2 / lipschitz
    return gamma, eta
