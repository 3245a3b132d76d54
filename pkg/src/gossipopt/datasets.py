"""Datasets, client partitions, and synthetic problem instances.

The LIBSVM text format is parsed strictly: 1-based feature indices that must
be strictly increasing within a line, labels restricted to {+1, -1, 0} (0 is
folded into -1), and every malformed token reported with its line number.
Silent coercion here has a way of turning into unexplainable accuracy drops
three modules later.

Partitioning deliberately supports a pathological split: ``unshuffled`` sorts
samples by label before slicing into contiguous shards, so most clients see a
single class.  That is the heterogeneity stress regime the tracking-based
algorithms are built for; ``shuffled`` is the near-i.i.d. control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import DATA, RngStream


class DataError(ValueError):
    """A dataset file or shard specification is invalid."""


@dataclass(eq=False)
class Dataset:
    features: np.ndarray  # (m, d)
    labels: np.ndarray  # (m,)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-d, got ndim={self.features.ndim}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} samples"
            )

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(eq=False)
class Shard:
    """One client's slice of the data.

    For logistic problems ``features``/``labels`` are samples and +-1 labels;
    for quadratic problems they are the client's A_i and target vector b_i.
    """

    features: np.ndarray
    labels: np.ndarray
    owner: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)

    @property
    def m(self) -> int:
        return self.features.shape[0]


def parse_libsvm(text: str, d_hint: int = 0) -> Dataset:
    """Parse LIBSVM-formatted text into a dense Dataset.

    The feature count is max(d_hint, largest index seen); pass the full
    dimension as d_hint when parsing a subset whose trailing features never
    appear.
    """
    rows = []
    labels = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataError(f"line {lineno}: label {tokens[0]!r} is not numeric")
        if label not in (-1.0, 0.0, 1.0):
            raise DataError(f"line {lineno}: label {tokens[0]!r} is not one of +1, -1, 0")
        labels.append(1.0 if label == 1.0 else -1.0)
        entries = []
        prev_index = 0
        for token in tokens[1:]:
            idx_s, sep, val_s = token.partition(":")
            if not sep:
                raise DataError(f"line {lineno}: token {token!r} is not index:value")
            try:
                idx = int(idx_s)
            except ValueError:
                raise DataError(f"line {lineno}: index {idx_s!r} is not an integer")
            if idx < 1:
                raise DataError(f"line {lineno}: index {idx} must be >= 1")
            if idx <= prev_index:
                raise DataError(
                    f"line {lineno}: index {idx} is not strictly increasing "
                    f"(previous was {prev_index})"
                )
            try:
                val = float(val_s)
            except ValueError:
                raise DataError(f"line {lineno}: value {val_s!r} is not numeric")
            entries.append((idx, val))
            prev_index = idx
        max_index = max(max_index, prev_index)
        rows.append(entries)

    if not rows:
        raise DataError("no samples found")
    d = max(d_hint, max_index)
    features = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            features[i, idx - 1] = val
    return Dataset(features, np.asarray(labels))


def to_libsvm(ds: Dataset) -> str:
    """Serialize a Dataset back to LIBSVM text (zeros omitted, exact floats)."""
    lines = []
    for i in range(ds.m):
        parts = ["+1" if ds.labels[i] > 0 else "-1"]
        for j in np.nonzero(ds.features[i])[0]:
            parts.append(f"{j + 1}:{repr(float(ds.features[i, j]))}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _shard_sizes(m: int, n: int) -> list:
    base, extra = divmod(m, n)
    return [base + 1 if i < extra else base for i in range(n)]


def _slice_shards(ds: Dataset, order: np.ndarray, n: int) -> list:
    sizes = _shard_sizes(ds.m, n)
    shards = []
    start = 0
    for owner, size in enumerate(sizes):
        if size == 0:
            raise DataError(f"cannot split {ds.m} samples across {n} clients")
        take = order[start : start + size]
        shards.append(Shard(ds.features[take], ds.labels[take], owner))
        start += size
    return shards


def partition_unshuffled(ds: Dataset, n: int) -> list:
    """Label-sorted contiguous split: maximal client heterogeneity.

    Samples are stably sorted by (label, original position) and sliced into n
    contiguous shards; the first m mod n shards take one extra sample.
    """
    if n < 1:
        raise DataError(f"need at least 1 client, got n={n}")
    order = np.argsort(ds.labels, kind="stable")
    return _slice_shards(ds, order, n)


def partition_shuffled(ds: Dataset, n: int, seed: int) -> list:
    """Seeded random split: the near-i.i.d. control for partition_unshuffled."""
    if n < 1:
        raise DataError(f"need at least 1 client, got n={n}")
    gen = RngStream(seed).child(DATA, "shuffle").generator()
    order = gen.permutation(ds.m)
    return _slice_shards(ds, order, n)


@dataclass(eq=False)
class QuadraticInstance:
    """A synthetic least-squares problem with exact curvature constants."""

    shards: list
    d: int
    lipschitz: float  # max over clients of lambda_max(A_i^T A_i)
    strong_convexity: float  # lambda_min of the averaged Hessian
    minimizer: np.ndarray
    fstar: float
    client_minimizers: np.ndarray = field(repr=False)


def synth_quadratic(n: int, d: int, seed: int, cond: float) -> QuadraticInstance:
    """Heterogeneous quadratics f_i(x) = 0.5 ||A_i x - b_i||^2.

    Every client gets A_i = Q_i D with a shared diagonal D (squared singular
    values log-spaced across [1, cond]) and its own random rotation Q_i, so
    A_i^T A_i = D^2 exactly: the global Hessian equals D^2, L = cond and
    mu = 1 hold exactly rather than approximately.  Heterogeneity comes from
    the client minimizers x_i^* = A_i^+ b_i, drawn with pairwise distance
    >= 1; the global minimizer is their average and f* follows in closed
    form.
    """
    if n < 1 or d < 1:
        raise DataError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if cond < 1:
        raise DataError(f"condition number must be >= 1, got {cond}")
    gen = RngStream(seed).child(DATA, "quadratic").generator()

    if d == 1:
        sing_sq = np.array([cond])
    else:
        sing_sq = np.logspace(0.0, np.log10(cond), d) if cond > 1 else np.ones(d)
    diag = np.sqrt(sing_sq)

    targets = gen.normal(size=(n, d))
    if n > 1:
        dists = [
            float(np.linalg.norm(targets[i] - targets[j]))
            for i in range(n)
            for j in range(i + 1, n)
        ]
        closest = min(dists)
        if closest < 1.0:
            if closest == 0.0:
                raise DataError("degenerate draw: coincident client minimizers")
            targets = targets / closest

    shards = []
    for i in range(n):
        q, r = np.linalg.qr(gen.normal(size=(d, d)))
        q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
        a = q * diag  # Q_i D: scales column j by diag[j]
        shards.append(Shard(a, a @ targets[i], owner=i))

    minimizer = targets.mean(axis=0)
    fstar = float(
        0.5 * np.mean([np.sum((diag * (minimizer - targets[i])) ** 2) for i in range(n)])
    )
    lipschitz = float(np.max(sing_sq))
    mu = float(np.min(sing_sq))
    return QuadraticInstance(
        shards=shards,
        d=d,
        lipschitz=lipschitz,
        strong_convexity=mu,
        minimizer=minimizer,
        fstar=fstar,
        client_minimizers=targets,
    )


def synth_binary(m: int, d: int, seed: int, positive_fraction: float = 0.24) -> Dataset:
    """Synthetic sparse binary classification data in the a9a mold.

    Features are one-hot within ~14 groups (so each row has a fixed small
    number of active binary features), labels come from a planted linear
    scorer passed through a logistic link.  The class balance is controlled
    via an intercept chosen from the score quantile.  Used as the offline
    stand-in for LIBSVM census-style data in heterogeneity experiments.
    """
    if m < 2 or d < 2:
        raise DataError(f"need m >= 2 and d >= 2, got m={m}, d={d}")
    if not (0.0 < positive_fraction < 1.0):
        raise DataError(f"positive_fraction must be in (0, 1), got {positive_fraction}")
    gen = RngStream(seed).child(DATA, "binary").generator()

    n_groups = min(14, d)
    bounds = np.linspace(0, d, n_groups + 1).astype(int)
    features = np.zeros((m, d))
    for g in range(n_groups):
        lo, hi = bounds[g], bounds[g + 1]
        picks = lo + gen.integers(0, hi - lo, size=m)
        features[np.arange(m), picks] = 1.0

    w = gen.normal(size=d)
    scores = features @ w
    intercept = -np.quantile(scores, 1.0 - positive_fraction)
    prob_pos = 1.0 / (1.0 + np.exp(-2.0 * (scores + intercept)))
    labels = np.where(gen.random(m) < prob_pos, 1.0, -1.0)
    return Dataset(features, labels)
