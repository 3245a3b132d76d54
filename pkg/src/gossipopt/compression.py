"""Contractive message compressors.

Every compressor C here satisfies the contraction property

    E ||C(x) - x||^2 <= (1 - alpha) ||x||^2,   alpha in (0, 1],

which is what the surrogate-tracking updates in :mod:`gossipopt.algorithms`
need to stay stable.  Biased operators (top-k, and unbiased operators
rescaled by 1/(1+omega)) satisfy it directly; the stochastic quantizer
satisfies it with alpha = 1/tau after its norm rescaling.

Randomness is always drawn from an explicit :class:`~gossipopt.rng.RngStream`
handed in by the caller, never from global state, so compressing the columns
of a matrix in any order (or in parallel) gives identical results.

Per-message bit costs use a fixed accounting convention: 32-bit floats for
any real scalar, ceil(log2 d) bits per transmitted index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_vector
from .rng import RngStream


class Compressor:
    """Interface: compress a vector, report alpha and per-message bits."""

    def compress(self, x, stream: RngStream) -> np.ndarray:
        raise NotImplementedError

    def alpha(self, d: int) -> float:
        raise NotImplementedError

    def message_bits(self, d: int) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(Compressor):
    def compress(self, x, stream: RngStream) -> np.ndarray:
        return as_vector(x).copy()

    def alpha(self, d: int) -> float:
        return 1.0

    def message_bits(self, d: int) -> int:
        return 32 * d

    def __str__(self):
        return "identity"


@dataclass(frozen=True)
class Gsgd(Compressor):
    """Stochastic b-bit quantizer, rescaled to be contractive.

    Each coordinate is randomly rounded onto a 2^(b-1)-level grid of the
    normalized magnitude, keeping the sign; the whole vector is then scaled
    by 1/tau with

        tau = 1 + min(d / 2^(2(b-1)), sqrt(d) / 2^(b-1)),

    which turns the unbiased quantizer into an alpha = 1/tau contraction.
    With b = 1 the grid degenerates and the output is a scaled sign vector.
    """

    bits: int

    def __post_init__(self):
        if not (1 <= self.bits <= 16):
            raise ValueError(f"gsgd bit width must be in 1..16, got {self.bits}")

    @staticmethod
    def tau(d: int, bits: int) -> float:
        levels = 2.0 ** (bits - 1)
        return 1.0 + min(d / levels**2, math.sqrt(d) / levels)

    def compress(self, x, stream: RngStream) -> np.ndarray:
        x = as_vector(x)
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            return np.zeros_like(x)
        levels = 2.0 ** (self.bits - 1)
        u = stream.generator().random(x.shape[0])
        quantized = np.floor(levels * np.abs(x) / norm + u)
        return (norm / self.tau(x.shape[0], self.bits)) * np.sign(x) * quantized / levels

    def alpha(self, d: int) -> float:
        return 1.0 / self.tau(d, self.bits)

    def message_bits(self, d: int) -> int:
        return 32 + d * self.bits

    def __str__(self):
        return f"gsgd:{self.bits}"


def _index_bits(d: int) -> int:
    return math.ceil(math.log2(d)) if d > 1 else 0


@dataclass(frozen=True)
class TopK(Compressor):
    """Keep the k largest-magnitude coordinates, zero the rest.

    Ties are broken toward the lower index so the operator is fully
    deterministic.  Satisfies the contraction with alpha = k/d surely,
    not just in expectation.
    """

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"topk needs k >= 1, got {self.k}")

    def compress(self, x, stream: RngStream) -> np.ndarray:
        x = as_vector(x)
        if self.k >= x.shape[0]:
            return x.copy()
        order = np.argsort(-np.abs(x), kind="stable")
        out = np.zeros_like(x)
        keep = order[: self.k]
        out[keep] = x[keep]
        return out

    def alpha(self, d: int) -> float:
        return min(1.0, self.k / d)

    def message_bits(self, d: int) -> int:
        return self.k * (_index_bits(d) + 32)

    def __str__(self):
        return f"topk:{self.k}"


@dataclass(frozen=True)
class RandKUnbiased(Compressor):
    """Keep k uniformly chosen coordinates, rescaled by d/k to be unbiased.

    Unbiased with variance bound E||C(x) - x||^2 = (d/k - 1) ||x||^2, so it
    is *not* contractive on its own; wrap it in :class:`Scaled` (or use
    :class:`RandK`) before feeding it to the algorithms.
    """

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"randk needs k >= 1, got {self.k}")

    def omega(self, d: int) -> float:
        return d / min(self.k, d) - 1.0

    def compress(self, x, stream: RngStream) -> np.ndarray:
        x = as_vector(x)
        d = x.shape[0]
        if self.k >= d:
            return x.copy()
        keep = stream.generator().choice(d, size=self.k, replace=False)
        out = np.zeros_like(x)
        out[keep] = (d / self.k) * x[keep]
        return out

    def alpha(self, d: int) -> float:
        raise ValueError("unbiased randk is not contractive; wrap it in Scaled")

    def message_bits(self, d: int) -> int:
        return self.k * (_index_bits(d) + 32)


def bias_correct(omega: float) -> float:
    """Scaling factor 1/(1+omega) turning an omega-variance-bounded unbiased
    operator into an alpha = 1/(1+omega) contraction."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    return 1.0 / (1.0 + omega)


@dataclass(frozen=True)
class Scaled(Compressor):
    """An unbiased operator with variance bound omega, shrunk by 1/(1+omega)."""

    inner: Compressor
    omega: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")

    def compress(self, x, stream: RngStream) -> np.ndarray:
        return bias_correct(self.omega) * self.inner.compress(x, stream)

    def alpha(self, d: int) -> float:
        return bias_correct(self.omega)

    def message_bits(self, d: int) -> int:
        return self.inner.message_bits(d)


@dataclass(frozen=True)
class RandK(Compressor):
    """Keep k uniformly chosen coordinates unscaled.

    Equal to Scaled(RandKUnbiased(k), omega = d/k - 1): the d/k inflation and
    the 1/(1+omega) shrinkage cancel exactly.  Contracts with alpha = k/d in
    expectation.
    """

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"randk needs k >= 1, got {self.k}")

    def compress(self, x, stream: RngStream) -> np.ndarray:
        x = as_vector(x)
        d = x.shape[0]
        if self.k >= d:
            return x.copy()
        keep = stream.generator().choice(d, size=self.k, replace=False)
        out = np.zeros_like(x)
        out[keep] = x[keep]
        return out

    def alpha(self, d: int) -> float:
        return min(1.0, self.k / d)

    def message_bits(self, d: int) -> int:
        return self.k * (_index_bits(d) + 32)

    def __str__(self):
        return f"randk:{self.k}"


def parse_compressor(spec: str) -> Compressor:
    """Build a compressor from its config string.

    Accepted forms: ``identity``, ``gsgd:<bits>``, ``topk:<k>``,
    ``randk:<k>``.
    """
    if not isinstance(spec, str):
        raise ValueError(f"compressor spec must be a string, got {type(spec).__name__}")
    name, _, arg = spec.partition(":")
    if name == "identity":
        if arg:
            raise ValueError(f"identity takes no parameter, got {spec!r}")
        return Identity()
    if name in ("gsgd", "topk", "randk"):
        try:
            value = int(arg)
        except ValueError:
            raise ValueError(f"bad compressor spec {spec!r}: parameter must be an integer")
        if name == "gsgd":
            return Gsgd(value)
        if name == "topk":
            return TopK(value)
        return RandK(value)
    raise ValueError(f"unknown compressor {spec!r}")


def compress_matrix(comp: Compressor, m, stream: RngStream) -> np.ndarray:
    """Compress each column j with the independent substream ``stream.child(j)``.

    Column j of the output equals ``comp.compress(m[:, j], stream.child(j))``
    exactly, so per-column work can be farmed out in any order without
    changing the result.
    """
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    for j in range(m.shape[1]):
        out[:, j] = comp.compress(m[:, j], stream.child(j))
    return out
