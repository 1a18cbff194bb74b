"""Vector arithmetic, bounded integer distributions, and seeded streams.

Everything downstream (geometry, policies, simulation) builds on the three
primitives here: exact finite pmfs, the inner/norm/angle trio, and
reproducible random streams keyed by ``(seed, stream_id)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, DomainError

# Probability mass / moment identities must hold to this tolerance.
PROB_TOL = 1e-12
# Geometric identities (unit normals, orthogonality, residuals).
GEOM_TOL = 1e-9

Vector = Sequence[float]


# -------- vector operations --------

def inner(x: Vector, y: Vector) -> float:
    """Euclidean inner product of two equal-length vectors."""
    if len(x) != len(y):
        raise DimensionError(f"length mismatch: {len(x)} vs {len(y)}")
    return float(sum(float(a) * float(b) for a, b in zip(x, y)))


def norm(x: Vector) -> float:
    return math.sqrt(inner(x, x))


def angle(x: Vector, y: Vector) -> float:
    """Angle in radians between two nonzero vectors.

    The cosine is clamped into [-1, 1] before arccos; near-parallel inputs
    otherwise fall out of the domain by rounding.
    """
    nx, ny = norm(x), norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DomainError("angle undefined for the zero vector")
    c = inner(x, y) / (nx * ny)
    return math.acos(min(1.0, max(-1.0, c)))


# -------- finite distributions --------

def _moments(values: Sequence[float], probs: Sequence[float]) -> tuple[float, float]:
    mean = float(sum(v * p for v, p in zip(values, probs)))
    var = float(sum((v - mean) ** 2 * p for v, p in zip(values, probs)))
    return mean, var


@dataclass(frozen=True)
class BoundedIntDist:
    """Finite-support pmf on nonnegative integers with exact moments.

    ``values`` are strictly increasing; ``probs`` sum to one within
    PROB_TOL. ``mean``/``variance`` are the exact pmf moments and
    ``max_value`` the largest support point, so boundedness is structural.
    """

    values: tuple[int, ...]
    probs: tuple[float, ...]
    mean: float = field(init=False)
    variance: float = field(init=False)
    max_value: int = field(init=False)

    def __post_init__(self):
        if not self.values:
            raise DomainError("empty support")
        if len(self.values) != len(self.probs):
            raise DomainError("values/probs length mismatch")
        prev = -1
        for v in self.values:
            if not isinstance(v, int) or v < 0:
                raise DomainError(f"support must be nonnegative integers, got {v!r}")
            if v <= prev:
                raise DomainError("support must be strictly increasing")
            prev = v
        if any(p < -PROB_TOL for p in self.probs):
            raise DomainError("negative probability")
        total = sum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        mean, var = _moments(self.values, self.probs)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "max_value", self.values[-1])

    # ---- constructors ----

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, float]) -> "BoundedIntDist":
        items = sorted((int(v), float(p)) for v, p in pmf.items() if p != 0.0)
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @classmethod
    def point(cls, v: int) -> "BoundedIntDist":
        return cls((int(v),), (1.0,))

    @classmethod
    def bernoulli(cls, p: float) -> "BoundedIntDist":
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"bernoulli parameter {p} outside [0, 1]")
        if p == 0.0:
            return cls.point(0)
        if p == 1.0:
            return cls.point(1)
        return cls((0, 1), (1.0 - p, p))

    @classmethod
    def binomial(cls, n: int, p: float) -> "BoundedIntDist":
        if n < 0:
            raise DomainError("binomial requires n >= 0")
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"binomial parameter {p} outside [0, 1]")
        if p == 0.0:
            return cls.point(0)
        if p == 1.0:
            return cls.point(n)
        pmf = {k: math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)}
        return cls.from_pmf(pmf)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "BoundedIntDist":
        """Uniform on the integer range [lo, hi] inclusive."""
        if hi < lo:
            raise DomainError("uniform requires lo <= hi")
        n = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / n,) * n)

    # ---- views ----

    @property
    def pmf(self) -> dict[int, float]:
        return dict(zip(self.values, self.probs))

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(np.asarray(self.probs, dtype=float))
        cum[-1] = 1.0  # absorb rounding so inverse-cdf never overruns
        return cum

    def sample(self, stream: "RandomStream") -> int:
        u = stream.generator.random()
        idx = int(np.searchsorted(self.cumulative(), u, side="right"))
        return self.values[min(idx, len(self.values) - 1)]

    def sample_array(self, uniforms: np.ndarray, cum: np.ndarray | None = None) -> np.ndarray:
        """Inverse-cdf transform of uniforms already drawn elsewhere."""
        if cum is None:
            cum = self.cumulative()
        idx = np.searchsorted(cum, uniforms, side="right")
        np.clip(idx, 0, len(self.values) - 1, out=idx)
        return np.asarray(self.values, dtype=np.int64)[idx]


@dataclass(frozen=True)
class FiniteRealDist:
    """Finite pmf over real values. Same moment contract as BoundedIntDist
    but without the integer-support restriction; used for derived
    quantities such as per-state face offsets."""

    values: tuple[float, ...]
    probs: tuple[float, ...]
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        if not self.values:
            raise DomainError("empty support")
        if len(self.values) != len(self.probs):
            raise DomainError("values/probs length mismatch")
        total = sum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        mean, var = _moments(self.values, self.probs)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def pmf(self) -> dict[float, float]:
        return dict(zip(self.values, self.probs))


def dist_moments(d: BoundedIntDist | FiniteRealDist) -> tuple[float, float]:
    """Exact (mean, variance) of a finite pmf."""
    return d.mean, d.variance


def sample(d: BoundedIntDist, stream: "RandomStream") -> int:
    return d.sample(stream)


# -------- random streams --------

@dataclass
class RandomStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Identical keys replay identical sequences; distinct stream_ids give
    statistically independent sequences. Not safe to share between
    concurrent consumers; each replication owns its own stream.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._generator = np.random.default_rng(ss)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def choice_index(self, n: int) -> int:
        """Uniform index in range(n)."""
        return int(self._generator.integers(n))


def as_float_tuple(x: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in x)
