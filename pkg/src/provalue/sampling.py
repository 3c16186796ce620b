"""Coalitions, size-stratified subset distributions, and samplers.

Players are 0-based inside the library; JSON uses sorted 1-based index
arrays. Batches of subsets travel as boolean ``(m, n)`` membership
matrices, which is what every game and estimator consumes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from .weights import WeightVector, log_comb

MAX_ENUMERATION_PLAYERS = 25
MAX_PLAYERS = 128


class ZeroDensityError(ZeroDivisionError):
    """A subset has zero probability under the sampling distribution."""


@dataclass(frozen=True)
class Subset:
    """A coalition as an ``n``-bit mask (bit i set iff player i is present)."""

    bits: int
    n: int
    size: int = field(init=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.n <= MAX_PLAYERS:
            raise ValueError(f"n must be in 0..{MAX_PLAYERS}, got {self.n}")
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bits {self.bits:#x} exceed width n={self.n}")
        object.__setattr__(self, "size", self.bits.bit_count())

    @classmethod
    def from_players(cls, players, n: int) -> "Subset":
        bits = 0
        for i in players:
            if not 0 <= i < n:
                raise ValueError(f"player {i} out of range for n={n}")
            bits |= 1 << int(i)
        return cls(bits, n)

    @classmethod
    def from_members(cls, members) -> "Subset":
        members = np.asarray(members, dtype=bool)
        return cls.from_players(np.flatnonzero(members), members.shape[0])

    @classmethod
    def full(cls, n: int) -> "Subset":
        return cls((1 << n) - 1, n)

    def __contains__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __len__(self) -> int:
        return self.size

    def players(self) -> list[int]:
        return [i for i in range(self.n) if self.bits >> i & 1]

    def members(self) -> np.ndarray:
        return np.array([self.bits >> i & 1 for i in range(self.n)], dtype=bool)

    def add(self, i: int) -> "Subset":
        return Subset(self.bits | 1 << i, self.n)

    def to_json(self) -> list[int]:
        return [i + 1 for i in self.players()]

    @classmethod
    def from_json(cls, players: list[int], n: int) -> "Subset":
        return cls.from_players([p - 1 for p in players], n)


def member_keys(members: np.ndarray) -> list[bytes]:
    """Hashable per-row keys for a boolean membership matrix."""
    packed = np.packbits(np.asarray(members, dtype=bool), axis=1)
    return [row.tobytes() for row in packed]


def members_to_subsets(members: np.ndarray) -> list[Subset]:
    members = np.asarray(members, dtype=bool)
    n = members.shape[1]
    weights = [1 << i for i in range(n)]
    return [Subset(sum(w for w, b in zip(weights, row) if b), n) for row in members.tolist()]


def subsets_to_members(subsets, n: int) -> np.ndarray:
    out = np.zeros((len(subsets), n), dtype=bool)
    for r, S in enumerate(subsets):
        for i in S.players():
            out[r, i] = True
    return out


@dataclass(frozen=True, eq=False)
class SizeDistribution:
    """Subset law that is uniform within each size: D(S) = q(|S|) / C(n, |S|)."""

    n: int
    log_q: np.ndarray

    def __post_init__(self):
        log_q = np.array(self.log_q, dtype=float)
        if log_q.shape != (self.n + 1,):
            raise ValueError(f"log_q needs {self.n + 1} entries, got {log_q.shape}")
        if np.any(np.isnan(log_q)) or np.all(np.isneginf(log_q)):
            raise ValueError("size distribution has no mass")
        log_q = log_q - logsumexp(log_q)
        log_q.setflags(write=False)
        object.__setattr__(self, "log_q", log_q)

    @classmethod
    def from_subset_weights(cls, n: int, log_weight) -> "SizeDistribution":
        """Distribution giving each subset of size s mass proportional to exp(log_weight[s])."""
        log_weight = np.asarray(log_weight, dtype=float)
        return cls(n, log_comb(n, np.arange(n + 1)) + log_weight)

    @classmethod
    def uniform(cls, n: int) -> "SizeDistribution":
        return cls.from_subset_weights(n, np.zeros(n + 1))

    @classmethod
    def uniform_sizes(cls, n: int, lo: int = 0, hi: int | None = None) -> "SizeDistribution":
        """Equal mass on each size in lo..hi (inclusive)."""
        hi = n if hi is None else hi
        log_q = np.full(n + 1, -np.inf)
        log_q[lo : hi + 1] = 0.0
        return cls(n, log_q)

    @property
    def q(self) -> np.ndarray:
        return np.exp(self.log_q)

    def log_density(self, sizes) -> np.ndarray:
        sizes = np.asarray(sizes)
        return self.log_q[sizes] - log_comb(self.n, sizes)

    def total_mass(self) -> float:
        return float(np.exp(logsumexp(self.log_q)))

    def to_json(self) -> dict:
        return {"n": self.n, "q": self.q.tolist()}


def default_msr_distribution(w: WeightVector) -> SizeDistribution:
    """Per-subset mass proportional to sqrt(p_s^2 (1 - s/n) + p_{s-1}^2 s/n)."""
    n = w.n
    s = np.arange(n + 1)
    pad = w.p_padded
    # ratios in log space keep large-n Shapley weights finite
    with np.errstate(divide="ignore"):
        log_inside = np.log(pad[s + 1]) * 2 + np.log1p(-s / n)
        log_outside = np.log(pad[s]) * 2 + np.log(s / n)
    log_radical = 0.5 * np.logaddexp(log_inside, log_outside)
    return SizeDistribution.from_subset_weights(n, log_radical)


def subset_density(dist: SizeDistribution, S) -> float:
    size = S.size if isinstance(S, Subset) else int(np.sum(S))
    if size > dist.n:
        raise ValueError(f"subset of size {size} for n={dist.n}")
    log_d = float(dist.log_density(size))
    if np.isneginf(log_d):
        raise ZeroDensityError(f"size {size} has zero density")
    return float(np.exp(log_d))


def log_densities(dist: SizeDistribution, members: np.ndarray) -> np.ndarray:
    """log D(S) per row; raises ZeroDensityError if any row has zero density."""
    log_d = dist.log_density(np.asarray(members).sum(axis=1))
    if np.any(np.isneginf(log_d)):
        raise ZeroDensityError("batch contains a subset with zero density")
    return log_d


@dataclass(frozen=True, eq=False)
class SampleBatch:
    members: np.ndarray
    replacement: bool
    distribution: SizeDistribution
    seed: object = None

    def __len__(self):
        return self.members.shape[0]

    @property
    def subsets(self) -> list[Subset]:
        return members_to_subsets(self.members)

    def to_json(self) -> dict:
        return {
            "replacement": self.replacement,
            "subsets": [S.to_json() for S in self.subsets],
        }


def uniform_members_of_size(sizes: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One uniformly random subset of ``[n]`` per requested size."""
    sizes = np.asarray(sizes)
    if n == 0:
        return np.zeros((sizes.shape[0], 0), dtype=bool)
    keys = rng.random((sizes.shape[0], n))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    return ranks < sizes[:, None]


def _draw(dist: SizeDistribution, m: int, rng: np.random.Generator) -> np.ndarray:
    sizes = rng.choice(dist.n + 1, size=m, p=dist.q)
    return uniform_members_of_size(sizes, dist.n, rng)


def sample_subsets(dist: SizeDistribution, m: int, replacement: bool = True, seed=None) -> SampleBatch:
    if m < 1:
        raise ValueError(f"need m >= 1 samples, got {m}")
    rng = np.random.default_rng(seed)
    if replacement:
        return SampleBatch(_draw(dist, m, rng), True, dist, seed)

    n = dist.n
    if n > MAX_ENUMERATION_PLAYERS:
        raise ValueError(f"sampling without replacement supports n <= {MAX_ENUMERATION_PLAYERS}")
    support = int(round(sum(np.exp(log_comb(n, s)) for s in range(n + 1) if dist.log_q[s] > -np.inf)))
    if m > support:
        raise ValueError(f"cannot draw {m} distinct subsets from a support of {support}")
    seen: set[bytes] = set()
    rows = []
    while len(rows) < m:
        chunk = _draw(dist, max(2 * (m - len(rows)), 16), rng)
        for key, row in zip(member_keys(chunk), chunk):
            if key not in seen:
                seen.add(key)
                rows.append(row)
                if len(rows) == m:
                    break
    return SampleBatch(np.array(rows, dtype=bool).reshape(m, n), False, dist, seed)


def all_members(n: int) -> np.ndarray:
    """All 2^n membership rows in ascending bitmask order."""
    if not 0 <= n <= MAX_ENUMERATION_PLAYERS:
        raise ValueError(f"enumeration supports 0 <= n <= {MAX_ENUMERATION_PLAYERS}, got {n}")
    masks = np.arange(2**n, dtype=np.int64)
    return (masks[:, None] >> np.arange(n)) & 1 == 1


def enumerate_subsets(n: int) -> Iterator[Subset]:
    if not 0 <= n <= MAX_ENUMERATION_PLAYERS:
        raise ValueError(f"enumeration supports 0 <= n <= {MAX_ENUMERATION_PLAYERS}, got {n}")
    return (Subset(bits, n) for bits in range(2**n))


def sample_permutations(n: int, count: int, seed=None) -> np.ndarray:
    """``count`` uniform permutations of 0..n-1 as rows of an int array."""
    if count < 1:
        raise ValueError(f"need count >= 1, got {count}")
    rng = np.random.default_rng(seed)
    return rng.permuted(np.tile(np.arange(n), (count, 1)), axis=1)
