"""Probabilistic weight vectors p_0..p_{n-1} and the MSR sample coefficient.

Weights are stored as natural logs so that Shapley weights for large n
(which underflow near |S| = n/2) stay representable. Out-of-range queries
p_{-1} and p_n are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import betaln, gammaln, logsumexp


def log_comb(n, k):
    """ln C(n, k) for array-like n, k with 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@dataclass(frozen=True)
class WeightFamily:
    """One of ``shapley``, ``banzhaf``, ``beta`` (alpha, beta) or ``wbanzhaf`` (q)."""

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        kind = self.kind
        if kind in ("shapley", "banzhaf"):
            if self.params:
                raise ValueError(f"{kind} takes no parameters, got {self.params}")
        elif kind == "beta":
            if len(self.params) != 2:
                raise ValueError("beta family needs (alpha, beta)")
            a, b = self.params
            if not (a >= 1 and b >= 1):
                raise ValueError(f"beta Shapley needs alpha, beta >= 1, got alpha={a}, beta={b}")
        elif kind == "wbanzhaf":
            if len(self.params) != 1:
                raise ValueError("wbanzhaf family needs a single q")
            (q,) = self.params
            if not 0 < q < 1:
                raise ValueError(f"weighted Banzhaf needs q in (0, 1), got {q}")
        else:
            raise ValueError(f"unknown weight family {kind!r}")

    @classmethod
    def shapley(cls):
        return cls("shapley")

    @classmethod
    def banzhaf(cls):
        return cls("banzhaf")

    @classmethod
    def beta(cls, alpha: float, beta: float):
        return cls("beta", (float(alpha), float(beta)))

    @classmethod
    def weighted_banzhaf(cls, q: float):
        return cls("wbanzhaf", (float(q),))

    @classmethod
    def parse(cls, text: str) -> "WeightFamily":
        """Parse ``shapley``, ``banzhaf``, ``beta:A,B`` or ``wbanzhaf:Q``."""
        name, _, rest = text.strip().partition(":")
        name = name.lower()
        try:
            params = tuple(float(t) for t in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise ValueError(f"bad weight family parameters in {text!r}") from exc
        return cls(name, params)

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)

    @property
    def label(self) -> str:
        """Short label in the B(a,b) / WB(q) style used for result tables."""
        if self.kind == "shapley":
            return "Shapley"
        if self.kind == "banzhaf":
            return "Banzhaf"
        if self.kind == "beta":
            return "B({:g},{:g})".format(*self.params)
        return "WB({:g})".format(*self.params)


#: The twelve families used in the probabilistic-value benchmark tables.
TABLE_FAMILIES = (
    WeightFamily.beta(1, 1),
    WeightFamily.beta(2, 2),
    WeightFamily.beta(4, 4),
    WeightFamily.beta(8, 8),
    WeightFamily.beta(1, 2),
    WeightFamily.beta(1, 4),
    WeightFamily.beta(1, 8),
    WeightFamily.weighted_banzhaf(0.5),
    WeightFamily.weighted_banzhaf(0.6),
    WeightFamily.weighted_banzhaf(0.7),
    WeightFamily.weighted_banzhaf(0.8),
    WeightFamily.weighted_banzhaf(0.9),
)


class WeightVector:
    """Immutable log-domain weights for an ``n``-player game."""

    def __init__(self, n: int, log_p, family: WeightFamily | None = None):
        log_p = np.array(log_p, dtype=float)
        if n < 1 or log_p.shape != (n,):
            raise ValueError(f"expected {n} log-weights, got shape {log_p.shape}")
        log_p.setflags(write=False)
        self.n = n
        self.log_p = log_p
        self.family = family

    def __repr__(self):
        return f"WeightVector(n={self.n}, family={self.family})"

    @cached_property
    def p(self) -> np.ndarray:
        p = np.exp(self.log_p)
        p.setflags(write=False)
        return p

    @cached_property
    def p_padded(self) -> np.ndarray:
        """Array of length n+2 with ``p_padded[l + 1] == p_l`` for l in -1..n."""
        out = np.zeros(self.n + 2)
        out[1:-1] = self.p
        out.setflags(write=False)
        return out

    def weight(self, size: int) -> float:
        if size < 0 or size >= self.n:
            return 0.0
        return float(self.p[size])

    @cached_property
    def case_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Path-sum tables used by the tree algorithm.

        ``pos[s, k] = sum_{l=s}^{n-k} p_{l-1} C(n-k-s, l-s)`` and
        ``neg[s, k] = sum_{l=s}^{n-k} p_l C(n-k-s, l-s)`` (positive; the
        caller applies the minus sign). Entries with s + k > n are zero.
        """
        n = self.n
        log_pad = np.full(n + 2, -np.inf)
        log_pad[1:-1] = self.log_p
        s = np.arange(n + 1)[:, None, None]
        k = np.arange(n + 1)[None, :, None]
        j = np.arange(n + 1)[None, None, :]
        r = n - k - s
        valid = (r >= 0) & (j <= r)
        r_safe = np.where(valid, r, 0)
        j_safe = np.where(valid, j, 0)
        lc = np.where(valid, log_comb(r_safe, j_safe), -np.inf)
        # l = s + j; p_{l-1} sits at log_pad[l], p_l at log_pad[l + 1]
        idx = np.clip(s + j_safe, 0, n)
        with np.errstate(invalid="ignore"):
            pos = np.exp(logsumexp(np.where(valid, lc + log_pad[idx], -np.inf), axis=2))
            neg = np.exp(logsumexp(np.where(valid, lc + log_pad[idx + 1], -np.inf), axis=2))
        pos = np.nan_to_num(pos)
        neg = np.nan_to_num(neg)
        pos.setflags(write=False)
        neg.setflags(write=False)
        return pos, neg


def make_weights(family: WeightFamily | str, n: int) -> WeightVector:
    if isinstance(family, str):
        family = WeightFamily.parse(family)
    if n < 1:
        raise ValueError(f"need at least one player, got n={n}")
    ell = np.arange(n)
    if family.kind == "shapley":
        log_p = -np.log(n) - log_comb(n - 1, ell)
    elif family.kind == "banzhaf":
        log_p = np.full(n, -(n - 1) * np.log(2.0))
    elif family.kind == "beta":
        alpha, beta = family.params
        log_p = betaln(ell + beta, n - ell - 1 + alpha) - betaln(alpha, beta)
    else:
        (q,) = family.params
        log_p = ell * np.log(q) + (n - 1 - ell) * np.log1p(-q)
    return WeightVector(n, log_p, family)


def normalization_residual(w: WeightVector) -> float:
    """|sum_l C(n-1, l) p_l - 1|, summed in log space."""
    ell = np.arange(w.n)
    total = logsumexp(log_comb(w.n - 1, ell) + w.log_p)
    return abs(float(np.expm1(total)))


def msr_coefficient(w: WeightVector, S, i: int) -> float:
    """p_{|S|-1} if player ``i`` is in S, else -p_{|S|} (0-based ``i``)."""
    if not 0 <= i < w.n:
        raise IndexError(f"player {i} out of range for n={w.n}")
    members = _as_members(S, w.n)
    size = int(members.sum())
    if members[i]:
        return w.weight(size - 1)
    return -w.weight(size)


def msr_coefficients(w: WeightVector, members: np.ndarray) -> np.ndarray:
    """Row-wise MSR coefficients for a boolean (m, n) membership matrix."""
    members = np.asarray(members, dtype=bool)
    sizes = members.sum(axis=1)
    pad = w.p_padded
    inside = pad[sizes][:, None]        # p_{|S|-1}
    outside = pad[sizes + 1][:, None]   # p_{|S|}
    return np.where(members, inside, -outside)


def _as_members(S, n: int) -> np.ndarray:
    from .sampling import Subset

    if isinstance(S, Subset):
        return S.members()
    arr = np.asarray(S)
    if arr.dtype == bool and arr.shape == (n,):
        return arr
    out = np.zeros(n, dtype=bool)
    out[list(S)] = True
    return out
