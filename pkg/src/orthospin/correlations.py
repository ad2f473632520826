"""Restricted correlation sums, connected correlations and factorization gaps.

Sums over index tuples follow one convention throughout: ``J`` is the stored
coupling matrix (diagonal already zero for zero-diagonal models), indices run
over all ordered tuples, and a restriction "outside the fat diagonal" means
all indices of one expectation are pairwise distinct.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import CapacityError
from .gibbs_exact import (
    EnsembleSummary,
    GibbsContext,
    cumulants,
    enumerate as enumerate_gibbs,
    gibbs_weights,
)

MAX_FOUR_POINT_N = 12
MAX_SIX_POINT_N = 8


@dataclass(frozen=True)
class FatDiagonalSpec:
    """The set ``D_r(n)`` of r-tuples over ``0..n-1`` with a repeated entry."""

    r: int
    n: int

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("tuple arity must be at least 2")

    def contains(self, idx: Sequence[int]) -> bool:
        if len(idx) != self.r:
            raise ValueError(f"expected a {self.r}-tuple")
        return len(set(idx)) < self.r

    def complement_mask(self) -> np.ndarray:
        """Boolean array of shape ``(n,)*r``, True where all indices differ."""
        grids = np.indices((self.n,) * self.r, sparse=True)
        mask = np.ones((self.n,) * self.r, dtype=bool)
        for a, b in itertools.combinations(range(self.r), 2):
            mask &= grids[a] != grids[b]
        return mask

    def complement_size(self) -> int:
        return math.perm(self.n, self.r)


@dataclass
class CorrelationAccessor:
    """Exact two-, four- and (optionally) six-point tensors at one ``(J, beta)``."""

    ctx: GibbsContext
    summary: EnsembleSummary
    four: np.ndarray
    six: np.ndarray | None = None

    @property
    def two(self) -> np.ndarray:
        return self.summary.two_point

    def expectation(self, idx: Sequence[int]) -> float:
        """``<s_{i1} ... s_{ik}>`` for 0-based indices, after cancelling ``s_i^2 = 1``.

        Odd reduced products vanish by the global spin-flip symmetry.
        """
        counts: dict[int, int] = {}
        for i in idx:
            counts[i] = counts.get(i, 0) ^ 1
        rest = sorted(i for i, c in counts.items() if c)
        k = len(rest)
        if k == 0:
            return 1.0
        if k % 2:
            return 0.0
        if k == 2:
            return float(self.two[rest[0], rest[1]])
        if k == 4:
            return float(self.four[tuple(rest)])
        if k == 6:
            if self.six is None:
                raise CapacityError("six-point tensor not accumulated")
            return float(self.six[tuple(rest)])
        raise CapacityError(f"no stored tensor for {k}-point expectations")


def accumulate_higher_moments(ctx: GibbsContext, order: int = 4,
                              summary: EnsembleSummary | None = None) -> CorrelationAccessor:
    """Exact four-point (and for ``order=6`` six-point) tensors by enumeration."""
    n = ctx.n
    if order not in (4, 6):
        raise ValueError("order must be 4 or 6")
    cap = MAX_FOUR_POINT_N if order == 4 else MAX_SIX_POINT_N
    if n > cap:
        raise CapacityError(f"order-{order} tensors need n <= {cap}, got n={n}")
    if summary is None or summary.two_point is None:
        summary = enumerate_gibbs(ctx, k_max=4, want_two_point=True)
    s, w = gibbs_weights(ctx, summary.log_z)
    pair = (s[:, :, None] * s[:, None, :]).reshape(len(s), n * n)
    four = (pair.T @ (w[:, None] * pair)).reshape((n,) * 4)
    six = None
    if order == 6:
        trip = (pair[:, :, None] * s[:, None, :]).reshape(len(s), n ** 3)
        six = (trip.T @ (w[:, None] * trip)).reshape((n,) * 6)
    return CorrelationAccessor(ctx, summary, four, six)


def connected_correlation(acc: CorrelationAccessor, pairs: Sequence[tuple[int, int]]) -> float:
    """Pairwise connected correlation of up to three spin pairs (0-based indices).

    With ``X_k = s_{i_k} s_{j_k}`` this is the joint cumulant of the ``X_k``:
    for three pairs ``E123 - E12 E3 - E13 E2 - E23 E1 + 2 E1 E2 E3``.
    """
    k = len(pairs)
    if k not in (1, 2, 3):
        raise ValueError("only 1, 2 or 3 pairs are supported")
    E = acc.expectation
    if k == 1:
        return E(pairs[0])
    p1, p2 = tuple(pairs[0]), tuple(pairs[1])
    if k == 2:
        return E(p1 + p2) - E(p1) * E(p2)
    p3 = tuple(pairs[2])
    e1, e2, e3 = E(p1), E(p2), E(p3)
    return (E(p1 + p2 + p3) - E(p1 + p2) * e3 - E(p1 + p3) * e2 - E(p2 + p3) * e1
            + 2.0 * e1 * e2 * e3)


def _offdiag_pair_sum(J: np.ndarray, C: np.ndarray) -> float:
    """``sum_{i != j} J_ij <s_i s_j>``."""
    return float(np.sum(J * C) - np.sum(np.diag(J) * np.diag(C)))


class GapMethod(str, enum.Enum):
    ORACLE = "oracle"
    CONTRACTION = "contraction"


def factorization_gap(ctx: GibbsContext, method: GapMethod | str = GapMethod.CONTRACTION,
                      summary: EnsembleSummary | None = None,
                      acc: CorrelationAccessor | None = None) -> float:
    """``|(1/n^2) sum_{D4-bar} J J <4> - (1/n^2) sum_{D2-bar x D2-bar} J J <2><2>|``.

    ``ORACLE`` loops over the four-point tensor (``n <= 12``).
    ``CONTRACTION`` needs only energy moments and the two-point matrix
    (``n <= 24``): with ``S = sum_{i != j} J_ij s_i s_j`` the restricted
    four-point sum is ``<S^2>`` minus four single-coincidence terms
    ``sum_{i,j,m distinct} J_ij J_im <s_j s_m>`` minus two double-coincidence
    terms ``sum_{i != j} J_ij^2``.
    """
    method = GapMethod(method)
    n = ctx.n
    J = ctx.matrix.entries
    if method is GapMethod.ORACLE:
        if acc is None:
            acc = accumulate_higher_moments(ctx, 4, summary)
        mask = FatDiagonalSpec(4, n).complement_mask()
        first = float(np.einsum("ij,lm,ijlm->", J, J, np.where(mask, acc.four, 0.0)))
        a = _offdiag_pair_sum(J, acc.two)
        return abs(first - a * a) / n ** 2

    if summary is None or summary.two_point is None or summary.k_max < 2:
        summary = enumerate_gibbs(ctx, k_max=2, want_two_point=True)
    C = summary.two_point
    m1, m2 = summary.moments[1], summary.moments[2]
    shift = ctx.shift
    t = float(np.trace(J))
    # S = -2 (H - shift) - tr J, with H = n h
    mean_h0 = n * m1 - shift
    mean_h0_sq = n * n * m2 - 2.0 * shift * n * m1 + shift * shift
    s_sq = 4.0 * mean_h0_sq + 4.0 * t * mean_h0 + t * t
    d = np.diag(J)
    inner = J @ J - d[:, None] * J - J * d[None, :]
    np.fill_diagonal(inner, 0.0)
    single = float(np.sum(C * inner))
    double = float(np.sum(J * J) - np.sum(d * d))
    first = s_sq - 4.0 * single - 2.0 * double
    a = _offdiag_pair_sum(J, C)
    return abs(first - a * a) / n ** 2


def _two_point(ctx: GibbsContext, summary: EnsembleSummary | None) -> np.ndarray:
    if summary is None or summary.two_point is None:
        summary = enumerate_gibbs(ctx, k_max=1, want_two_point=True)
    return summary.two_point


def lemma_trace_term(ctx: GibbsContext, summary: EnsembleSummary | None = None) -> float:
    """``|(1/n^2) sum_{i,l,m} J_ii J_lm <s_l s_m>|``."""
    J = ctx.matrix.entries
    C = _two_point(ctx, summary)
    return abs(float(np.trace(J)) * float(np.sum(J * C))) / ctx.n ** 2


def lemma_resolvent_term(ctx: GibbsContext, summary: EnsembleSummary | None = None) -> float:
    """``(1/n^2) sum_{i,j,m} J_ij J_jm <s_i s_m>``; equals ``1/n`` when ``J^2 = I``."""
    J = ctx.matrix.entries
    C = _two_point(ctx, summary)
    return float(np.sum((J @ J) * C)) / ctx.n ** 2


def weighted_cumulant_sum(ctx: GibbsContext, order: int, method: str = "moments",
                          summary: EnsembleSummary | None = None,
                          acc: CorrelationAccessor | None = None) -> float:
    """``(1/n^k) sum_{all i, j} J_{i1 j1} ... J_{ik jk} <s s, ..., s s>_c`` for ``k = order``.

    Since ``sum_ij J_ij s_i s_j = -2 (H - shift)``, the moment route gives
    ``(-2)^k`` times the k-th cumulant of ``h``.  ``method="direct"`` sums
    the connected tensors instead (``n <= 12`` for order 2, ``n <= 8`` for 3).
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if method == "moments":
        if summary is None or summary.k_max < order:
            summary = enumerate_gibbs(ctx, k_max=order)
        return (-2.0) ** order * float(cumulants(summary, order)[order])
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    n = ctx.n
    J = ctx.matrix.entries
    if acc is None or (order == 3 and acc.six is None):
        acc = accumulate_higher_moments(ctx, 4 if order == 2 else 6, summary)
    a = float(np.sum(J * acc.two))
    b = float(np.einsum("ij,lm,ijlm->", J, J, acc.four))
    if order == 2:
        return (b - a * a) / n ** 2
    c = float(np.einsum("ij,kl,pq,ijklpq->", J, J, J, acc.six))
    return (c - 3.0 * a * b + 2.0 * a ** 3) / n ** 3


def starred_sum(ctx: GibbsContext, order: int, acc: CorrelationAccessor | None = None) -> float:
    """Connected-correlation sum with each expectation restricted to distinct indices.

    Order 2: ``[sum_{D4-bar} J J <4> - (sum_{D2-bar} J <2>)^2] / n^2``.
    Order 3: ``[sum_{D6-bar} J J J <6> - 3 (sum_{D4-bar} J J <4>)(sum_{D2-bar} J <2>)
    + 2 (sum_{D2-bar} J <2>)^3] / n^3``.
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    n = ctx.n
    cap = MAX_FOUR_POINT_N if order == 2 else MAX_SIX_POINT_N
    if n > cap:
        raise CapacityError(f"starred sum of order {order} needs n <= {cap}, got n={n}")
    J = ctx.matrix.entries
    if acc is None or (order == 3 and acc.six is None):
        acc = accumulate_higher_moments(ctx, 2 * order)
    a = _offdiag_pair_sum(J, acc.two)
    b = float(np.einsum("ij,lm,ijlm->", J, J,
                        np.where(FatDiagonalSpec(4, n).complement_mask(), acc.four, 0.0)))
    if order == 2:
        return (b - a * a) / n ** 2
    c = float(np.einsum("ij,kl,pq,ijklpq->", J, J, J,
                        np.where(FatDiagonalSpec(6, n).complement_mask(), acc.six, 0.0)))
    return (c - 3.0 * a * b + 2.0 * a ** 3) / n ** 3


def cw_correlation(n: int, beta: float, k: int) -> float:
    """``<s_1 ... s_k>`` for Curie-Weiss at any ``n``, summing over magnetization classes.

    The energy depends only on the number ``u`` of up spins; within a class
    the product of ``k`` fixed spins averages to a hypergeometric sum.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    u = np.arange(n + 1)
    m = 2 * u - n
    log_mult = gammaln(n + 1) - gammaln(u + 1) - gammaln(n - u + 1)
    log_w = log_mult - beta * (-(m * m) / (2.0 * n) + 0.5)
    p = np.exp(log_w - logsumexp(log_w))
    cond = np.zeros(n + 1)
    for t in range(k + 1):
        # t of the k fixed spins are up
        cond += (-1.0) ** (k - t) * np.exp(
            _log_comb(u, t) + _log_comb(n - u, k - t) - _log_comb(n, k))
    return float(p @ cond)


def _log_comb(a, b):
    a = np.asarray(a, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        out = gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)
    return np.where((b >= 0) & (a >= b), out, -np.inf)
