"""Closed-form high-temperature references and finite-size scaling fits."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, FitError
from .gibbs_exact import GibbsContext, cumulants, enumerate as enumerate_gibbs, log_partition
from .interactions import InteractionMatrix, build_curie_weiss

LOG2 = math.log(2.0)


def cw_free_energy_limit(beta: float) -> float:
    """Curie-Weiss limit of ``log Z_n - n log 2``: ``-beta/2 - log sqrt(1 - beta)``."""
    if not 0 <= beta < 1:
        raise DomainError(f"Curie-Weiss limit needs 0 <= beta < 1, got {beta}")
    return -0.5 * beta - 0.5 * math.log1p(-beta)


def cw_self_interaction_limit(beta: float) -> float:
    """Same limit with the diagonal kept (``H = -M^2/(2n)``): ``-log sqrt(1 - beta)``."""
    if not 0 <= beta < 1:
        raise DomainError(f"Curie-Weiss limit needs 0 <= beta < 1, got {beta}")
    return -0.5 * math.log1p(-beta)


def cw_series(beta: float, k_max: int) -> float:
    """Partial sum ``sum_{k=2}^{k_max} beta^k / (2k)``."""
    return sum(beta ** k / (2 * k) for k in range(2, k_max + 1))


def cw_series_tail_bound(beta: float, k_max: int) -> float:
    """Bound on the omitted terms: ``beta^(K+1) / (2 (K+1) (1 - beta))``."""
    return beta ** (k_max + 1) / (2 * (k_max + 1) * (1 - beta))


def om_free_energy_limit(beta: float) -> float:
    """Orthogonal-model limit of ``(log Z_n)/n - log 2``.

    ``G(beta) = [sqrt(1 + 4 beta^2) - log((1 + sqrt(1 + 4 beta^2)) / 2) - 1] / 4``.
    """
    if beta < 0:
        raise DomainError("beta must be non-negative")
    r = math.sqrt(1.0 + 4.0 * beta * beta)
    return 0.25 * (r - math.log((1.0 + r) / 2.0) - 1.0)


def om_mean_energy_limit(beta: float) -> float:
    """``-G'(beta) = -beta / (1 + sqrt(1 + 4 beta^2))``."""
    if beta < 0:
        raise DomainError("beta must be non-negative")
    return -beta / (1.0 + math.sqrt(1.0 + 4.0 * beta * beta))


@dataclass
class ScalingSeries:
    """Least-squares line through ``(log n, log |value|)``."""

    points: list
    slope: float
    intercept: float
    r_squared: float
    quantity: str = ""

    def fit_record(self) -> dict:
        return {"quantity": self.quantity, "slope": self.slope, "intercept": self.intercept,
                "r2": self.r_squared, "n_points": len(self.points)}


def fit_decay(points: Iterable[tuple[int, float]], quantity: str = "") -> ScalingSeries:
    """Fit ``log |value| = slope * log n + intercept``; exact zeros are dropped.

    Raises:
        FitError: fewer than four usable points, or repeated ``n``.
    """
    pts = [(int(n), float(v)) for n, v in points]
    ns = [n for n, _ in pts]
    if len(set(ns)) != len(ns):
        raise FitError("system sizes must be distinct")
    usable = [(n, v) for n, v in pts if v != 0 and math.isfinite(v)]
    if len(usable) < 4:
        raise FitError(f"need at least 4 nonzero points, got {len(usable)}")
    x = np.log([n for n, _ in usable])
    y = np.log([abs(v) for _, v in usable])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingSeries(points=usable, slope=float(slope), intercept=float(intercept),
                         r_squared=r2, quantity=quantity)


@dataclass
class SubadditivityRow:
    beta: float
    n: int
    doubled: float   # (1/2n) log Z_{2n}
    single: float    # (1/n) log Z_n

    @property
    def difference(self) -> float:
        """``doubled - single``; non-positive when subadditivity holds."""
        return self.doubled - self.single

    @property
    def ok(self) -> bool:
        return self.difference <= 1e-12


def subadditivity_report(betas: Sequence[float], ns: Sequence[int],
                         builder: Callable[[int], InteractionMatrix] = build_curie_weiss) -> list[SubadditivityRow]:
    """Compare ``(1/2n) log Z_{2n}`` with ``(1/n) log Z_n`` on a grid."""
    rows = []
    for beta in betas:
        for n in ns:
            lz1 = log_partition(GibbsContext(builder(n), beta))
            lz2 = log_partition(GibbsContext(builder(2 * n), beta))
            rows.append(SubadditivityRow(beta, n, lz2 / (2 * n), lz1 / n))
    return rows


def cw_beta_zero_variance(n: int) -> float:
    """``Var h`` for Curie-Weiss at infinite temperature, by pair counting.

    ``h = -(1/n^2) sum_{i<j} s_i s_j``; under the product measure distinct
    pair products are uncorrelated with unit variance, so
    ``Var h = C(n, 2) / n^4``.
    """
    return math.comb(n, 2) / n ** 4


@dataclass
class VarianceReport:
    model: str
    beta: float
    values: list          # (n, Var h)
    fit: ScalingSeries | None = None
    notes: list = field(default_factory=list)


def variance_vanishing_report(builder: Callable[[int], InteractionMatrix], beta: float,
                              ns: Sequence[int], model: str = "") -> VarianceReport:
    """``Var h_n`` on a size sweep with its log-log decay fit."""
    values = []
    for n in ns:
        s = enumerate_gibbs(GibbsContext(builder(n), beta), k_max=2)
        values.append((n, float(cumulants(s, 2)[2])))
    rep = VarianceReport(model or builder.__name__, beta, values)
    if sum(1 for _, v in values if v != 0) >= 4:
        rep.fit = fit_decay(values, quantity="h_var")
    return rep


def free_energy_density(ctx: GibbsContext) -> float:
    """``G_n``: ``log Z_n - n log 2`` for zero-diagonal (Curie-Weiss) matrices,
    ``(log Z_n)/n - log 2`` for orthogonal couplings.

    The two families scale differently: the Curie-Weiss correction stays
    O(1) while the orthogonal one is extensive.
    """
    lz = log_partition(ctx)
    if ctx.matrix.keeps_diagonal:
        return lz / ctx.n - LOG2
    return lz - ctx.n * LOG2


def free_energy_limit(ctx: GibbsContext) -> float:
    if ctx.matrix.keeps_diagonal:
        return om_free_energy_limit(ctx.beta)
    return cw_free_energy_limit(ctx.beta)


def free_energy_sweep(builder: Callable[[int], InteractionMatrix], beta: float,
                      ns: Sequence[int]) -> list[tuple[int, float]]:
    return [(n, free_energy_density(GibbsContext(builder(n), beta))) for n in ns]


def _cw_energy(spins: np.ndarray, coupling: float) -> np.ndarray:
    """``-coupling * sum_{i<j} s_i s_j`` for rows of ``spins``."""
    m = spins.sum(axis=1)
    return -coupling * 0.5 * (m * m - spins.shape[1])


def bipartition_identity_gap(n: int, convention: str = "1/n") -> float:
    """Largest violation of ``H_{2n} = mean over bipartitions of (H_left + H_right)``.

    Brute force over all ``2^(2n)`` configurations and all balanced
    bipartitions of ``2n`` Curie-Weiss spins.  ``convention="1/n"`` uses
    coupling ``1/m`` for an ``m``-spin system; ``"1/(n-1)"`` uses ``1/(m-1)``.
    """
    if convention == "1/n":
        coup = lambda m: 1.0 / m
    elif convention == "1/(n-1)":
        coup = lambda m: 1.0 / (m - 1)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    m = 2 * n
    codes = np.arange(1 << m, dtype=np.int64)
    spins = (2 * ((codes[:, None] >> np.arange(m)) & 1) - 1).astype(np.float64)
    full = _cw_energy(spins, coup(m))
    acc = np.zeros(len(codes))
    parts = list(itertools.combinations(range(m), n))
    for left in parts:
        right = [i for i in range(m) if i not in left]
        acc += _cw_energy(spins[:, list(left)], coup(n)) + _cw_energy(spins[:, right], coup(n))
    return float(np.max(np.abs(acc / len(parts) - full)))
