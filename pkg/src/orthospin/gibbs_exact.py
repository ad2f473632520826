"""Exact Gibbs averages by enumerating all ``2^n`` spin configurations.

Configurations are visited in Gray-code order in fixed-size chunks.  Each
chunk starts from a from-scratch energy and then applies single-flip
updates, so rounding drift is bounded by the chunk length.  Chunk sums are
merged in index order; since chunk boundaries do not depend on the number
of workers, results are bit-identical for any ``workers`` value.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import CapacityError, DimensionError, InsufficientMomentsError
from .interactions import InteractionMatrix
from .reports import dumps

MAX_ENUM_N = 30
MAX_TWO_POINT_N = 24
MAX_K = 6
CHUNK = 1 << 16
# above this beta*n the weights are normalized in a second pass
TWO_PASS_THRESHOLD = 50.0


@dataclass(frozen=True)
class SpinConfiguration:
    """Bit-packed spins: bit ``i`` set means spin ``i+1`` is ``+1``."""

    n: int
    bits: int

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "SpinConfiguration":
        bits = 0
        for i in range(len(spins)):
            if spins[i] not in (-1, 1):
                raise ValueError(f"spin {i + 1} is {spins[i]!r}, expected +1 or -1")
            if spins[i] == 1:
                bits |= 1 << i
        return cls(len(spins), bits)

    def spins(self) -> np.ndarray:
        return spins_of(np.array([self.bits], dtype=np.int64), self.n)[0]

    def __getitem__(self, i: int) -> int:
        """Spin ``sigma_i`` with 1-based ``i``."""
        if not 1 <= i <= self.n:
            raise IndexError(i)
        return 1 if (self.bits >> (i - 1)) & 1 else -1


def spins_of(codes: np.ndarray, n: int) -> np.ndarray:
    """``(len(codes), n)`` array of +-1 spins for bit-packed configurations."""
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.float64)


def gray(k: np.ndarray) -> np.ndarray:
    return k ^ (k >> 1)


@dataclass(frozen=True)
class GibbsContext:
    matrix: InteractionMatrix
    beta: float
    shifted: bool = False

    def __post_init__(self):
        if not self.beta >= 0 or not math.isfinite(self.beta):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta!r}")

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def shift(self) -> float:
        """Constant added to ``H`` (the ``+1/2`` shift when ``shifted``)."""
        return 0.5 if self.shifted else 0.0

    @property
    def model(self) -> str:
        return self.matrix.kind.value

    def at(self, beta: float) -> "GibbsContext":
        return GibbsContext(self.matrix, beta, self.shifted)


def energy(ctx: GibbsContext, sigma: SpinConfiguration) -> float:
    """``H(sigma)`` under the matrix's self-interaction convention.

    Zero-diagonal matrices give ``-sum_{i<j} J_ij s_i s_j``; keep-diagonal
    ones give ``-(1/2) sum_{i,j} J_ij s_i s_j``.  Both equal
    ``-(1/2) s.J.s`` for the stored matrix.
    """
    if sigma.n != ctx.n:
        raise DimensionError(f"configuration has {sigma.n} spins, matrix has {ctx.n}")
    s = sigma.spins()
    return float(-0.5 * s @ ctx.matrix.entries @ s) + ctx.shift


def energies_from_scratch(ctx: GibbsContext, codes: np.ndarray) -> np.ndarray:
    """Vectorized direct evaluation for an array of bit-packed configurations."""
    s = spins_of(np.asarray(codes, dtype=np.int64), ctx.n)
    return -0.5 * np.einsum("ci,ij,cj->c", s, ctx.matrix.entries, s) + ctx.shift


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise CapacityError(f"{what} needs n <= {cap}, got n={n} (2^{n} configurations)")


def _chunk_energies(J: np.ndarray, start: int, count: int, shift: float) -> np.ndarray:
    out = np.empty(count)
    _kernels.gray_energies(J, start, count, out)
    if shift:
        out += shift
    return out


def _chunks(ctx: GibbsContext, workers: int = 1) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(codes, energies)`` per chunk in Gray order."""
    total = 1 << ctx.n
    size = min(CHUNK, total)
    starts = range(0, total, size)
    J = np.ascontiguousarray(ctx.matrix.entries)

    def job(start):
        k = np.arange(start, start + size, dtype=np.int64)
        return gray(k), _chunk_energies(J, start, size, ctx.shift)

    if workers <= 1:
        for st in starts:
            yield job(st)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            yield from ex.map(job, starts)


def energies(ctx: GibbsContext, order: str = "gray", workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """All ``2^n`` energies with their configuration codes.

    ``order="gray"`` runs the incremental kernel; ``order="binary"`` visits
    codes ``0..2^n-1`` and evaluates every energy from scratch.
    """
    _check_cap(ctx.n, MAX_TWO_POINT_N, "full energy listing")
    if order == "binary":
        codes = np.arange(1 << ctx.n, dtype=np.int64)
        return codes, energies_from_scratch(ctx, codes)
    if order != "gray":
        raise ValueError(f"unknown order {order!r}")
    parts = list(_chunks(ctx, workers))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _reference_shift(ctx: GibbsContext) -> float:
    """Upper bound on ``-beta H``, so single-pass weights never exceed one."""
    lam = float(np.linalg.eigvalsh(ctx.matrix.entries)[-1])
    return ctx.beta * (0.5 * ctx.n * max(lam, 0.0) - ctx.shift)


def log_partition(ctx: GibbsContext, workers: int = 1) -> float:
    """``log Z`` by streaming log-sum-exp over Gray-ordered chunks."""
    _check_cap(ctx.n, MAX_ENUM_N, "enumeration")
    parts = [logsumexp(-ctx.beta * e) for _, e in _chunks(ctx, workers)]
    return float(logsumexp(np.array(parts)))


@dataclass
class EnsembleSummary:
    """Exact thermal averages at one ``(matrix, beta)``.

    ``moments[k]`` is ``<h^k>`` with ``h = H/n``; ``moments[0] == 1``.
    """

    n: int
    beta: float
    log_z: float
    moments: np.ndarray
    magnetization_moments: tuple[float, float]
    one_point: np.ndarray
    two_point: np.ndarray | None = None
    model: str = "custom"
    shifted: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return len(self.moments) - 1

    def to_json(self) -> str:
        d = {"n": self.n, "beta": float(self.beta), "model": self.model,
             "log_z": float(self.log_z),
             "moments": [float(m) for m in self.moments[1:]]}
        if self.two_point is not None:
            d["two_point"] = [float(x) for x in self.two_point.ravel()]
        return dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleSummary":
        d = json.loads(text)
        n = int(d["n"])
        tp = d.get("two_point")
        return cls(n=n, beta=float(d["beta"]), log_z=float(d["log_z"]),
                   moments=np.array([1.0] + list(d["moments"])),
                   magnetization_moments=(math.nan, math.nan),
                   one_point=np.full(n, math.nan),
                   two_point=None if tp is None else np.array(tp).reshape(n, n),
                   model=d.get("model", "custom"))


def enumerate(ctx: GibbsContext, k_max: int = 2, want_two_point: bool = False,
              workers: int = 1) -> EnsembleSummary:
    """Full enumeration of the Gibbs measure.

    Args:
        ctx: matrix, inverse temperature and shift flag.
        k_max: highest energy-density moment to accumulate (at most 6).
        want_two_point: also accumulate the ``n x n`` matrix ``<s_i s_j>``.
        workers: threads used for chunk evaluation; results do not depend on it.

    Raises:
        CapacityError: if ``n`` exceeds 30, or 24 with ``want_two_point``.
    """
    n = ctx.n
    _check_cap(n, MAX_ENUM_N, "enumeration")
    if want_two_point:
        _check_cap(n, MAX_TWO_POINT_N, "two-point accumulation")
    if not 1 <= k_max <= MAX_K:
        raise ValueError(f"k_max must be in 1..{MAX_K}, got {k_max}")

    if ctx.beta * n > TWO_PASS_THRESHOLD:
        ref = log_partition(ctx, workers)
    else:
        ref = _reference_shift(ctx)

    sw = 0.0
    sh = np.zeros(k_max + 1)
    sm = np.zeros(2)
    s1 = np.zeros(n)
    s2 = np.zeros((n, n)) if want_two_point else None
    for codes, e in _chunks(ctx, workers):
        w = np.exp(-ctx.beta * e - ref)
        h = e / n
        hp = w.copy()
        sw += hp.sum()
        for k in range(1, k_max + 1):
            hp = hp * h
            sh[k] += hp.sum()
        s = spins_of(codes, n)
        ws = w[:, None] * s
        s1 += ws.sum(axis=0)
        m = s.sum(axis=1)
        sm[0] += w @ m
        sm[1] += w @ (m * m)
        if s2 is not None:
            s2 += s.T @ ws

    log_z = ref + math.log(sw)
    moments = sh / sw
    moments[0] = 1.0
    two = None
    if s2 is not None:
        two = s2 / sw
        two = 0.5 * (two + two.T)
        np.fill_diagonal(two, 1.0)
    return EnsembleSummary(n=n, beta=ctx.beta, log_z=log_z, moments=moments,
                           magnetization_moments=(sm[0] / sw, sm[1] / sw),
                           one_point=s1 / sw, two_point=two,
                           model=ctx.model, shifted=ctx.shifted)


def mean_energy_density(summary: EnsembleSummary) -> float:
    """``<h>``."""
    if summary.k_max < 1:
        raise InsufficientMomentsError("no moments accumulated")
    return float(summary.moments[1])


def cumulants_from_moments(moments: Sequence[float], n_max: int) -> np.ndarray:
    """Raw moments ``m[0..]`` (``m[0] = 1``) to cumulants ``k[0..n_max]`` (``k[0] = 0``).

    Uses ``k_r = m_r - sum_{j=1}^{r-1} C(r-1, j-1) k_j m_{r-j}``.
    """
    m = np.asarray(moments, dtype=np.float64)
    if n_max > len(m) - 1:
        raise InsufficientMomentsError(f"{n_max} cumulants need {n_max} moments, have {len(m) - 1}")
    kappa = np.zeros(n_max + 1)
    for r in range(1, n_max + 1):
        acc = m[r]
        for j in range(1, r):
            acc -= math.comb(r - 1, j - 1) * kappa[j] * m[r - j]
        kappa[r] = acc
    return kappa


def cumulants(summary: EnsembleSummary, n_max: int) -> np.ndarray:
    """Cumulants of ``h``: ``cumulants(...)[2]`` is ``Var h``."""
    return cumulants_from_moments(summary.moments, n_max)


def mgf_check(ctx: GibbsContext, lam: float, workers: int = 1) -> tuple[float, float]:
    """Both sides of ``<exp(-lam h)> = Z(beta + lam/n) / Z(beta)``.

    The left side is a weighted average over the enumeration at ``beta``;
    the right side comes from two independent ``log Z`` evaluations.
    """
    n = ctx.n
    _check_cap(n, MAX_TWO_POINT_N, "mgf check")
    if ctx.beta * n > TWO_PASS_THRESHOLD:
        ref = log_partition(ctx, workers)
    else:
        ref = _reference_shift(ctx)
    num = 0.0
    den = 0.0
    for _, e in _chunks(ctx, workers):
        w = np.exp(-ctx.beta * e - ref)
        num += (w * np.exp(-lam * e / n)).sum()
        den += w.sum()
    lhs = num / den
    beta2 = ctx.beta + lam / n
    if beta2 < 0:
        # Z is analytic in beta; evaluate it directly for negative arguments
        lz2 = float(logsumexp([logsumexp(-beta2 * e) for _, e in _chunks(ctx, workers)]))
    else:
        lz2 = log_partition(ctx.at(beta2), workers)
    rhs = math.exp(lz2 - log_partition(ctx, workers))
    return float(lhs), float(rhs)


def energy_bounds_check(ctx: GibbsContext, workers: int = 1) -> tuple[float, float]:
    """Exhaustive ``(min H, max H)``."""
    _check_cap(ctx.n, MAX_TWO_POINT_N, "energy bounds")
    lo, hi = math.inf, -math.inf
    for _, e in _chunks(ctx, workers):
        lo = min(lo, float(e.min()))
        hi = max(hi, float(e.max()))
    return lo, hi


def gibbs_weights(ctx: GibbsContext, log_z: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Configuration spins and normalized Boltzmann weights in binary order.

    Small-``n`` helper for the higher-moment tensors.
    """
    _check_cap(ctx.n, MAX_TWO_POINT_N, "explicit weights")
    codes = np.arange(1 << ctx.n, dtype=np.int64)
    e = energies_from_scratch(ctx, codes)
    if log_z is None:
        log_z = float(logsumexp(-ctx.beta * e))
    return spins_of(codes, ctx.n), np.exp(-ctx.beta * e - log_z)
