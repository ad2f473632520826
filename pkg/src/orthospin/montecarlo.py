"""Single-spin-flip Metropolis sampling with jackknife error bars.

Each chain draws its proposals from its own Philox stream keyed by
``seed + chain_index``, so a chain's sample stream depends only on
``(seed, chain_index, config)``.  Chains run independently and merge by a
plain average.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError
from .gibbs_exact import GibbsContext

log = logging.getLogger(__name__)

ENERGY_DENSITY = "energy_density"
ENERGY_DENSITY_SQ = "energy_density_sq"
MIN_BLOCKS = 20
# sweeps between local-field consistency checks
FIELD_CHECK_INTERVAL = 10_000
# proposals drawn per batch, bounds memory at large n
_BATCH_SWEEPS = 2_000


class Method(str, enum.Enum):
    EXACT = "exact"
    MC = "mc"


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float = 0.0
    n_samples: int = 0
    method: Method = Method.EXACT

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")
        if self.method is Method.EXACT and self.std_error != 0:
            raise ValueError("exact estimates carry zero std_error")


@dataclass(frozen=True)
class ChainConfig:
    seed: int
    n_sweeps: int
    burn_in: int | None = None
    n_chains: int = 4
    thinning: int = 1

    def __post_init__(self):
        if self.n_sweeps <= 0:
            raise ValueError("n_sweeps must be positive")
        if self.burn_in is not None and not 0 <= self.burn_in < self.n_sweeps:
            raise ValueError("need 0 <= burn_in < n_sweeps")
        if self.n_chains < 2:
            raise ValueError("need at least two chains")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def burn_in_for(self, n: int) -> int:
        """Explicit burn-in, else ``max(1000, 10 n)`` capped below ``n_sweeps``."""
        if self.burn_in is not None:
            return self.burn_in
        return min(max(1000, 10 * n), self.n_sweeps // 2)


def two_point(*pairs: tuple[int, int]) -> tuple:
    """Observable key for ``<s_i s_j>`` over the given 0-based pairs."""
    return ("two_point", tuple((int(i), int(j)) for i, j in pairs))


@dataclass
class ChainResult:
    estimates: dict
    acceptance_rate: float
    chain_means: dict
    max_field_drift: float
    stale: bool = False
    warnings: list = field(default_factory=list)
    energy_series: list = field(default_factory=list, repr=False)

    def energy_density_variance(self) -> Estimate:
        """``<h^2> - <h>^2`` averaged over chains, jackknife errors combined."""
        if not self.energy_series:
            raise ValueError("no energy series recorded")
        stats = [jackknife_variance(h) for h in self.energy_series]
        k = len(stats)
        value = float(np.mean([v for v, _ in stats]))
        se = float(math.sqrt(sum(e * e for _, e in stats)) / k)
        return Estimate(value, se, int(sum(len(h) for h in self.energy_series)), Method.MC)


def jackknife_blocks(series: np.ndarray, n_blocks: int = MIN_BLOCKS) -> tuple[float, float]:
    """Mean and blocked-jackknife standard error of a correlated series."""
    x = np.asarray(series, dtype=np.float64)
    size = len(x) // n_blocks
    if size < 1:
        raise ValueError(f"need at least {n_blocks} samples, got {len(x)}")
    x = x[: size * n_blocks]
    total = x.sum()
    block_sums = x.reshape(n_blocks, size).sum(axis=1)
    loo = (total - block_sums) / (len(x) - size)
    mean = total / len(x)
    var = (n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2)
    return float(mean), float(math.sqrt(var))


def jackknife_variance(series: np.ndarray, n_blocks: int = MIN_BLOCKS) -> tuple[float, float]:
    """Sample variance of a correlated series with a blocked-jackknife error."""
    x = np.asarray(series, dtype=np.float64)
    size = len(x) // n_blocks
    if size < 1:
        raise ValueError(f"need at least {n_blocks} samples, got {len(x)}")
    x = x[: size * n_blocks]
    b1 = x.reshape(n_blocks, size).sum(axis=1)
    b2 = (x * x).reshape(n_blocks, size).sum(axis=1)
    m = len(x) - size
    loo = (b2.sum() - b2) / m - ((b1.sum() - b1) / m) ** 2
    var = float(np.mean(x * x) - np.mean(x) ** 2)
    err = (n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2)
    return var, float(math.sqrt(err))


def _proposals(rng: np.random.Generator, n: int, sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    m = sweeps * n
    return rng.integers(0, n, size=m, dtype=np.int64), rng.random(m)


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed + chain))


def _run_one(ctx: GibbsContext, cfg: ChainConfig, chain: int, pairs: np.ndarray):
    J = np.ascontiguousarray(ctx.matrix.entries)
    n = ctx.n
    rng = chain_rng(cfg.seed, chain)
    s = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    f = _kernels.local_fields(J, s)
    e = float(-0.5 * s @ J @ s)
    burn = cfg.burn_in_for(n)
    n_rec = (cfg.n_sweeps - burn) // cfg.thinning
    out_e = np.empty(n_rec)
    out_p = np.empty((n_rec, len(pairs)))
    scratch_e = np.empty(_BATCH_SWEEPS)
    scratch_p = np.empty((_BATCH_SWEEPS, len(pairs)))
    accepted = 0
    attempts = 0
    drift = 0.0
    rec = 0
    done = 0
    since_check = 0
    while done < cfg.n_sweeps:
        todo = min(_BATCH_SWEEPS, cfg.n_sweeps - done, FIELD_CHECK_INTERVAL - since_check)
        if done < burn:
            todo = min(todo, burn - done)
        sites, u = _proposals(rng, n, todo)
        measuring = done >= burn
        thin = cfg.thinning if measuring else 0
        e, acc, got = _kernels.metropolis_sweeps(J, ctx.beta, s, f, e, sites, u, todo, thin,
                                                 done - burn, pairs, scratch_e, scratch_p)
        if measuring:
            take = min(got, n_rec - rec)
            out_e[rec:rec + take] = scratch_e[:take]
            out_p[rec:rec + take] = scratch_p[:take]
            rec += take
        accepted += acc
        attempts += todo * n
        done += todo
        since_check += todo
        if since_check >= FIELD_CHECK_INTERVAL or done == cfg.n_sweeps:
            fresh = _kernels.local_fields(J, s)
            drift = max(drift, float(np.max(np.abs(fresh - f))))
            e_fresh = float(-0.5 * s @ J @ s)
            drift = max(drift, abs(e_fresh - e))
            since_check = 0
    return out_e[:rec] + ctx.shift, out_p[:rec], accepted / attempts, drift


def _resolve(observables: Iterable, n: int):
    scalar, pair_keys, pairs = [], [], []
    for obs in observables:
        if obs in (ENERGY_DENSITY, ENERGY_DENSITY_SQ):
            scalar.append(obs)
        elif isinstance(obs, tuple) and obs and obs[0] == "two_point":
            for i, j in obs[1]:
                if not (0 <= i < n and 0 <= j < n):
                    raise DimensionError(f"pair ({i}, {j}) out of range for n={n}")
                pair_keys.append(("two_point", (i, j)))
                pairs.append((i, j))
        else:
            raise ValueError(f"unknown observable {obs!r}")
    if not scalar and not pairs:
        raise ValueError("no observables requested")
    return scalar, pair_keys, np.array(pairs, dtype=np.int64).reshape(-1, 2)


def run_chain(ctx: GibbsContext, cfg: ChainConfig, observables: Sequence, workers: int = 1) -> ChainResult:
    """Metropolis estimates of thermal averages.

    Args:
        ctx: matrix and inverse temperature.
        cfg: chain settings; one sweep is ``n`` single-flip proposals.
        observables: any of ``"energy_density"``, ``"energy_density_sq"`` and
            ``two_point((i, j), ...)`` keys (0-based spin indices).
        workers: threads for running chains concurrently.

    Returns:
        ChainResult whose ``estimates`` maps ``"energy_density"``,
        ``"energy_density_sq"`` and ``("two_point", (i, j))`` to estimates.
        ``stale`` is set when chain means disagree by more than four
        combined standard errors.
    """
    n = ctx.n
    if n < 2:
        raise ValueError("need at least two spins")
    scalar, pair_keys, pairs = _resolve(observables, n)

    def job(c):
        return _run_one(ctx, cfg, c, pairs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(job, range(cfg.n_chains)))
    else:
        runs = [job(c) for c in range(cfg.n_chains)]

    series: dict = {k: [] for k in scalar + pair_keys}
    for e, p, _, _ in runs:
        h = e / n
        if ENERGY_DENSITY in series:
            series[ENERGY_DENSITY].append(h)
        if ENERGY_DENSITY_SQ in series:
            series[ENERGY_DENSITY_SQ].append(h * h)
        for q, key in enumerate(pair_keys):
            series[key].append(p[:, q])

    estimates, chain_means, warnings = {}, {}, []
    stale = False
    for key, per_chain in series.items():
        stats = [jackknife_blocks(x) for x in per_chain]
        means = np.array([m for m, _ in stats])
        errs = np.array([se for _, se in stats])
        value = float(means.mean())
        se = float(math.sqrt(np.sum(errs ** 2)) / len(means))
        estimates[key] = Estimate(value, se, int(sum(len(x) for x in per_chain)), Method.MC)
        chain_means[key] = (means, errs)
        for a in range(len(means)):
            for b in range(a + 1, len(means)):
                comb = math.hypot(errs[a], errs[b])
                if abs(means[a] - means[b]) > 4.0 * comb:
                    stale = True
    if stale:
        msg = f"chains disagree beyond 4 sigma at beta={ctx.beta}; estimates may not be equilibrated"
        warnings.append(msg)
        log.warning(msg)
    return ChainResult(estimates=estimates,
                       acceptance_rate=float(np.mean([r[2] for r in runs])),
                       chain_means=chain_means,
                       max_field_drift=max(r[3] for r in runs),
                       stale=stale, warnings=warnings,
                       energy_series=[e / n for e, _, _, _ in runs])


def state_histogram(ctx: GibbsContext, n_sweeps: int, seed: int) -> np.ndarray:
    """Empirical distribution of visited states, one record per sweep.

    State index has bit ``i`` set when spin ``i`` is up.  Intended for small
    ``n`` detailed-balance checks.
    """
    n = ctx.n
    if n > 16:
        raise ValueError("state histogram is meant for small systems (n <= 16)")
    J = np.ascontiguousarray(ctx.matrix.entries)
    rng = chain_rng(seed, 0)
    s = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    f = _kernels.local_fields(J, s)
    hist = np.zeros(1 << n, dtype=np.int64)
    done = 0
    while done < n_sweeps:
        todo = min(100_000, n_sweeps - done)
        sites, u = _proposals(rng, n, todo)
        _kernels.metropolis_histogram(J, ctx.beta, s, f, sites, u, todo, hist)
        done += todo
    return hist / hist.sum()
