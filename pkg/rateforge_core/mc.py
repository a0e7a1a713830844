"""Deterministic chunked Monte Carlo engine.

Samples are drawn in fixed-size chunks, each from its own generator spawned
from ``SeedSequence(seed)``. Chunk statistics are merged in chunk order, so a
run gives the same bits whatever the worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import stats

from .errors import DomainError, SimulationError
from .processes import ProcessSpec, TransitionSampler

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 1 << 14
SINGLE_CHECK_Z = 4.0
SINGLE_CHECK_ALPHA = float(2.0 * stats.norm.sf(SINGLE_CHECK_Z))

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def z_score(self, target: float) -> float:
        diff = self.mean - target
        if self.stderr > 0:
            return diff / self.stderr
        if abs(diff) <= 1e-12 * max(1.0, abs(target)):
            return 0.0
        return math.copysign(math.inf, diff)

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def as_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


@dataclass(frozen=True)
class _Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    def merge(self, other: _Moments) -> _Moments:
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / total)
        return _Moments(total, mean, m2)


def suite_threshold(checks: int, alpha: float = SINGLE_CHECK_ALPHA) -> float:
    """Bonferroni-adjusted two-sided z threshold for ``checks`` simultaneous checks."""
    if checks < 1:
        raise DomainError(f"checks must be at least 1 (got {checks})")
    return float(stats.norm.isf(alpha / (2.0 * checks)))


def _chunk_moments(sampler: Sampler, seed: np.random.SeedSequence, size: int, offset: int) -> _Moments:
    values = np.asarray(sampler(np.random.default_rng(seed), size), dtype=float)
    if values.ndim == 0:
        values = np.full(size, float(values))
    if values.shape[0] != size:
        raise SimulationError(f"sampler returned {values.shape[0]} values for a chunk of {size}")
    rows = values.reshape(size, -1)
    finite = np.isfinite(rows)
    if not np.all(finite):
        bad = int(np.flatnonzero(~finite.all(axis=1))[0])
        value = rows[bad][~finite[bad]][0]
        raise SimulationError(f"non-finite sample value {value} at index {offset + bad}")
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return _Moments(size, mean, m2)


def _run(sampler: Sampler, n: int, seed: int, workers: int, chunk_size: int) -> _Moments:
    if n < 2:
        raise DomainError(f"Monte Carlo needs n >= 2 (got {n})")
    if chunk_size < 1:
        raise DomainError(f"chunk_size must be positive (got {chunk_size})")
    starts = list(range(0, n, chunk_size))
    sizes = [min(chunk_size, n - s) for s in starts]
    seeds = np.random.SeedSequence(int(seed)).spawn(len(starts))
    jobs = list(zip(seeds, sizes, starts))

    def work(job: tuple[np.random.SeedSequence, int, int]) -> _Moments:
        return _chunk_moments(sampler, *job)

    if workers <= 1 or len(jobs) == 1:
        parts = [work(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))

    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    logger.debug("mc run seed=%s n=%s chunks=%s workers=%s", seed, n, len(parts), workers)
    return total


def run_chunks(sampler: Sampler, n: int, seed: int, workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> MCEstimate:
    """Mean and standard error of the scalar samples produced by ``sampler(rng, size)``."""
    moments = _run(sampler, n, seed, workers, chunk_size)
    variance = float(moments.m2) / (moments.count - 1)
    return MCEstimate(
        mean=float(moments.mean), stderr=math.sqrt(max(variance, 0.0) / moments.count), n=moments.count, seed=int(seed)
    )


def run_chunks_joint(
    sampler: Sampler, n: int, seed: int, workers: int = 1, chunk_size: int = DEFAULT_CHUNK
) -> list[MCEstimate]:
    """Like ``run_chunks`` for samplers returning ``(size, k)``; the k estimates share draws."""
    moments = _run(sampler, n, seed, workers, chunk_size)
    means = np.atleast_1d(moments.mean)
    m2 = np.atleast_1d(moments.m2)
    return [
        MCEstimate(mean=float(mu), stderr=math.sqrt(max(float(s), 0.0) / (moments.count - 1) / moments.count), n=moments.count, seed=int(seed))
        for mu, s in zip(means, m2)
    ]


def estimate(
    f: Callable[[np.ndarray], Any],
    process: ProcessSpec,
    x: Any,
    t: float,
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> MCEstimate:
    """E[f(X_t) | X_0 = x] from exact draws; ``f`` maps an ``(m, d)`` batch to ``m`` values."""
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    if n < 2:
        raise DomainError(f"Monte Carlo needs n >= 2 (got {n})")
    start = tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))
    if t == 0:
        value = float(np.broadcast_to(np.asarray(f(np.asarray([start])), dtype=float), (1,))[0])
        return MCEstimate(mean=value, stderr=0.0, n=n, seed=int(seed))

    draw = TransitionSampler(process, start, float(t))

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        values = np.asarray(f(draw(rng, size)), dtype=float)
        return np.broadcast_to(values, (size,))

    return run_chunks(sampler, n, seed, workers=workers, chunk_size=chunk_size)
