"""Exact hypercube computations: disc, solution counts, capacity traces.

Random matrices come from a counter-based generator so any row of any
trial regenerates independently: entry stream (seed, stream_id, row)
yields row's n entries in order.  All enumeration fixes sigma_1 = +1 and
doubles counts (the objective is even under global sign flip).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from . import _kernels
from .analytic import gauss_p, log_gauss_p
from .errors import AccuracyError, BudgetError, DomainError, MissingDataError

# Recorded in output metadata: raw 64-bit Philox words with key
# [seed, stream_id] and counter [0, index, domain, 0] are mapped through
# u = ((raw >> 11) + 0.5) * 2^-53, z = ndtri(u), entry = z / sqrt(n).
RNG_TRANSFORM = "philox2x64key-u53-ndtri-v1"

_DOMAIN_ROWS = 0
_DOMAIN_OVERLAP = 1
_DOMAIN_SIGMA = 2

_MASK64 = (1 << 64) - 1
MAX_EXACT_N = 30


def _bit_generator(seed: int, stream_id: int, domain: int, index: int) -> Philox:
    return Philox(key=[seed & _MASK64, stream_id & _MASK64],
                  counter=[0, index & _MASK64, domain, 0])


def _standard_normals(seed: int, stream_id: int, domain: int, index: int,
                      count: int) -> np.ndarray:
    raw = _bit_generator(seed, stream_id, domain, index).random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def _row(n: int, seed: int, stream_id: int, index: int) -> np.ndarray:
    return _standard_normals(seed, stream_id, _DOMAIN_ROWS, index,
                             n) / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class Instance:
    """A fixed m x n Gaussian matrix with its reproducibility tokens."""

    n: int
    rows: np.ndarray
    seed: int
    stream_id: int

    @property
    def m(self) -> int:
        return self.rows.shape[0]


def generate_instance(n: int, m: int, seed: int, stream_id: int) -> Instance:
    """m x n matrix of i.i.d. N(0, 1/n) entries, deterministic in all args."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    rows = np.empty((m, n))
    for i in range(m):
        rows[i] = _row(n, seed, stream_id, i)
    return Instance(n=n, rows=rows, seed=seed, stream_id=stream_id)


@dataclass(frozen=True)
class SolveReport:
    """Exact disc with one argmin and an optional threshold count."""

    disc_value: float
    argmin: tuple[int, ...]
    count_at: Optional[tuple[float, int]] = None

    def to_dict(self) -> dict:
        return {"disc_value": self.disc_value,
                "argmin": list(self.argmin),
                "count_at": list(self.count_at) if self.count_at else None}


def _check_budget(n: int) -> None:
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if n > MAX_EXACT_N:
        raise BudgetError(
            f"n = {n} exceeds the exact enumeration budget {MAX_EXACT_N}")


def _sigma_from_index(n: int, idx: int) -> np.ndarray:
    g = idx ^ (idx >> 1)
    sigma = np.ones(n, dtype=np.int8)
    for j in range(1, n):
        if (g >> (j - 1)) & 1:
            sigma[j] = -1
    return sigma


def exact_objective(rows: np.ndarray, sigma: Sequence[int]) -> float:
    """max_i |<a_i, sigma>| with correctly rounded row sums.

    fsum makes the value independent of coordinate order, so disc is
    bit-identical under column permutations.
    """
    sig = np.asarray(sigma, dtype=np.float64)
    return max(abs(math.fsum(row * sig)) for row in rows)


_AMBIGUOUS_CAP = 1 << 16


def _scan(instance: Instance,
          thresholds: Sequence[float]) -> tuple[float, int, np.ndarray]:
    """Gray enumeration; counts are exact in the rounded-row-sum metric.

    The kernel leaves sigma near a threshold unresolved (incremental
    sums drift), then each one is settled here against the same exactly
    rounded objective that disc reporting uses.
    """
    at = np.ascontiguousarray(instance.rows.T)
    thr = np.asarray(sorted(thresholds), dtype=np.float64)
    counts = np.zeros(len(thr), dtype=np.int64)
    amb = np.empty(_AMBIGUOUS_CAP, dtype=np.int64)
    best, bestidx, namb = _kernels.gray_scan(at, thr, counts, amb)
    if namb > _AMBIGUOUS_CAP:
        raise AccuracyError(
            f"{namb} near-threshold candidates exceed the resolution "
            f"buffer ({_AMBIGUOUS_CAP})")
    for idx in amb[:namb]:
        val = exact_objective(instance.rows, _sigma_from_index(instance.n,
                                                              int(idx)))
        for k, t in enumerate(thr):
            if val <= t:
                counts[k] += 1
    return float(best), int(bestidx), counts


def solve_exact(instance: Instance,
                count_at_k: Optional[float] = None) -> SolveReport:
    """Exact disc over the full cube, via half-cube Gray enumeration.

    The reported disc is recomputed at the argmin with a direct matrix
    product, so its value is independent of the incremental scan route.
    """
    _check_budget(instance.n)
    if count_at_k is not None and count_at_k <= 0:
        raise DomainError(f"count threshold must be positive, got {count_at_k}")

    if instance.m == 0:
        sigma = np.ones(instance.n, dtype=np.int8)
        count = ((float(count_at_k), 2 ** instance.n)
                 if count_at_k is not None else None)
        return SolveReport(disc_value=0.0, argmin=tuple(int(v) for v in sigma),
                           count_at=count)

    thresholds = [count_at_k] if count_at_k is not None else []
    _, bestidx, counts = _scan(instance, thresholds)
    sigma = _sigma_from_index(instance.n, bestidx)
    disc = exact_objective(instance.rows, sigma)
    count = (float(count_at_k), int(2 * counts[0])) if count_at_k is not None \
        else None
    return SolveReport(disc_value=disc, argmin=tuple(int(v) for v in sigma),
                       count_at=count)


def count_solutions(instance: Instance, K: float) -> int:
    """Exact |{sigma : ||A sigma||_inf <= K}| over the full cube.

    The comparison at K uses correctly rounded row sums, so counting at
    K = disc(A) always includes the argmin pair.
    """
    _check_budget(instance.n)
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    if instance.m == 0:
        return 2 ** instance.n
    _, _, counts = _scan(instance, [K])
    return int(2 * counts[0])


@dataclass(frozen=True)
class CapacityTrace:
    """Sequential solution-set process for one row stream.

    sizes[t] is the full-cube |S_t| for t = 0..t*; y_trace[t-1] holds
    Y_t for t = 1..t* plus, when the process ran to emptiness, the final
    Y_{t*+1} = -1; q_trace aligns with sizes.  overlap_samples maps a
    checkpoint t to the sampled |<sigma1, sigma2>| values there.
    """

    K: float
    n: int
    capacity_rows: int
    sizes: tuple[int, ...]
    q_trace: tuple[float, ...]
    y_trace: tuple[float, ...]
    overlap_samples: dict[int, tuple[int, ...]] = field(default_factory=dict)
    terminated: bool = True
    seed: int = 0
    stream_id: int = 0

    @property
    def alpha_star(self) -> float:
        return self.capacity_rows / self.n

    def to_dict(self) -> dict:
        return {
            "K": self.K, "n": self.n,
            "capacity_rows": self.capacity_rows,
            "alpha_star": self.alpha_star,
            "sizes": list(self.sizes),
            "q_trace": list(self.q_trace),
            "y_trace": list(self.y_trace),
            "overlap_samples": {str(t): list(v)
                                for t, v in sorted(self.overlap_samples.items())},
            "terminated": self.terminated,
            "seed": self.seed, "stream_id": self.stream_id,
        }

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "size", "q_t", "y_t"])
            for t, size in enumerate(self.sizes):
                y = repr(self.y_trace[t - 1]) if t >= 1 else ""
                w.writerow([t, size, repr(self.q_trace[t]), y])
            if self.terminated:
                w.writerow([len(self.sizes), 0, "", repr(self.y_trace[-1])])


def _alive_indices(words: np.ndarray, steps: int) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:steps]
    return np.flatnonzero(bits).astype(np.int64)


def _sample_overlaps(n: int, alive: np.ndarray, count: int, seed: int,
                     stream_id: int, t: int) -> tuple[int, ...]:
    gen = Generator(_bit_generator(seed, stream_id, _DOMAIN_OVERLAP, t))
    picks = gen.integers(0, len(alive), size=2 * count)
    i1 = alive[picks[:count]]
    i2 = alive[picks[count:]]
    g1 = np.bitwise_xor(i1, i1 >> 1)
    g2 = np.bitwise_xor(i2, i2 >> 1)
    pc = np.bitwise_count(np.bitwise_xor(g1, g2))
    return tuple(int(v) for v in np.abs(n - 2 * pc.astype(np.int64)))


def run_capacity(n: int, K: float, seed: int, stream_id: int,
                 overlap_sample_count: int = 0,
                 overlap_checkpoints: Optional[Sequence[int]] = None,
                 max_rows: Optional[int] = None) -> CapacityTrace:
    """Feed rows one at a time until the solution set empties.

    The alive set over the half cube starts as a dense bitset and
    switches to an explicit index list once that is cheaper.  Row t
    (1-based) uses entry stream index t - 1, so the first m rows equal
    generate_instance(n, m, seed, stream_id) exactly.
    """
    _check_budget(n)
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    if overlap_sample_count < 0:
        raise DomainError("overlap_sample_count must be nonnegative")

    p = gauss_p(K)
    lp = log_gauss_p(K)
    steps = 1 << (n - 1)
    nwords = (steps + 63) // 64
    words: Optional[np.ndarray] = np.full(nwords, _MASK64, dtype=np.uint64)
    if steps & 63:
        words[-1] = np.uint64((1 << (steps & 63)) - 1)
    idx: Optional[np.ndarray] = None

    checkset = (None if overlap_checkpoints is None
                else set(int(t) for t in overlap_checkpoints))
    overlaps: dict[int, tuple[int, ...]] = {}

    def sample_at(t: int, cnt: int) -> None:
        if overlap_sample_count <= 0 or cnt <= 0:
            return
        if checkset is not None and t not in checkset:
            return
        alive = idx if idx is not None else _alive_indices(words, steps)
        overlaps[t] = _sample_overlaps(n, alive, overlap_sample_count,
                                       seed, stream_id, t)

    cnt = steps
    sizes = [2 * cnt]
    q_trace = [0.0]
    y_trace: list[float] = []
    sample_at(0, cnt)

    t = 0
    terminated = False
    while max_rows is None or t < max_rows:
        t += 1
        row = _row(n, seed, stream_id, t - 1)
        prev = cnt
        if idx is None:
            cnt = int(_kernels.row_pass_dense(row, K, words, steps))
            if cnt * n * 3 < steps:
                idx = _alive_indices(words, steps)
                words = None
        else:
            idx = _kernels.row_pass_sparse(row, K, idx)
            cnt = len(idx)
        y_trace.append((cnt / prev - p) / p)
        if cnt == 0:
            terminated = True
            break
        sizes.append(2 * cnt)
        q_trace.append(math.log(2 * cnt) - n * math.log(2.0) - t * lp)
        sample_at(t, cnt)

    capacity_rows = len(sizes) - 1
    return CapacityTrace(K=K, n=n, capacity_rows=capacity_rows,
                         sizes=tuple(sizes), q_trace=tuple(q_trace),
                         y_trace=tuple(y_trace),
                         overlap_samples=overlaps, terminated=terminated,
                         seed=seed, stream_id=stream_id)


def regularity_statistic(trace: CapacityTrace, t: int,
                         threshold: float) -> float:
    """Fraction of the recorded overlap samples at t strictly above
    threshold."""
    if t not in trace.overlap_samples:
        raise MissingDataError(f"no overlap samples recorded at t = {t}")
    samples = trace.overlap_samples[t]
    return sum(1 for v in samples if v > threshold) / len(samples)
