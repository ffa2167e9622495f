"""Monte Carlo experiment harness over the exact solver.

Every stochastic experiment draws instance t of size (n, m) from the
counter-based stream (seed, stream_id=t), so different experiment kinds
sharing a seed see identical instances and cross-experiment identities
(success frequency = 1 - lower-tail frequency at y = 0, annulus counts
vs window probabilities) hold exactly, not just in distribution.  Disc
values and critical-threshold counts are memoized per (seed, n, m) and
grown on demand; aggregation is an ordered reduce over trial index, so
reports are byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import linregress
from scipy.stats import t as student_t

from .analytic import alpha_c, k_c
from .cube import (RNG_TRANSFORM, _bit_generator, _DOMAIN_SIGMA, _scan,
                   exact_objective, generate_instance, run_capacity,
                   solve_exact)
from .errors import BudgetError, ConfigError, DomainError

EXPERIMENT_KINDS = ("window", "capacity", "tail_lower", "success_at_kc",
                    "anticoncentration", "martingale")
DESK_SCALE_MAX_N = 26
HARD_MAX_N = 30
MIN_ALIVE_FOR_STATS = 30

_Z975 = float(ndtri(0.975))

CSV_COLUMNS = ("seed", "stream_id", "n", "m", "K", "disc", "count_at_kc",
               "alpha_star")


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval; at zero successes the upper limit is a
    usable one-sided bound, so censored cells never need log(0)."""
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes {successes} outside [0, {trials}]")
    z2 = _Z975 * _Z975
    ph = successes / trials
    denom = 1.0 + z2 / trials
    center = (ph + z2 / (2 * trials)) / denom
    half = _Z975 * math.sqrt(ph * (1 - ph) / trials
                             + z2 / (4 * trials * trials)) / denom
    # the exact endpoints at degenerate counts are 0 and 1; rounding in
    # center - half can miss them by an ulp and exclude the estimate
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: kind, sizes, trial count, seed, and kind knobs.

    Exactly one of K, alpha is given; the other is derived through the
    critical curve.  n above 26 needs allow_slow (exact enumeration cost
    doubles per unit n); 30 is a hard cap.
    """

    experiment_kind: str
    n_list: tuple
    trials: int
    seed: int
    K: Optional[float] = None
    alpha: Optional[float] = None
    output_path: Optional[str] = None
    y_grid: Optional[tuple] = None
    eps_list: tuple = (0.1, 0.3, 1.0)
    x_log_factor: float = 3.0
    coupled_k: tuple = ()
    threads: Optional[int] = None
    cache_dir: Optional[str] = None
    allow_slow: bool = False

    def __post_init__(self):
        if self.experiment_kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind "
                              f"{self.experiment_kind!r}; expected one of "
                              f"{EXPERIMENT_KINDS}")
        if (self.K is None) == (self.alpha is None):
            raise ConfigError("exactly one of K and alpha must be set")
        if self.K is not None and not self.K > 0:
            raise DomainError(f"K must be positive, got {self.K}")
        if self.alpha is not None and not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        ns = tuple(int(n) for n in self.n_list)
        if not ns:
            raise ConfigError("n_list must not be empty")
        for n in ns:
            if n < 1:
                raise DomainError(f"n must be at least 1, got {n}")
            if n > HARD_MAX_N:
                raise BudgetError(f"n = {n} exceeds the hard cap "
                                  f"{HARD_MAX_N}")
            if n > DESK_SCALE_MAX_N and not self.allow_slow:
                raise BudgetError(
                    f"n = {n} exceeds the desk-scale default "
                    f"{DESK_SCALE_MAX_N}; pass allow_slow=True to override")
        object.__setattr__(self, "n_list", ns)
        if self.trials < 1:
            raise DomainError(f"trials must be at least 1, got {self.trials}")
        if self.y_grid is not None:
            ys = tuple(float(y) for y in self.y_grid)
            for y in ys:
                if not 0.0 <= y <= 0.5:
                    raise DomainError(f"tail offset {y} outside [0, 0.5]")
            object.__setattr__(self, "y_grid", tuple(sorted(ys)))
        eps = tuple(float(e) for e in self.eps_list)
        for e in eps:
            if not 0.0 <= e <= 1.0:
                raise DomainError(f"window width {e} outside [0, 1]")
        object.__setattr__(self, "eps_list", eps)
        if not self.x_log_factor > 0:
            raise DomainError(f"x_log_factor must be positive, got "
                              f"{self.x_log_factor}")
        ck = tuple(sorted(float(k) for k in self.coupled_k))
        for k in ck:
            if not k > 0:
                raise DomainError(f"coupled K must be positive, got {k}")
        object.__setattr__(self, "coupled_k", ck)

    @property
    def alpha_base(self) -> float:
        return self.alpha if self.alpha is not None else alpha_c(self.K)

    @property
    def base_k(self) -> float:
        return self.K if self.K is not None else k_c(self.alpha)

    def critical_pair(self, n: int) -> tuple[int, float]:
        """m = round(alpha n) and the K where E|Z| = 1 at that exact m."""
        m = round(self.alpha_base * n)
        if m < 1:
            raise DomainError(f"derived row count {m} at n = {n} is below 1")
        return m, k_c(m / n)

    def echo(self) -> dict:
        """Result-determining fields only: runtime knobs (threads, cache,
        output location) never change report content."""
        return {"experiment_kind": self.experiment_kind,
                "K": self.K, "alpha": self.alpha,
                "n_list": list(self.n_list), "trials": self.trials,
                "seed": self.seed,
                "y_grid": list(self.y_grid) if self.y_grid else None,
                "eps_list": list(self.eps_list),
                "x_log_factor": self.x_log_factor,
                "coupled_k": list(self.coupled_k)}


def _worker_count(config: ExperimentConfig) -> int:
    if config.threads is not None:
        if config.threads < 1:
            raise DomainError(f"threads must be positive, got "
                              f"{config.threads}")
        return config.threads
    return os.cpu_count() or 1


def _map_ordered(fn: Callable, ids: Sequence[int], workers: int) -> list:
    if workers <= 1 or len(ids) <= 1:
        return [fn(i) for i in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, ids))


# disc and |Z_{K_c}| per (seed, n, m), grown on demand so experiment
# kinds and repeated runs share instances instead of regenerating
_TABLES: dict = {}


def _table_paths(cache_dir: str, seed: int, n: int, m: int) -> tuple:
    stem = os.path.join(cache_dir, f"table_{seed}_{n}_{m}")
    return stem + "_disc.npy", stem + "_count.npy"


def clear_disc_cache() -> None:
    """Drop the in-process disc tables (disk caches stay)."""
    _TABLES.clear()


def _disc_table(config: ExperimentConfig, n: int, m: int,
                kc: float) -> tuple[np.ndarray, np.ndarray]:
    """disc and count-at-K_c arrays for trials 0..trials-1 of (seed,n,m)."""
    key = (config.seed, n, m)
    ent = _TABLES.get(key)
    if ent is None:
        ent = {"disc": np.empty(0), "count": np.empty(0, dtype=np.int64)}
        if config.cache_dir:
            dpath, cpath = _table_paths(config.cache_dir, config.seed, n, m)
            if os.path.exists(dpath) and os.path.exists(cpath):
                ent["disc"] = np.load(dpath)
                ent["count"] = np.load(cpath)
        _TABLES[key] = ent
    have = len(ent["disc"])
    if have < config.trials:
        def one(t: int) -> tuple[float, int]:
            inst = generate_instance(n, m, config.seed, t)
            rep = solve_exact(inst, count_at_k=kc)
            return rep.disc_value, rep.count_at[1]

        got = _map_ordered(one, range(have, config.trials),
                           _worker_count(config))
        ent["disc"] = np.concatenate(
            [ent["disc"], np.array([g[0] for g in got])])
        ent["count"] = np.concatenate(
            [ent["count"], np.array([g[1] for g in got], dtype=np.int64)])
        if config.cache_dir:
            os.makedirs(config.cache_dir, exist_ok=True)
            dpath, cpath = _table_paths(config.cache_dir, config.seed, n, m)
            np.save(dpath, ent["disc"])
            np.save(cpath, ent["count"])
    return ent["disc"][:config.trials], ent["count"][:config.trials]


# --- reports ---------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentReport:
    """Summary (JSON) plus one CSV row per (n, trial).

    per_n holds the per-size summary dicts; regression is the fitted
    block when the kind defines one.  Every frequency comes with its
    Wilson interval and every mean with its standard error.
    """

    config: ExperimentConfig
    per_n: tuple
    rows: tuple = field(repr=False)
    regression: Optional[dict] = None

    def to_dict(self, timestamp: Optional[str] = None) -> dict:
        from sbplab import __version__
        return {"kind": self.config.experiment_kind,
                "config": self.config.echo(),
                "per_n": [dict(d) for d in self.per_n],
                "regression": dict(self.regression)
                if self.regression is not None else None,
                "metadata": {"version": __version__,
                             "rng_transform": RNG_TRANSFORM,
                             "timestamp": timestamp}}

    def to_json(self, timestamp: Optional[str] = None) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2) + "\n"

    def write(self, base_path: str,
              timestamp: Optional[str] = None) -> tuple[str, str]:
        """Write <base>.json and <base>.csv; returns both paths."""
        if base_path.endswith(".json") or base_path.endswith(".csv"):
            base_path = base_path.rsplit(".", 1)[0]
        parent = os.path.dirname(base_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        jpath, cpath = base_path + ".json", base_path + ".csv"
        with open(jpath, "w", newline="") as fh:
            fh.write(self.to_json(timestamp))
        _write_csv(cpath, self.rows)
        return jpath, cpath


class WindowReport(ExperimentReport):
    pass


def _write_csv(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else row.get(c)
                             for c in CSV_COLUMNS])


def _flush_partial(config: ExperimentConfig, rows: list) -> None:
    if config.output_path and rows:
        base = config.output_path
        if base.endswith(".json") or base.endswith(".csv"):
            base = base.rsplit(".", 1)[0]
        parent = os.path.dirname(base)
        if parent:
            os.makedirs(parent, exist_ok=True)
        _write_csv(base + ".partial.csv", rows)


def _require_kind(config: ExperimentConfig, kind: str) -> None:
    if config.experiment_kind != kind:
        raise ConfigError(f"config kind {config.experiment_kind!r} does not "
                          f"match runner {kind!r}")


def _finish(cls, config: ExperimentConfig, per_n: list, rows: list,
            regression: Optional[dict] = None) -> ExperimentReport:
    report = cls(config=config, per_n=tuple(per_n), rows=tuple(rows),
                 regression=regression)
    if config.output_path:
        report.write(config.output_path)
    return report


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, float("nan")
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _table_rows(config: ExperimentConfig, n: int, m: int, kc: float,
                disc: np.ndarray, count: np.ndarray) -> list:
    return [{"seed": config.seed, "stream_id": t, "n": n, "m": m,
             "K": kc, "disc": float(disc[t]), "count_at_kc": int(count[t]),
             "alpha_star": None} for t in range(len(disc))]


# --- disc-statistics experiments -------------------------------------------

def run_window(config: ExperimentConfig) -> WindowReport:
    """Centered disc statistics per n plus the log-log width regression.

    Width is the 0.9-0.1 quantile spread; the regression fits log std
    against log n with a t-based 95% band (needs at least 3 sizes).
    """
    _require_kind(config, "window")
    per_n, rows, log_n, log_std = [], [], [], []
    try:
        for n in config.n_list:
            m, kc = config.critical_pair(n)
            disc, count = _disc_table(config, n, m, kc)
            std = float(np.std(disc, ddof=1)) if len(disc) > 1 else 0.0
            q10, q50, q90 = (float(np.quantile(disc, q))
                             for q in (0.1, 0.5, 0.9))
            hits = int(np.sum(disc <= kc))
            lo, hi = wilson_interval(hits, len(disc))
            per_n.append({
                "n": n, "m": m, "k_c": kc, "trials": len(disc),
                "disc_mean": float(np.mean(disc)), "disc_median": q50,
                "disc_std": std, "spread": q90 - q10,
                "median_gap": q50 - kc,
                "success_freq": hits / len(disc),
                "success_ci_low": lo, "success_ci_high": hi})
            rows.extend(_table_rows(config, n, m, kc, disc, count))
            if std > 0:
                log_n.append(math.log(n))
                log_std.append(math.log(std))
    except BaseException:
        _flush_partial(config, rows)
        raise
    regression = _fit_line(log_n, log_std)
    return _finish(WindowReport, config, per_n, rows, regression)


def _fit_line(xs: Sequence[float], ys: Sequence[float]) -> Optional[dict]:
    if len(xs) < 3:
        return None
    fit = linregress(xs, ys)
    tq = float(student_t.ppf(0.975, len(xs) - 2))
    return {"slope": float(fit.slope), "intercept": float(fit.intercept),
            "ci_low": float(fit.slope - tq * fit.stderr),
            "ci_high": float(fit.slope + tq * fit.stderr),
            "stderr": float(fit.stderr),
            "r2": float(fit.rvalue) ** 2, "points": len(xs)}


def run_success_at_kc(config: ExperimentConfig) -> ExperimentReport:
    """P(disc <= K_c) per n with Wilson bands, plus the E|Z_{K_c}|
    sanity estimate from the same scans (its mean is 1 by construction
    of K_c at integer m)."""
    _require_kind(config, "success_at_kc")
    per_n, rows = [], []
    try:
        for n in config.n_list:
            m, kc = config.critical_pair(n)
            disc, count = _disc_table(config, n, m, kc)
            hits = int(np.sum(disc <= kc))
            lo, hi = wilson_interval(hits, len(disc))
            ez_mean, ez_se = _mean_se(count.astype(np.float64))
            per_n.append({
                "n": n, "m": m, "k_c": kc, "trials": len(disc),
                "success_freq": hits / len(disc),
                "success_ci_low": lo, "success_ci_high": hi,
                "ez_mean": ez_mean, "ez_se": ez_se})
            rows.extend(_table_rows(config, n, m, kc, disc, count))
    except BaseException:
        _flush_partial(config, rows)
        raise
    return _finish(ExperimentReport, config, per_n, rows)


DEFAULT_Y_GRID = (0.0, 0.01, 0.02, 0.04, 0.08)


def run_tail_lower(config: ExperimentConfig,
                   y_grid: Optional[Sequence[float]] = None
                   ) -> ExperimentReport:
    """P((disc - K_c)_- > y) per (n, y) and the rate fit in n*y.

    Cells with zero hits are censored: frequency null, upper Wilson
    bound kept, excluded from the fit.  On shared instances the y = 0
    cell is exactly 1 - success frequency up to ties at K_c.
    """
    _require_kind(config, "tail_lower")
    if y_grid is None:
        y_grid = config.y_grid if config.y_grid is not None else \
            DEFAULT_Y_GRID
    ys = tuple(sorted(float(y) for y in y_grid))
    for y in ys:
        if not 0.0 <= y <= 0.5:
            raise DomainError(f"tail offset {y} outside [0, 0.5]")
    per_n, rows, fit_x, fit_y = [], [], [], []
    try:
        for n in config.n_list:
            m, kc = config.critical_pair(n)
            disc, count = _disc_table(config, n, m, kc)
            cells = []
            for y in ys:
                hits = int(np.sum(disc < kc - y))
                lo, hi = wilson_interval(hits, len(disc))
                freq = hits / len(disc) if hits > 0 else None
                cells.append({"y": y, "ny": n * y, "hits": hits,
                              "freq": freq, "ci_low": lo, "ci_high": hi,
                              "censored": hits == 0})
                if hits > 0 and y > 0:
                    fit_x.append(n * y)
                    fit_y.append(math.log(hits / len(disc)))
            per_n.append({"n": n, "m": m, "k_c": kc, "trials": len(disc),
                          "cells": cells})
            rows.extend(_table_rows(config, n, m, kc, disc, count))
    except BaseException:
        _flush_partial(config, rows)
        raise
    return _finish(ExperimentReport, config, per_n, rows,
                   _fit_line(fit_x, fit_y))


def run_anticoncentration(config: ExperimentConfig,
                          eps: Optional[Sequence[float]] = None
                          ) -> ExperimentReport:
    """Annulus statistics at K_c: window probability per unit eps,
    direct annulus solution counts, and tight-row counts at a uniform
    sigma.  One enumeration per trial serves every eps at once.
    """
    _require_kind(config, "anticoncentration")
    if eps is None:
        eps_list = config.eps_list
    elif np.isscalar(eps):
        eps_list = (float(eps),)
    else:
        eps_list = tuple(float(e) for e in eps)
    for e in eps_list:
        if not 0.0 <= e <= 1.0:
            raise DomainError(f"window width {e} outside [0, 1]")
    per_n, rows = [], []
    try:
        for n in config.n_list:
            m, kc = config.critical_pair(n)
            lows = [kc - e / n for e in eps_list]
            thresholds = sorted(set(lows + [kc]))

            def one(t: int):
                inst = generate_instance(n, m, config.seed, t)
                best, bestidx, counts = _scan(inst, thresholds)
                from .cube import _sigma_from_index
                disc = exact_objective(
                    inst.rows, _sigma_from_index(n, int(bestidx)))
                gen = np.random.Generator(
                    _bit_generator(config.seed, t, _DOMAIN_SIGMA, 0))
                sigma = 2.0 * gen.integers(0, 2, size=n) - 1.0
                prods = np.abs(inst.rows @ sigma)
                tight = [int(np.sum((prods >= kc - e / n) & (prods <= kc)))
                         for e in eps_list]
                return disc, {thr: 2 * int(c)
                              for thr, c in zip(thresholds, counts)}, tight

            got = _map_ordered(one, range(config.trials),
                               _worker_count(config))
            disc = np.array([g[0] for g in got])
            count_kc = np.array([g[1][kc] for g in got], dtype=np.int64)
            ez_mean, ez_se = _mean_se(count_kc.astype(np.float64))
            cells = []
            for e, low in zip(eps_list, lows):
                in_window = int(np.sum((disc >= low) & (disc <= kc)))
                lo, hi = wilson_interval(in_window, config.trials)
                xi = np.array([g[1][kc] - g[1][low] for g in got],
                              dtype=np.float64)
                xi_mean, xi_se = _mean_se(xi)
                tight = np.array([g[2][i] for g in got
                                  for i in [eps_list.index(e)]])
                prob = in_window / config.trials
                cells.append({
                    "eps": e, "window_prob": prob,
                    "ci_low": lo, "ci_high": hi,
                    "prob_per_eps": prob / e if e > 0 else None,
                    "xi_mean": xi_mean, "xi_se": xi_se,
                    "tight_mean": float(np.mean(tight)),
                    "tight_hist": {str(k): int(v) for k, v in
                                   sorted(Counter(tight.tolist()).items())}})
            ratios = [c["prob_per_eps"] for c in cells
                      if c["prob_per_eps"] is not None]
            per_n.append({
                "n": n, "m": m, "k_c": kc, "trials": config.trials,
                "ez_mean": ez_mean, "ez_se": ez_se,
                "c_measured": max(ratios) if ratios else None,
                "cells": cells})
            rows.extend(_table_rows(config, n, m, kc, disc, count_kc))
    except BaseException:
        _flush_partial(config, rows)
        raise
    return _finish(ExperimentReport, config, per_n, rows)


# --- capacity-process experiments ------------------------------------------

def run_capacity_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Storage capacity alpha* = t*/n over independent row streams."""
    _require_kind(config, "capacity")
    k_run = config.base_k
    per_n, rows = [], []
    try:
        for n in config.n_list:
            def one(t: int) -> float:
                return run_capacity(n, k_run, config.seed, t).alpha_star

            stars = np.array(_map_ordered(one, range(config.trials),
                                          _worker_count(config)))
            mean, se = _mean_se(stars)
            per_n.append({
                "n": n, "K": k_run, "trials": config.trials,
                "alpha_star_mean": mean, "alpha_star_se": se,
                "alpha_star_std": float(np.std(stars, ddof=1))
                if len(stars) > 1 else 0.0,
                "alpha_star_min": float(np.min(stars)),
                "alpha_star_max": float(np.max(stars))})
            rows.extend({"seed": config.seed, "stream_id": t, "n": n,
                         "m": None, "K": k_run, "disc": None,
                         "count_at_kc": None,
                         "alpha_star": float(stars[t])}
                        for t in range(config.trials))
    except BaseException:
        _flush_partial(config, rows)
        raise
    return _finish(ExperimentReport, config, per_n, rows)


def run_martingale(config: ExperimentConfig) -> ExperimentReport:
    """Centering and scale diagnostics for the solution-count process.

    Per step: conditional mean/std of Y over still-alive trials (kept
    when at least 30 contribute), with the sqrt(log n / n) reference.
    Per trial: the Q reconstruction defect, max |Q_t| up to the
    t0 = round(alpha n) - ceil(x log n) horizon, and emptiness at t0.
    With coupled_k set, alpha* is rerun on the same streams at each K
    and monotonicity is scored per trial.
    """
    _require_kind(config, "martingale")
    k_run = config.base_k
    per_n, rows = [], []
    try:
        for n in config.n_list:
            t0 = round(config.alpha_base * n) - math.ceil(
                config.x_log_factor * math.log(n))
            if t0 < 1:
                raise DomainError(
                    f"horizon t0 = {t0} at n = {n}; x_log_factor "
                    f"{config.x_log_factor} too large for this size")

            def one(t: int):
                tr = run_capacity(n, k_run, config.seed, t)
                ys = list(tr.y_trace)
                alive = len(tr.sizes) - 1
                qerr = 0.0
                acc = 0.0
                for s in range(1, alive + 1):
                    acc += math.log1p(ys[s - 1])
                    qerr = max(qerr, abs(acc - tr.q_trace[s]))
                qmax = max(abs(q) for q in tr.q_trace[:min(t0, alive) + 1])
                nested = all(tr.sizes[i + 1] <= tr.sizes[i]
                             for i in range(alive))
                coupled = [tr.alpha_star if abs(k - k_run) < 1e-15 else
                           run_capacity(n, k, config.seed, t).alpha_star
                           for k in config.coupled_k]
                return (ys, tr.alpha_star, qerr, qmax, alive < t0, nested,
                        coupled)

            got = _map_ordered(one, range(config.trials),
                               _worker_count(config))
            scale = math.sqrt(math.log(n) / n)
            y_rows = []
            step = 1
            while True:
                vals = np.array([g[0][step - 1] for g in got
                                 if len(g[0]) >= step])
                if len(vals) < MIN_ALIVE_FOR_STATS:
                    break
                mean, se = _mean_se(vals)
                std = float(np.std(vals, ddof=1))
                y_rows.append({"t": step, "alive": len(vals),
                               "y_mean": mean, "y_se": se, "y_std": std,
                               "y_std_over_scale": std / scale})
                step += 1
            empty_hits = sum(1 for g in got if g[4])
            lo, hi = wilson_interval(empty_hits, config.trials)
            qmaxes = np.array([g[3] for g in got])
            summary = {
                "n": n, "K": k_run, "trials": config.trials, "t0": t0,
                "y_scale": scale, "y_rows": y_rows,
                "q_identity_max_err": float(max(g[2] for g in got)),
                "q_max_mean": float(np.mean(qmaxes)),
                "q_max_q90": float(np.quantile(qmaxes, 0.9)),
                "q_max_max": float(np.max(qmaxes)),
                "empty_freq_at_t0": empty_hits / config.trials,
                "empty_ci_low": lo, "empty_ci_high": hi,
                "nested_frac": sum(1 for g in got if g[5]) / config.trials}
            if config.coupled_k:
                mono = sum(1 for g in got
                           if all(a <= b + 1e-15 for a, b in
                                  zip(g[6], g[6][1:])))
                summary["coupled_k"] = list(config.coupled_k)
                summary["coupled_alpha_star_means"] = [
                    float(np.mean([g[6][i] for g in got]))
                    for i in range(len(config.coupled_k))]
                summary["coupled_monotone_frac"] = mono / config.trials
            per_n.append(summary)
            rows.extend({"seed": config.seed, "stream_id": t, "n": n,
                         "m": None, "K": k_run, "disc": None,
                         "count_at_kc": None,
                         "alpha_star": float(got[t][1])}
                        for t in range(config.trials))
    except BaseException:
        _flush_partial(config, rows)
        raise
    return _finish(ExperimentReport, config, per_n, rows)


_RUNNERS = {"window": run_window,
            "capacity": run_capacity_experiment,
            "tail_lower": run_tail_lower,
            "success_at_kc": run_success_at_kc,
            "anticoncentration": run_anticoncentration,
            "martingale": run_martingale}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Dispatch on config.experiment_kind."""
    return _RUNNERS[config.experiment_kind](config)
