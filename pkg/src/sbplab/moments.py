"""Exact log-space evaluation of the pair-overlap ratio sum.

The central object is the dimensionless sum

    total = 2^{-n} * sum_s  C(n, (n+s)/2) * (q(beta_s) / p^2)^m,

over signed overlaps s = n (mod 2) with beta_s = 1/2 + s/(2n).  It is
split into three regions at |s| = 2*delta*n and |s| = (1-2*delta)*n
(central / middle / endpoint).  Everything runs in log space through the
log-gamma function, so n up to 10^7 is fine.

For n above the fast-path threshold, q on the central window is evaluated
through its corrected local expansion log(q/p^2) = log1p(2(1-mu2)^2 eps^2)
with eps = s/(2n) (quartic remainder bounded; m * remainder stays well
below 1), and outside the window through a cubic-spline surrogate whose
nodes are exact quadrature values of log q, with a probe-residual
certificate m * |resid| <= 1e-6 (densified on failure).

All operations are pure; array reductions are numpy/scipy deterministic
single-order reductions, so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, logsumexp
from scipy.stats import linregress

from .analytic import ModelParams, alpha_c, gauss_p, log_gauss_p, log_pair_q, mu2, pair_q
from .errors import AccuracyError, DomainError

_LOG2 = math.log(2.0)

# exact quadrature for every unique |s| at or below this n
FAST_PATH_MIN_N = 10_000
# fast path: local expansion for |s| <= n**_CENTRAL_EXPONENT
_CENTRAL_EXPONENT = 0.6
_MAX_N = 10 ** 7
_SURROGATE_NODES = 2000
_SURROGATE_MAX_NODES = 8000
_SURROGATE_PROBES = 25
_SURROGATE_TOL = 1e-6  # bound on m * |log-q surrogate residual|


@dataclass(frozen=True)
class MomentRatioReport:
    """Ratio total with its three-region decomposition.

    i1 collects |s| <= 2*delta*n, i2 the middle band, i3 the near-endpoint
    band |s| >= (1-2*delta)*n.  b_value is B = sqrt(alpha)*(1-mu2)/2 with
    alpha = m/n; gaussian_limit the reference constant
    exp(-2B^2)/sqrt(1-4B^2) (infinite once 4B^2 >= 1).  endpoint_low and
    endpoint_high are the single summands at s = -n and s = +n.
    """

    params: ModelParams
    total: float
    i1: float
    i2: float
    i3: float
    delta: float
    b_value: float
    gaussian_limit: float
    log_total: float
    endpoint_low: float
    endpoint_high: float

    def to_dict(self) -> dict:
        return {
            "params": {"K": self.params.K, "alpha": self.params.alpha,
                       "n": self.params.n, "m": self.params.m},
            "total": self.total,
            "i1": self.i1,
            "i2": self.i2,
            "i3": self.i3,
            "delta": self.delta,
            "b_value": self.b_value,
            "gaussian_limit": self.gaussian_limit,
            "log_total": self.log_total,
            "endpoint_low": self.endpoint_low,
            "endpoint_high": self.endpoint_high,
        }


@dataclass(frozen=True)
class EndpointDecayReport:
    """Fit of the endpoint gap 1 - q(1/n)/p against c/sqrt(n)."""

    K: float
    n_list: tuple[int, ...]
    gaps: tuple[float, ...]
    c: float
    slope: float
    residual: float
    ok: bool

    def to_dict(self) -> dict:
        return {"K": self.K, "n_list": list(self.n_list),
                "gaps": list(self.gaps), "c": self.c, "slope": self.slope,
                "residual": self.residual, "ok": self.ok}


def _unique_abs_s(n: int) -> np.ndarray:
    """All |s| with s = n (mod 2), ascending; odd-parity s never exist."""
    return np.arange(n % 2, n + 1, 2, dtype=np.int64)


def _log_binom_terms(n: int, a_vals: np.ndarray) -> np.ndarray:
    """log[ C(n,(n+a)/2) * 2^{-n} ] for each unique |s| = a."""
    half_hi = (n + a_vals) / 2.0
    half_lo = (n - a_vals) / 2.0
    return (gammaln(n + 1.0) - gammaln(half_hi + 1.0) - gammaln(half_lo + 1.0)
            - n * _LOG2)


def _log_q_ratio_exact(K: float, n: int, a_vals: np.ndarray) -> np.ndarray:
    lp2 = 2.0 * log_gauss_p(K)
    out = np.empty(len(a_vals))
    for i, a in enumerate(a_vals):
        out[i] = log_pair_q(K, 0.5 + a / (2.0 * n)) - lp2
    return out


_TAIL_SPLIT = 0.48  # eps beyond this uses the sqrt-variable spline


def _certified_spline(fn, xs: np.ndarray, m: int, what: str) -> CubicSpline:
    """Cubic spline through fn at the given nodes, with a probe residual
    certificate m * |resid| <= tol; the node set doubles on failure."""
    while True:
        ys = np.array([fn(x) for x in xs])
        spline = CubicSpline(xs, ys)
        mids = (xs[:-1] + xs[1:]) / 2.0
        probes = mids[:: max(1, len(mids) // _SURROGATE_PROBES)]
        resid = max(abs(spline(x) - fn(x)) for x in probes)
        if m * resid <= _SURROGATE_TOL:
            return spline
        if len(xs) >= _SURROGATE_MAX_NODES:
            raise AccuracyError(
                f"{what} surrogate residual {resid:.3e} * m = {m * resid:.3e} "
                f"exceeds {_SURROGATE_TOL} at {len(xs)} nodes")
        xs = np.linspace(xs[0], xs[-1], 2 * len(xs))


def _log_q_ratio_fast(K: float, n: int, m: int, a_vals: np.ndarray) -> np.ndarray:
    """Central local expansion + certified spline surrogates outside.

    The surrogate is split: the bulk is splined in eps directly; the tail
    near eps = 1/2 (the fold point beta = 1, where q has a square-root
    approach to p) is splined in t = sqrt(1/2 - eps), in which the
    function is smooth.
    """
    lp2 = 2.0 * log_gauss_p(K)
    eps = a_vals / (2.0 * n)
    out = np.empty(len(a_vals))

    def g_eps(x: float) -> float:
        return log_pair_q(K, 0.5 + x) - lp2

    # quadratic coefficient is exact; the quartic one is calibrated from
    # exact quadrature at three window points so the remainder drops to
    # O(eps^6), keeping m * error negligible at the window edge
    coef = 2.0 * (1.0 - mu2(K)) ** 2
    cut = n ** _CENTRAL_EXPONENT
    eps_cut = cut / (2.0 * n)
    cal = np.array([eps_cut, eps_cut / 1.5, eps_cut / 3.0])
    c4 = float(np.mean([(g_eps(x) - math.log1p(coef * x * x)) / x ** 4
                        for x in cal]))
    central = a_vals <= cut
    ec = eps[central]
    out[central] = np.log1p(coef * ec ** 2) + c4 * ec ** 4

    bulk = ~central & (eps <= _TAIL_SPLIT)
    if bulk.any():
        lo = 0.9 * cut / (2.0 * n)
        spline = _certified_spline(
            g_eps, np.linspace(lo, _TAIL_SPLIT, _SURROGATE_NODES), m, "log-q")
        out[bulk] = spline(eps[bulk])

    tail = eps > _TAIL_SPLIT
    if tail.any():
        t_hi = math.sqrt(0.5 - _TAIL_SPLIT)
        spline = _certified_spline(
            lambda t: g_eps(0.5 - t * t),
            np.linspace(0.0, t_hi, _SURROGATE_NODES // 2), m, "log-q tail")
        out[tail] = spline(np.sqrt(0.5 - eps[tail]))
    return out


def _log_q_ratio(K: float, n: int, m: int, a_vals: np.ndarray,
                 mode: str) -> np.ndarray:
    if mode == "exact" or (mode == "auto" and n <= FAST_PATH_MIN_N):
        return _log_q_ratio_exact(K, n, a_vals)
    if mode in ("fast", "auto"):
        return _log_q_ratio_fast(K, n, m, a_vals)
    raise ValueError(f"unknown mode {mode!r}")


def _region_masks(n: int, delta: float,
                  a_vals: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    central = a_vals <= 2.0 * delta * n
    endpoint = a_vals >= (1.0 - 2.0 * delta) * n
    middle = ~(central | endpoint)
    return central, middle, endpoint


def _masked_sum(lterms: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """(value, log value) of the masked region; empty region sums to 0."""
    if not mask.any():
        return 0.0, -math.inf
    lv = float(logsumexp(lterms[mask]))
    return math.exp(lv), lv


def ratio_exact(params: ModelParams, delta: float = 0.05,
                _mode: str = "auto") -> MomentRatioReport:
    """Evaluate the ratio sum and its region decomposition.

    delta must lie in (0, 1/4).  _mode forces the q-evaluation route
    ("exact" / "fast") and exists for cross-validation; the default picks
    exact quadrature for n <= 10^4 and the certified fast path above.
    """
    if not 0.0 < delta < 0.25:
        raise DomainError(f"delta must lie in (0, 1/4), got {delta}")
    n, m, K = params.n, params.m, params.K
    if n > _MAX_N:
        raise DomainError(f"n = {n} exceeds the summation budget {_MAX_N}")

    a_vals = _unique_abs_s(n)
    log_ratio = (np.zeros(len(a_vals)) if m == 0
                 else _log_q_ratio(K, n, m, a_vals, _mode))
    # each a > 0 stands for both signs of s
    mult = np.where(a_vals > 0, _LOG2, 0.0)
    lterms = _log_binom_terms(n, a_vals) + m * log_ratio + mult

    c_mask, m_mask, e_mask = _region_masks(n, delta, a_vals)
    i1, _ = _masked_sum(lterms, c_mask)
    i2, _ = _masked_sum(lterms, m_mask)
    i3, _ = _masked_sum(lterms, e_mask)

    if m == 0:
        # empty product: the full sum telescopes to 1 by the binomial
        # theorem, so report the exact value rather than its float image
        total, log_total = 1.0, 0.0
    else:
        log_total = float(logsumexp(lterms))
        total = math.exp(log_total)

    # single-sign summand at s = +n (and by symmetry s = -n)
    endpoint = math.exp(float(lterms[-1] - mult[-1]))

    alpha_eff = m / n
    b = math.sqrt(alpha_eff) * (1.0 - mu2(K)) / 2.0
    four_b2 = 4.0 * b * b
    if four_b2 >= 1.0:
        glim = math.inf
    else:
        glim = math.exp(-2.0 * b * b) / math.sqrt(1.0 - four_b2)

    return MomentRatioReport(params=params, total=total, i1=i1, i2=i2, i3=i3,
                             delta=delta, b_value=b, gaussian_limit=glim,
                             log_total=log_total, endpoint_low=endpoint,
                             endpoint_high=endpoint)


def ratio_totals_sorted(params: ModelParams, delta: float = 0.05,
                        descending: bool = False) -> float:
    """Total recomputed by naive ordered accumulation of the summands.

    Exists to witness summation-order robustness: ascending and
    descending accumulation must agree to high relative precision.
    """
    if not 0.0 < delta < 0.25:
        raise DomainError(f"delta must lie in (0, 1/4), got {delta}")
    n, m, K = params.n, params.m, params.K
    a_vals = _unique_abs_s(n)
    log_ratio = (np.zeros(len(a_vals)) if m == 0
                 else _log_q_ratio(K, n, m, a_vals, "auto"))
    mult = np.where(a_vals > 0, _LOG2, 0.0)
    lterms = _log_binom_terms(n, a_vals) + m * log_ratio + mult
    shift = lterms.max()
    terms = np.exp(np.sort(lterms) - shift)
    if descending:
        terms = terms[::-1]
    acc = 0.0
    for t in terms:
        acc += t
    return math.exp(shift) * acc


def ratio_monotone_in_alpha(K: float, n: int,
                            m_list: Sequence[int]) -> list[float]:
    """Totals for each m in m_list, sharing one q evaluation per |s|.

    Every m must stay at or below round(alpha_c(K) * n).
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if n > _MAX_N:
        raise DomainError(f"n = {n} exceeds the summation budget {_MAX_N}")
    ms = [int(m) for m in m_list]
    if any(m < 0 for m in ms):
        raise DomainError("m values must be nonnegative")
    m_cap = round(alpha_c(K) * n)
    if any(m > m_cap for m in ms):
        raise DomainError(f"m values must not exceed round(alpha_c*n) = {m_cap}")

    a_vals = _unique_abs_s(n)
    base = _log_binom_terms(n, a_vals) + np.where(a_vals > 0, _LOG2, 0.0)
    if any(m > 0 for m in ms):
        log_ratio = _log_q_ratio(K, n, max(ms), a_vals, "auto")
    else:
        log_ratio = np.zeros(len(a_vals))

    out = []
    for m in ms:
        if m == 0:
            out.append(1.0)
        else:
            out.append(math.exp(float(logsumexp(base + m * log_ratio))))
    return out


def q_endpoint_decay(K: float, n_list: Sequence[int]) -> EndpointDecayReport:
    """Fit the endpoint gap 1 - q(1/n)/p to c/sqrt(n).

    Returns the constrained-fit constant c, the free log-log slope, and
    the RMS residual of the constrained fit.  A nonpositive measured gap
    yields ok=False with NaN fit fields instead of raising.
    """
    ns = tuple(int(n) for n in n_list)
    if len(ns) < 2:
        raise DomainError("n_list needs at least two sizes to fit a slope")
    if any(n < 10 for n in ns):
        raise DomainError("all n must be at least 10")
    p = gauss_p(K)
    gaps = tuple(1.0 - pair_q(K, 1.0 / n) / p for n in ns)
    if any(g <= 0 for g in gaps):
        return EndpointDecayReport(K=K, n_list=ns, gaps=gaps, c=math.nan,
                                   slope=math.nan, residual=math.nan, ok=False)
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array(gaps))
    slope = float(linregress(x, y).slope)
    log_c = float(np.mean(y + 0.5 * x))
    residual = float(np.sqrt(np.mean((y - (log_c - 0.5 * x)) ** 2)))
    return EndpointDecayReport(K=K, n_list=ns, gaps=gaps, c=math.exp(log_c),
                               slope=slope, residual=residual, ok=True)
