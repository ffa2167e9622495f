"""Scalar theory for the symmetric binary perceptron with Gaussian rows.

All quantities are functions of the discrepancy bound K > 0 and the
constraint density alpha = m/n.

FORMULAS
    p(K)      = P(|Z| <= K)                       for Z standard normal
    mu2(K)    = E[Z^2 | |Z| <= K]
              = 1 - sqrt(2/pi) K exp(-K^2/2) / p(K)
    q(K,b)    = P(|sqrt(b) X + sqrt(1-b) Y| <= K,
                  |sqrt(b) X - sqrt(1-b) Y| <= K)  for X, Y iid standard normal
    alpha_c(K) = -log 2 / log p(K)        (density where E|Z_K| crosses 1)
    K_c(a)    = the unique K with alpha_c(K) = a
    F(b)      = H(b) + alpha log q(K,b)   (pair free energy; H binary entropy)
    F''(1/2)  = 4 (-1 + (2/pi) alpha K^2 exp(-K^2) / p^2)
    L(b)      = (alpha/pi) (exp(-K^2/(2(1-b))) - exp(-K^2/(2b)))
                 / (sqrt(b(1-b)) (log(1-b) - log b))
    and F'(b) = log((1-b)/b) (1 - L(b)/q(b)), so F'(b) > 0 iff L(b) < q(b)
    on 0 < b < 1/2.

The shape verifier checks, at alpha = alpha_c(K), that F decreases on a
prefix [0, b1], increases on a suffix [b2, 1/2], and sits below
F(1/2) - eps_gap on the middle [b1, b2], using grid evaluation with an
explicit derivative budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, ndtr

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_LOG2 = math.log(2.0)

# k_c root bracket; alpha outside [alpha_c(KC_MIN), alpha_c(KC_MAX)] is rejected
_KC_BRACKET_LO = 1e-6
_KC_BRACKET_HI = 20.0

# quadrature targets for the pair probability (it is raised to the m-th
# power downstream, so per-call error must stay far below 1/m)
_QUAD_EPSABS = 1e-12
_QUAD_EPSREL = 1e-12
_QUAD_LIMIT = 200


# ---------------------------------------------------------------------------
# elementary scalars
# ---------------------------------------------------------------------------

def gauss_p(K: float) -> float:
    """P(|Z| <= K) for a standard normal Z."""
    if K < 0:
        raise DomainError(f"K must be nonnegative, got {K}")
    return math.erf(K / _SQRT2)


def log_gauss_p(K: float) -> float:
    """log P(|Z| <= K), accurate also when p(K) is within 1e-16 of 1."""
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    tail = erfc(K / _SQRT2)  # 1 - p, computed without cancellation
    if tail >= 1.0:
        raise DomainError(f"K={K} gives p=0; log p undefined")
    return math.log1p(-tail)


def mu2(K: float) -> float:
    """Conditional second moment E[Z^2 | |Z| <= K], closed form."""
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    return 1.0 - math.sqrt(2.0 / math.pi) * K * math.exp(-K * K / 2.0) / gauss_p(K)


def mu2_integral(K: float) -> float:
    """Same quantity by adaptive quadrature of x^2 phi(x) over [-K, K].

    Kept as an independent route for cross-checking the closed form.
    """
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    val, _ = quad(lambda x: x * x * _phi(x), -K, K,
                  epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=_QUAD_LIMIT)
    return val / gauss_p(K)


def _phi(x: float) -> float:
    return math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)


def pair_q(K: float, beta: float) -> float:
    """Pair probability q(K, beta).

    Probability that one Gaussian constraint is satisfied by both members of
    a pair of sign vectors agreeing on a beta fraction of coordinates.
    Computed as an iterated integral: outer variable over [-K, K], inner
    Gaussian CDF difference.
    """
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    if beta > 0.5:
        beta = 1.0 - beta  # exact symmetry q(b) = q(1-b)
    if beta == 0.0:
        return gauss_p(K)
    s = 2.0 * math.sqrt(beta * (1.0 - beta))
    c = 1.0 - 2.0 * beta

    def integrand(y: float) -> float:
        return _phi(y) * (ndtr((K + c * y) / s) - ndtr((-K + c * y) / s))

    val, _ = quad(integrand, -K, K,
                  epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=_QUAD_LIMIT)
    return val


def log_pair_q(K: float, beta: float) -> float:
    """log q(K, beta); q is bounded below by p^2 > 0 so the log is safe."""
    return math.log(pair_q(K, beta))


def alpha_c(K: float) -> float:
    """Critical density -log 2 / log p(K); strictly increasing in K."""
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    lp = log_gauss_p(K)
    if lp == 0.0:
        raise DomainError(f"K={K} too large: p rounds to 1 in float64")
    return -_LOG2 / lp


def k_c(alpha: float) -> float:
    """Inverse of alpha_c: the K at which the expected solution count is 1.

    Bracketing bisection on [1e-6, 20] to width 1e-12, then one secant
    polish; the residual |alpha_c(k_c(a)) - a| lands at evaluation
    precision for densities of desk scale.
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    lo, hi = _KC_BRACKET_LO, _KC_BRACKET_HI
    flo = alpha_c(lo) - alpha
    fhi = alpha_c(hi) - alpha
    if flo > 0 or fhi < 0:
        raise DomainError(
            f"alpha={alpha} outside invertible range "
            f"[{alpha_c(lo):.6g}, {alpha_c(hi):.6g}]")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        fmid = alpha_c(mid) - alpha
        if fmid <= 0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    if fhi != flo:
        sec = lo - flo * (hi - lo) / (fhi - flo)
        if lo <= sec <= hi:
            return sec
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Bound K, density alpha, dimension n, and integer row count m.

    m defaults to round(alpha * n) with round-half-to-even; every formula
    that needs a row count uses the integer m, never the real product.
    """

    K: float
    alpha: float
    n: int
    m: int = -1

    def __post_init__(self) -> None:
        if self.m < 0:
            object.__setattr__(self, "m", round(self.alpha * self.n))
        if self.K < 0:
            raise DomainError(f"K must be nonnegative, got {self.K}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")
        if self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if abs(self.m - self.alpha * self.n) > 0.5 + 1e-9:
            raise DomainError(
                f"m={self.m} inconsistent with alpha*n={self.alpha * self.n}")

    @classmethod
    def critical(cls, K: float, n: int) -> "ModelParams":
        """Parameters at density alpha_c(K)."""
        return cls(K=K, alpha=alpha_c(K), n=n)

    @classmethod
    def critical_rows(cls, alpha: float, n: int) -> "ModelParams":
        """Round alpha*n to an integer row count m, then recenter K.

        Sets K = K_c(m/n) so that the expected solution count at these
        exact integer parameters is 1.
        """
        m = round(alpha * n)
        if m < 1:
            raise DomainError(f"alpha={alpha}, n={n} give m={m} < 1")
        a_eff = m / n
        return cls(K=k_c(a_eff), alpha=a_eff, n=n, m=m)


def log_expected_solutions(params: ModelParams) -> float:
    """log E|Z_K| = n log 2 + m log p(K), in log space throughout."""
    if params.m == 0:
        return params.n * _LOG2
    return params.n * _LOG2 + params.m * log_gauss_p(params.K)


# ---------------------------------------------------------------------------
# free energy and its derivatives
# ---------------------------------------------------------------------------

def binary_entropy(beta: float) -> float:
    """H(beta) in nats with the 0 log 0 = 0 convention."""
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    h = 0.0
    if 0.0 < beta < 1.0:
        h = -beta * math.log(beta) - (1.0 - beta) * math.log(1.0 - beta)
    return h


def free_energy(params: ModelParams, beta: float) -> float:
    """F(beta) = H(beta) + alpha log q(K, beta).

    Endpoints use the limit values H -> 0, q -> p rather than log(0).
    """
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    if beta == 0.0 or beta == 1.0:
        return params.alpha * log_gauss_p(params.K)
    return binary_entropy(beta) + params.alpha * log_pair_q(params.K, beta)


def free_energy_second_deriv_half(params: ModelParams) -> float:
    """F''(1/2) in closed form."""
    K = params.K
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    p = gauss_p(K)
    return 4.0 * (-1.0 + (2.0 / math.pi) * params.alpha * K * K
                  * math.exp(-K * K) / (p * p))


def free_energy_second_deriv_half_fd(params: ModelParams,
                                     h: float = 1e-4) -> float:
    """Central second difference of F at 1/2, the cross-check value."""
    f0 = free_energy(params, 0.5)
    fp = free_energy(params, 0.5 + h)
    fm = free_energy(params, 0.5 - h)
    return (fp - 2.0 * f0 + fm) / (h * h)


def l_curve(params: ModelParams, beta: float) -> float:
    """The comparison curve L(beta) on 0 < beta < 1/2.

    Sign convention: F'(beta) > 0 exactly where L(beta) < q(beta).
    Within 1e-7 of 1/2 the 0/0 form is replaced by its symmetric limit
    (alpha/pi) 2 K^2 exp(-K^2).
    """
    K = params.K
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    if not 0.0 < beta < 0.5:
        if beta == 0.5:
            raise DomainError("l_curve is a 0/0 form at beta = 1/2 exactly")
        raise DomainError(f"beta must lie in (0, 1/2), got {beta}")
    if 0.5 - beta < 1e-7:
        return (params.alpha / math.pi) * 2.0 * K * K * math.exp(-K * K)
    num = math.exp(-K * K / (2.0 * (1.0 - beta))) - math.exp(-K * K / (2.0 * beta))
    den = math.sqrt(beta * (1.0 - beta)) * (math.log(1.0 - beta) - math.log(beta))
    return (params.alpha / math.pi) * num / den


def perturbation_equivalence(alpha: float, eps: float) -> tuple[float, float]:
    """Ratio bounds of (alpha_c(K_c(alpha) + e) - alpha)/e over e in a grid.

    The grid is log spaced on [1e-6, eps]. Both returned bounds are
    positive and finite when the perturbed K stays inside the k_c bracket.
    """
    if eps <= 1e-6:
        raise DomainError(f"eps must exceed 1e-6, got {eps}")
    K0 = k_c(alpha)
    if K0 + eps >= _KC_BRACKET_HI:
        raise DomainError(f"K_c(alpha)+eps = {K0 + eps} leaves the compact range")
    grid = np.geomspace(1e-6, eps, 25)
    ratios = [(alpha_c(K0 + e) - alpha) / e for e in grid]
    return min(ratios), max(ratios)


# ---------------------------------------------------------------------------
# free-energy profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeEnergyProfile:
    """F evaluated on a grid, with the curvature at 1/2 and optional verdict."""

    params: ModelParams
    beta_grid: tuple[float, ...]
    values: tuple[float, ...]
    second_deriv_half: float
    verdict: Optional["ShapeVerdict"] = None

    def to_dict(self) -> dict:
        d = {
            "params": {"K": self.params.K, "alpha": self.params.alpha,
                       "n": self.params.n, "m": self.params.m},
            "beta_grid": list(self.beta_grid),
            "values": list(self.values),
            "second_deriv_half": self.second_deriv_half,
        }
        d["verdict"] = self.verdict.to_dict() if self.verdict else None
        return d


def free_energy_profile(params: ModelParams,
                        beta_grid: Sequence[float],
                        with_verdict: bool = False,
                        grid_step: float = 1e-4) -> FreeEnergyProfile:
    grid = [float(b) for b in beta_grid]
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise DomainError("beta_grid must be strictly ascending")
    values = tuple(free_energy(params, b) for b in grid)
    verdict = verify_shape(params.K, grid_step) if with_verdict else None
    return FreeEnergyProfile(params=params, beta_grid=tuple(grid),
                             values=values,
                             second_deriv_half=free_energy_second_deriv_half(params),
                             verdict=verdict)


# ---------------------------------------------------------------------------
# shape verification
# ---------------------------------------------------------------------------

REGIME_LARGE = "K>4"
REGIME_MID = "0.1<=K<=4"
REGIME_SMALL = "K<0.1"

# requested slope budget for the gap region; cells whose empirical slope
# exceeds it are flagged and the margin switches to the observed slope
DERIVATIVE_BUDGET = 6.0


@dataclass(frozen=True)
class ShapeVerdict:
    """Outcome of the numeric free-energy shape check at alpha = alpha_c(K).

    b1/b2 bound the verified-decreasing prefix and verified-increasing
    suffix; eps_gap is the certified margin F(1/2) - F(beta) on [b1, b2]
    after subtracting derivative_budget * grid_step. failures lists
    (check, beta, lhs, rhs) for every grid cell that violated its bound;
    slope_flags lists betas where the empirical slope exceeded the
    requested budget (the budget actually used is recorded).
    """

    K: float
    regime: str
    b1: float
    b2: float
    eps_gap: float
    grid_step: float
    derivative_budget: float
    ok: bool
    failures: tuple = field(default_factory=tuple)
    slope_flags: tuple = field(default_factory=tuple)
    requested_budget: float = DERIVATIVE_BUDGET

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "regime": self.regime,
            "b1": self.b1,
            "b2": self.b2,
            "eps_gap": self.eps_gap,
            "grid_step": self.grid_step,
            "derivative_budget": self.derivative_budget,
            "requested_budget": self.requested_budget,
            "ok": self.ok,
            "failures": [list(f) for f in self.failures],
            "slope_flags": list(self.slope_flags),
        }


def _shape_regime(K: float) -> tuple[str, float, float]:
    """Regime label and its (b1, b2) endpoints."""
    if K > 4.0:
        return REGIME_LARGE, 0.005, 0.2
    if K >= 0.1:
        return REGIME_MID, 0.005, 0.3
    return REGIME_SMALL, K / 12.0, 0.04


def verify_shape(K: float, grid_step: float = 1e-4) -> ShapeVerdict:
    """Numeric verification of the free-energy shape at alpha = alpha_c(K).

    Three checks, all at grid resolution:
      prefix  (0, b1]:   L(beta) > q(beta), so F decreases (F' diverges
                         to -inf at 0, covering the region below the grid)
      middle  [b1, b2]:  F(beta) <= F(1/2) - eps_gap after subtracting a
                         derivative-budget margin for between-grid drift
      suffix  [b2, 1/2): L(beta) < q(beta), so F increases
    The prefix grid is refined to grid_step/100 near 0.
    """
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    if grid_step <= 0 or grid_step >= 0.05:
        raise DomainError(f"grid_step must lie in (0, 0.05), got {grid_step}")
    regime, b1, b2 = _shape_regime(K)
    params = ModelParams.critical(K, n=1)
    failures: list[tuple] = []

    # prefix: L > q on a fine grid reaching toward 0
    fine = grid_step / 100.0
    pre_grid = np.arange(fine, b1 + fine / 2, fine)
    pre_grid[-1] = min(pre_grid[-1], b1)
    for b in pre_grid:
        lv = l_curve(params, b)
        qv = pair_q(K, b)
        if not lv > qv:
            failures.append(("prefix L>q", float(b), lv, qv))

    # middle: gap to F(1/2) with a slope margin
    f_half = _LOG2 + 2.0 * params.alpha * log_gauss_p(K)  # closed form of F(1/2)
    mid_grid = np.arange(b1, b2 + grid_step / 2, grid_step)
    mid_grid[-1] = min(mid_grid[-1], b2)
    f_vals = np.array([free_energy(params, b) for b in mid_grid])
    gaps = f_half - f_vals
    slopes = np.abs(np.diff(f_vals)) / grid_step
    max_slope = float(slopes.max()) if len(slopes) else 0.0
    slope_flags = tuple(float(mid_grid[i])
                        for i in np.nonzero(slopes > DERIVATIVE_BUDGET)[0])
    budget = max(DERIVATIVE_BUDGET, max_slope)
    eps_gap = float(gaps.min() - budget * grid_step)
    if eps_gap <= 0:
        i = int(np.argmin(gaps))
        failures.append(("middle gap", float(mid_grid[i]),
                         float(f_vals[i]), f_half))

    # suffix: L < q up to (but excluding) 1/2
    suf_grid = np.arange(b2, 0.5, grid_step)
    if suf_grid[-1] >= 0.5:
        suf_grid = suf_grid[:-1]
    for b in suf_grid:
        lv = l_curve(params, b)
        qv = pair_q(K, b)
        if not lv < qv:
            failures.append(("suffix L<q", float(b), lv, qv))

    return ShapeVerdict(K=K, regime=regime, b1=b1, b2=b2, eps_gap=eps_gap,
                        grid_step=grid_step, derivative_budget=budget,
                        ok=not failures and eps_gap > 0,
                        failures=tuple(failures), slope_flags=slope_flags)
