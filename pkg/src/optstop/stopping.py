"""Optimal stopping with a linear cost per solver call.

After ``n`` calls the accumulated cost is ``min(e_1..e_n) + n * c * t_run``.
The optimal rule stops at the first ``e_n <= C*`` where ``C*`` solves

    I(C*) = sum_{e_i <= C*} p_i (C* - e_i) = c * t_run.

For a discrete distribution ``I`` is piecewise linear with knots at the
support, so ``C*`` is found exactly: locate the segment whose knot values
bracket ``c * t_run`` and solve the linear piece in closed form.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .dist import (
    EnergyDistribution,
    GaussianParams,
    SplicedDistribution,
    _log_std_partial_expectation,
    minimum_distribution,
)
from .errors import DomainError, InvalidCost, SolverFailure, UnreachableTarget

__all__ = [
    "CostModel",
    "StoppingSolution",
    "solve_optimal_cost",
    "solve_for_effort",
    "mean_stopping_step",
    "split_cost",
    "cost_sensitivity",
    "tail_error_estimate",
    "time_to_target",
    "target_in_time",
    "simulate_stopped_sequence",
    "simulate_stopped_costs",
    "regime",
]


@dataclass(frozen=True)
class CostModel:
    """Linear cost: each solver call of duration ``run_time`` costs ``unit_cost * run_time``."""

    unit_cost: float
    run_time: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.unit_cost) and self.unit_cost >= 0):
            raise InvalidCost(f"unit cost must be finite and >= 0, got {self.unit_cost!r}")
        if not (math.isfinite(self.run_time) and self.run_time > 0):
            raise InvalidCost(f"run time must be finite and > 0, got {self.run_time!r}")

    @property
    def effort(self) -> float:
        """Cost of one solver call, c * t_run."""
        return self.unit_cost * self.run_time


@dataclass(frozen=True)
class StoppingSolution:
    optimal_cost: float
    mean_stop_step: float
    optimal_energy: float
    optimal_effort: float


# --------------------------------------------------------------------------
# optimality equation


def _solve_piecewise(knots, i_knots, slopes, target: float) -> float:
    """Root of a nondecreasing piecewise-linear function given at its knots.

    ``slopes[j]`` is the right slope at ``knots[j]``; the last slope must be
    positive so the function is unbounded above.
    """
    j = int(np.searchsorted(i_knots, target, side="right")) - 1
    j = max(j, 0)
    return float(knots[j] + (target - i_knots[j]) / slopes[j])


def _solve_discrete(d: EnergyDistribution, target: float) -> float:
    return _solve_piecewise(d.support, d._i_at_support, d._cum_w, target)


def _solve_spliced(d: SplicedDistribution, target: float) -> float:
    mu, t = d.threshold, d.tail_mass
    i_mu = d.tail_partial_expectation()
    if not math.isfinite(i_mu):
        # k >= 1: the tail has infinite mean, I(C) is infinite everywhere
        return -math.inf
    if target < i_mu:
        # t * S(y) = target with S the GPD survival integral, y = mu - C
        lam, k = d.tail.scale, d.tail.shape
        r = target * (1.0 - k) / (t * lam)
        if r <= 0.0:
            return mu - d.tail.endpoint
        if abs(k) < 1e-14:
            y = -lam * math.log(r)
        else:
            y = lam / k * math.expm1(k / (k - 1.0) * math.log(r))
        return mu - y
    knots = np.concatenate(([mu], d.body.support[d.body.support > mu]))
    return _solve_piecewise(knots, d.partial_expectation(knots), d.cdf(knots), target)


def _solve_gaussian(g: GaussianParams, target: float) -> float:
    r = target / g.stddev
    if r <= 0.0:
        return -math.inf
    log_r = math.log(r)
    hi = max(r, 0.0) + 1.0
    lo = -1.0
    while _log_std_partial_expectation(lo) > log_r:
        lo *= 2.0
        if lo < -1e4:
            raise SolverFailure(f"no bracket for Gaussian optimality equation (target {target!r})")
    try:
        z = optimize.brentq(lambda z: _log_std_partial_expectation(z) - log_r, lo, hi,
                            xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise SolverFailure(f"Gaussian optimality equation did not converge: {exc}") from None
    return g.mean + g.stddev * z


def _solve_generic(d, target: float) -> float:
    """Bracketed root search for any distribution exposing partial_expectation."""
    f = lambda c: d.partial_expectation(c) - target
    lo, hi = -1.0, 1.0
    for _ in range(2000):
        if f(lo) < 0:
            break
        lo = 2 * lo
    for _ in range(2000):
        if f(hi) > 0:
            break
        hi = 2 * hi
    try:
        return float(optimize.brentq(f, lo, hi, xtol=1e-12, maxiter=500))
    except (RuntimeError, ValueError) as exc:
        raise SolverFailure(str(exc)) from None


def solve_for_effort(d, effort: float) -> float:
    """C* for a given per-call cost ``c * t_run``."""
    if not (math.isfinite(effort) and effort >= 0):
        raise InvalidCost(f"per-call cost must be finite and >= 0, got {effort!r}")
    if isinstance(d, EnergyDistribution):
        return _solve_discrete(d, effort)
    if isinstance(d, SplicedDistribution):
        return _solve_spliced(d, effort)
    if isinstance(d, GaussianParams):
        return _solve_gaussian(d, effort)
    return _solve_generic(d, effort)


def solve_optimal_cost(d, cm: CostModel) -> float:
    """Optimal total cost C*: the root of ``I(C) = c * t_run``.

    With ``c = 0`` a discrete distribution returns its minimum energy (the
    limit of the equation, which itself degenerates there).
    """
    return solve_for_effort(d, cm.effort)


# --------------------------------------------------------------------------
# derived quantities


def mean_stopping_step(d, c_star: float) -> float:
    """Expected number of calls until ``e <= C*``: ``1 / P(e <= C*)``."""
    p = d.cdf(c_star)
    if p <= 0:
        raise UnreachableTarget(f"P(e <= {c_star!r}) is zero")
    return 1.0 / p


def split_cost(d, cm: CostModel) -> StoppingSolution:
    """C* together with its split into expected energy E* and effort T*."""
    c_star = solve_optimal_cost(d, cm)
    n_star = mean_stopping_step(d, c_star)
    if isinstance(d, EnergyDistribution):
        e_star = d.conditional_mean_below(c_star)
    else:
        # E[e | e <= C] = C - I(C) / F(C)
        e_star = c_star - d.partial_expectation(c_star) * n_star
    return StoppingSolution(
        optimal_cost=c_star,
        mean_stop_step=n_star,
        optimal_energy=e_star,
        optimal_effort=n_star * cm.effort,
    )


def cost_sensitivity(d, c_star: float, cm: CostModel) -> float:
    """dC*/dc = t_run / P(e <= C*) (right derivative at support kinks)."""
    p = d.cdf(c_star)
    if p <= 0:
        raise UnreachableTarget(f"P(e <= {c_star!r}) is zero")
    return cm.run_time / p


def tail_error_estimate(d, perturbation: Mapping[float, float], c_star: float) -> float:
    """First-order shift of C* from a signed mass change ``{energy: dp}`` in the tail."""
    p = d.cdf(c_star)
    if p <= 0:
        raise UnreachableTarget(f"P(e <= {c_star!r}) is zero")
    return math.fsum(float(e) * float(dp) for e, dp in perturbation.items()) / p


def time_to_target(p: float, p_d: float, t_run: float) -> float:
    """Time for at least one hit with probability ``p_d`` when one run hits with ``p``."""
    if not (0.0 < p < 1.0 and 0.0 < p_d < 1.0):
        raise DomainError("p and p_d must lie strictly between 0 and 1")
    return t_run * math.log1p(-p_d) / math.log1p(-p)


def target_in_time(d: EnergyDistribution, horizon: float, t_run: float) -> float:
    """Expected best energy within a fixed time budget (step-function cost).

    The budget allows ``floor(horizon / t_run)`` calls and stopping earlier
    has no benefit, so the answer is the mean of the minimum of that many draws.
    """
    m = int(math.floor(horizon / t_run))
    if m < 1:
        raise DomainError("time budget shorter than a single run")
    return minimum_distribution(d, m).mean()


def regime(d: EnergyDistribution, c_star: float) -> str:
    """Which of the three cost regimes ``C*`` falls in."""
    if c_star < d.second_energy:
        return "optimal-solution"
    if c_star >= d.max_energy:
        return "single-sample"
    return "intermediate"


# --------------------------------------------------------------------------
# Monte-Carlo oracle


def simulate_stopped_sequence(d, cm: CostModel, c_star: float, rng_seed) -> float:
    """Realized cost of one sequence stopped at the first ``e_n <= C*``."""
    if d.cdf(c_star) <= 0:
        raise UnreachableTarget(f"P(e <= {c_star!r}) is zero")
    rng = np.random.default_rng(rng_seed)
    best = math.inf
    n = 0
    while True:
        e = float(d.draw(rng))
        n += 1
        best = min(best, e)
        if e <= c_star:
            return best + n * cm.effort


def simulate_stopped_costs(d, cm: CostModel, c_star: float, n_sequences: int,
                           rng_seed) -> np.ndarray:
    """Realized costs of ``n_sequences`` independent stopped sequences.

    Every still-running sequence draws one energy per round until it stops;
    this is the same process as :func:`simulate_stopped_sequence`, batched.
    """
    if d.cdf(c_star) <= 0:
        raise UnreachableTarget(f"P(e <= {c_star!r}) is zero")
    rng = np.random.default_rng(rng_seed)
    best = np.full(n_sequences, np.inf)
    steps = np.zeros(n_sequences, dtype=np.int64)
    active = np.arange(n_sequences)
    while active.size:
        e = d.draw(rng, active.size)
        steps[active] += 1
        best[active] = np.minimum(best[active], e)
        active = active[e > c_star]
    return best + steps * cm.effort
