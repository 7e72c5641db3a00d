"""Online stopping: re-estimate P(e) after every run and decide whether to stop.

Two regimes, split at ``burn_in_len`` observations:

* burn-in: a Gaussian maximum-likelihood fit (``gaussian-ml``) or a Dirichlet
  posterior predictive (``bayes-dirichlet``);
* asymptotic: the empirical distribution with its lower tail replaced by a GPD
  fitted to the ``tail_obs`` lowest observations.  If that fit is impossible
  (ties, too few distinct values, infinite tail mean) the burn-in estimator is
  used instead.

After each observation the target ``C*_n`` solves the optimality equation for
the current estimate, and the session stops when ``e_n <= C*_n`` or when the
estimate says a stopping value should have appeared by now with probability
``override_level``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dist import (
    MIN_TAIL_SAMPLES,
    DirichletPosterior,
    EnergyDistribution,
    GaussianParams,
    HeavyTailWarning,
    dirichlet_update,
    gpd_fit_tail,
    posterior_predictive,
    splice_tail,
)
from .errors import (
    ConfigError,
    DataError,
    InsufficientData,
    MaxIterations,
    SessionClosed,
)
from .stopping import CostModel, solve_for_effort

__all__ = [
    "POLICIES",
    "SessionConfig",
    "SessionState",
    "run_session",
    "write_session_log",
    "session_summary",
    "write_session_summary",
]

POLICIES = ("gaussian-ml", "bayes-dirichlet")
DEFAULT_MAX_ITERATIONS = 10**7

CONTINUE = "continue"
STOP = "stop"


@dataclass(frozen=True)
class SessionConfig:
    policy: str
    cost: CostModel
    burn_in_len: int = 500
    tail_obs: int = 100
    override_level: float = 0.99
    prior: DirichletPosterior | None = None
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.burn_in_len < 2:
            raise ConfigError("burn_in_len must be >= 2")
        if self.tail_obs < MIN_TAIL_SAMPLES:
            raise ConfigError(f"tail_obs must be >= {MIN_TAIL_SAMPLES}")
        if not 0.0 < self.override_level < 1.0:
            raise ConfigError("override_level must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.policy == "bayes-dirichlet" and (self.prior is None or self.prior.support.size == 0):
            # without prior mass the predictive after one draw is a point mass
            # that always says stop
            raise ConfigError("bayes-dirichlet needs a nonempty prior")


@dataclass
class SessionState:
    """Mutable record of one stopping session."""

    config: SessionConfig
    observations: list[float] = field(default_factory=list)
    current_target: float | None = None
    stopped: bool = False
    realized_cost: float | None = None
    stopped_by_override: bool = False
    log: list[tuple[int, float, float | None, str]] = field(default_factory=list)
    _estimate: object = field(default=None, repr=False)
    # distinct energies and their counts, kept sorted
    _support: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _counts: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    # the tail_obs + 1 smallest observations, sorted
    _lowest: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _mean: float = field(default=0.0, repr=False)
    _m2: float = field(default=0.0, repr=False)
    _best: float = field(default=math.inf, repr=False)
    _tail_cache: tuple = field(default=(None, None), repr=False)

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def best(self) -> float:
        return self._best

    def _record(self, e: float) -> None:
        self.observations.append(e)
        self._best = min(self._best, e)
        delta = e - self._mean
        self._mean += delta / self.n
        self._m2 += delta * (e - self._mean)
        j = int(np.searchsorted(self._support, e))
        if j < self._support.size and self._support[j] == e:
            self._counts[j] += 1
        else:
            self._support = np.insert(self._support, j, e)
            self._counts = np.insert(self._counts, j, 1.0)
        keep = self.config.tail_obs + 1
        if self._lowest.size < keep or e < self._lowest[-1]:
            low = np.insert(self._lowest, np.searchsorted(self._lowest, e), e)
            self._lowest = low[:keep]

    # ---------------------------------------------------------------- estimate

    def _burn_in_estimate(self):
        if self.config.policy == "gaussian-ml":
            if self.n < 2:
                raise InsufficientData("Gaussian fit needs at least two observations")
            var = self._m2 / self.n
            if not var > 1e-24 * max(1.0, self._mean * self._mean):
                # limit of the ML fit as the spread vanishes
                return EnergyDistribution.from_mapping({self._mean: 1.0})
            return GaussianParams(self._mean, math.sqrt(var))
        observed = dict(zip(self._support.tolist(), self._counts.tolist()))
        return posterior_predictive(dirichlet_update(self.config.prior, observed))

    def _asymptotic_estimate(self):
        xs = self._lowest
        mu = float(xs[self.config.tail_obs])
        n_tail = int(np.searchsorted(xs, mu, side="left"))
        if n_tail < MIN_TAIL_SAMPLES:
            return None
        key = (mu, xs[:n_tail].tobytes())
        if self._tail_cache[0] == key:
            g = self._tail_cache[1]
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HeavyTailWarning)
                try:
                    g = gpd_fit_tail(xs[:n_tail], mu)
                except DataError:
                    g = None
            if g is not None and g.shape >= 1.0:
                g = None  # infinite tail mean: no finite target
            self._tail_cache = (key, g)
        if g is None:
            return None
        emp = EnergyDistribution.normalized(self._support, self._counts)
        return splice_tail(emp, g)

    def current_estimate(self):
        """The distribution estimate given the observations so far."""
        if self.n <= self.config.burn_in_len:
            return self._burn_in_estimate()
        est = self._asymptotic_estimate()
        return est if est is not None else self._burn_in_estimate()

    # ---------------------------------------------------------------- decisions

    def override_check(self) -> bool:
        """True when ``(1 - P_n(e <= C*_n))^n <= 1 - override_level``."""
        if self.current_target is None or self._estimate is None:
            return False
        p_hat = float(self._estimate.cdf(self.current_target))
        if p_hat <= 0.0:
            return False
        return (1.0 - p_hat) ** self.n <= 1.0 - self.config.override_level

    def observe(self, e: float) -> str:
        """Record one energy; returns ``"stop"`` or ``"continue"``."""
        if self.stopped:
            raise SessionClosed("session already stopped")
        e = float(e)
        if not math.isfinite(e):
            raise DataError("observed energy must be finite")
        self._record(e)

        try:
            self._estimate = self.current_estimate()
        except InsufficientData:
            self._estimate = None
        if self._estimate is None:
            self.current_target = None
        else:
            target = solve_for_effort(self._estimate, self.config.cost.effort)
            self.current_target = target if math.isfinite(target) else None

        decision = CONTINUE
        if self.current_target is not None:
            if e <= self.current_target:
                decision = STOP
            elif self.override_check():
                decision = STOP
                self.stopped_by_override = True
        if decision == STOP:
            self.stopped = True
            self.realized_cost = self.best + self.n * self.config.cost.effort
        self.log.append((self.n, e, self.current_target, decision))
        return decision


def run_session(sampler: Callable[[], float], config: SessionConfig) -> SessionState:
    """Draw from ``sampler`` until the session stops."""
    state = SessionState(config)
    for _ in range(config.max_iterations):
        if state.observe(sampler()) == STOP:
            return state
    raise MaxIterations(f"session did not stop within {config.max_iterations} observations")


# --------------------------------------------------------------------------
# outputs


def write_session_log(path, state: SessionState) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "energy", "target", "decision"])
        for n, e, target, decision in state.log:
            writer.writerow([n, repr(e), "" if target is None else repr(target), decision])


def session_summary(state: SessionState) -> dict:
    est = state._estimate
    return {
        "policy": state.config.policy,
        "unit_cost": state.config.cost.unit_cost,
        "run_time": state.config.cost.run_time,
        "stopped": state.stopped,
        "stop_step": state.n if state.stopped else None,
        "realized_cost": state.realized_cost,
        "best_energy": state.best if state.observations else None,
        "final_target": state.current_target,
        "stopped_by_override": state.stopped_by_override,
        "final_estimate": type(est).__name__ if est is not None else None,
    }


def write_session_summary(path, state: SessionState) -> None:
    Path(path).write_text(json.dumps(session_summary(state), indent=2) + "\n")
