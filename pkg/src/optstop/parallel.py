"""Parallel execution models and hardware-cost accounting.

With ``n`` cores the hardware costs ``c_t + c_cpu * n`` per unit of wall-clock
time.  Four ways of using the cores:

``none``
    one core, unit cost ``c_t + c_cpu``.
``embarrassing``
    ``n`` independent copies per round, keep the best: the energy distribution
    becomes the minimum of ``n`` draws and each round costs ``c_t + c_cpu * n``.
``perfect``
    one run finishes ``n`` times faster: unit cost ``c_t / n + c_cpu``.
``imperfect``
    one run finishes ``n_imp`` times faster: ``(c_t + c_cpu * n) / n_imp``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import NamedTuple

from .dist import EnergyDistribution, minimum_distribution
from .errors import ConfigError, EmptyRange, InvalidCost
from .stopping import solve_for_effort

__all__ = [
    "MODES",
    "ParallelPlan",
    "HardwareCost",
    "CoreChoice",
    "SplitChoice",
    "embarrassing_transform",
    "effective_unit_cost",
    "evaluate_plan",
    "optimal_cores",
    "mixed_split",
]

MODES = ("none", "embarrassing", "perfect", "imperfect")


@dataclass(frozen=True)
class ParallelPlan:
    n_cpu: int
    n_imp: float = 1.0

    def __post_init__(self):
        if int(self.n_cpu) != self.n_cpu or self.n_cpu < 1:
            raise ConfigError("n_cpu must be an integer >= 1")
        if not 1.0 <= self.n_imp <= self.n_cpu:
            raise ConfigError("n_imp must lie in [1, n_cpu]")


@dataclass(frozen=True)
class HardwareCost:
    c_t: float
    c_cpu: float

    def __post_init__(self):
        for v in (self.c_t, self.c_cpu):
            if not (math.isfinite(v) and v >= 0):
                raise InvalidCost("hardware cost rates must be finite and >= 0")
        if self.c_t == 0 and self.c_cpu == 0:
            raise InvalidCost("c_t and c_cpu cannot both be zero")

    def rate(self, n_cpu: int) -> float:
        """Cost per unit wall-clock time with ``n_cpu`` cores."""
        return self.c_t + self.c_cpu * n_cpu


class CoreChoice(NamedTuple):
    n_cpu: int
    optimal_cost: float


class SplitChoice(NamedTuple):
    width: int
    cores_per_copy: int
    speedup: float
    optimal_cost: float


def embarrassing_transform(d: EnergyDistribution, n_cpu: int) -> EnergyDistribution:
    """Distribution of the best of ``n_cpu`` independent draws."""
    return minimum_distribution(d, n_cpu)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown parallelization mode {mode!r}; choose from {MODES}")


def effective_unit_cost(hc: HardwareCost, plan: ParallelPlan, mode: str = "perfect") -> float:
    """Unit cost ``c`` that goes into the optimality equation for ``mode``."""
    _check_mode(mode)
    n = plan.n_cpu
    if mode == "none":
        return hc.rate(1)
    if mode == "embarrassing":
        return hc.rate(n)
    if mode == "perfect":
        return hc.c_t / n + hc.c_cpu
    return hc.rate(n) / plan.n_imp


def evaluate_plan(d: EnergyDistribution, hc: HardwareCost, plan: ParallelPlan,
                  t_run: float, mode: str) -> float:
    """C* under a parallelization mode."""
    c = effective_unit_cost(hc, plan, mode)
    if mode == "embarrassing":
        d = embarrassing_transform(d, plan.n_cpu)
    return solve_for_effort(d, c * t_run)


def optimal_cores(d: EnergyDistribution, hc: HardwareCost, t_run: float,
                  n_range: Iterable[int], mode: str = "embarrassing") -> CoreChoice:
    """Exhaustive scan for the core count with the lowest C*; ties go to fewer cores."""
    _check_mode(mode)
    candidates = sorted(set(int(n) for n in n_range))
    if not candidates:
        raise EmptyRange("no core counts to scan")
    best = None
    for n in candidates:
        cost = evaluate_plan(d, hc, ParallelPlan(n), t_run, mode)
        if best is None or cost < best.optimal_cost:
            best = CoreChoice(n, cost)
    return best


def mixed_split(d: EnergyDistribution, hc: HardwareCost, t_run: float, n_cpu: int,
                speedup: Callable[[int], float]) -> list[SplitChoice]:
    """Grid over splits of ``n_cpu`` cores into ``width`` embarrassing copies.

    Each copy gets ``n_cpu // width`` cores and runs ``speedup(cores)`` times
    faster.  Returns every split, cheapest first (ties toward smaller width).
    """
    if n_cpu < 1:
        raise EmptyRange("n_cpu must be >= 1")
    out = []
    for width in range(1, n_cpu + 1):
        cores = n_cpu // width
        s = float(speedup(cores))
        if not 1.0 <= s <= cores:
            raise ConfigError(f"speedup({cores}) = {s} outside [1, {cores}]")
        c = hc.rate(width * cores) / s
        cost = solve_for_effort(embarrassing_transform(d, width), c * t_run)
        out.append(SplitChoice(width, cores, s, cost))
    out.sort(key=lambda r: (r.optimal_cost, r.width))
    return out
