"""Energy distributions and the integral primitives used by the stopping solver.

The central type is :class:`EnergyDistribution`, an immutable discrete
probability table over energy values.  Parametric overlays (Gaussian fits,
generalized Pareto lower tails spliced onto an empirical body) expose the same
``cdf`` / ``partial_expectation`` / ``mean`` surface so the optimality equation
can be solved on any of them.

``partial_expectation(C)`` is the quantity

    I(C) = sum_{e_i <= C} p_i (C - e_i)  =  integral_{-inf}^{C} F(e) de

whose level set ``I(C) = c * t_run`` defines the optimal total cost.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import optimize, special

from .errors import (
    DataError,
    DegenerateTail,
    DomainError,
    EmptySample,
    InsufficientData,
    InsufficientTail,
    NegativeCount,
    NoTailMass,
    NonFinite,
    OutOfSupport,
    ZeroVariance,
)

__all__ = [
    "EnergyDistribution",
    "GpdParams",
    "GaussianParams",
    "DirichletPosterior",
    "SplicedDistribution",
    "HeavyTailWarning",
    "build_empirical",
    "cdf",
    "partial_expectation",
    "mean",
    "gpd_fit_tail",
    "gpd_cdf",
    "gpd_loglik",
    "gaussian_fit",
    "dirichlet_update",
    "posterior_predictive",
    "splice_tail",
    "bootstrap_resample",
    "minimum_distribution",
    "read_samples_csv",
    "write_samples_csv",
    "load_distribution",
    "save_distribution",
]

WEIGHT_TOL = 1e-12
MIN_TAIL_SAMPLES = 20
# Dirichlet concentration given to an energy the posterior has never seen.
NEW_ENERGY_CONCENTRATION = 1e-6
# Profile-likelihood search range for the GPD shape.  Below -1 the likelihood
# is unbounded, so the usable lower end is -1 (uniform-like finite tails).
GPD_SHAPE_BOUNDS = (-1.0, 5.0)
GPD_SHAPE_GRID = np.linspace(GPD_SHAPE_BOUNDS[0], GPD_SHAPE_BOUNDS[1], 121)
GPD_SHAPE_XTOL = 1e-8


class HeavyTailWarning(UserWarning):
    """Raised (as a warning) when a GPD fit returns shape k >= 1."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# discrete distribution


@dataclass(frozen=True, eq=False)
class EnergyDistribution:
    """Discrete probability table ``P(e) = sum_i p_i delta(e - e_i)``.

    ``support`` is strictly increasing and every weight is positive; weights
    sum to one within 1e-12.  Instances are immutable and cache the cumulative
    sums needed for O(log n) CDF and partial-expectation queries.
    """

    support: np.ndarray
    weights: np.ndarray
    _cum_w: np.ndarray = field(init=False, repr=False)
    _i_at_support: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        support = _frozen(self.support).reshape(-1)
        weights = _frozen(self.weights).reshape(-1)
        if support.size == 0:
            raise EmptySample("distribution needs at least one support point")
        if support.shape != weights.shape:
            raise DataError("support and weights must have equal length")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(weights))):
            raise NonFinite("support and weights must be finite")
        if support.size > 1 and not np.all(np.diff(support) > 0):
            raise DataError("support must be strictly increasing")
        if np.any(weights <= 0):
            raise DataError("weights must be strictly positive")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DataError(f"weights sum to {total!r}, not 1")
        cum_w = np.cumsum(weights)
        cum_w[-1] = 1.0
        # I(e_j) accumulated segment by segment: exact monotone and no
        # cancellation between C*F and sum(p*e) at large |e|.
        i_at = np.zeros_like(support)
        if support.size > 1:
            i_at[1:] = np.cumsum(cum_w[:-1] * np.diff(support))
        for name, value in (("support", support), ("weights", weights),
                            ("_cum_w", _frozen(cum_w)), ("_i_at_support", _frozen(i_at))):
            object.__setattr__(self, name, value)

    @classmethod
    def from_mapping(cls, table: Mapping[float, float]) -> "EnergyDistribution":
        """Build from ``{energy: probability}``; zero-probability entries are dropped."""
        items = sorted((float(e), float(p)) for e, p in table.items() if p != 0)
        if not items:
            raise EmptySample("empty probability table")
        e, p = zip(*items)
        return cls(np.array(e), np.array(p))

    @classmethod
    def normalized(cls, support, weights) -> "EnergyDistribution":
        """Build from nonnegative, unnormalized weights (zero entries dropped)."""
        support = np.asarray(support, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        keep = weights > 0
        if not np.any(keep):
            raise EmptySample("all weights are zero")
        w = weights[keep]
        return cls(support[keep], w / w.sum())

    def __len__(self) -> int:
        return self.support.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnergyDistribution):
            return NotImplemented
        return (np.array_equal(self.support, other.support)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    @property
    def min_energy(self) -> float:
        """E_0, the lowest support value."""
        return float(self.support[0])

    @property
    def max_energy(self) -> float:
        return float(self.support[-1])

    @property
    def second_energy(self) -> float:
        """E_1, the second-lowest support value (``inf`` for a point mass)."""
        return float(self.support[1]) if self.support.size > 1 else math.inf

    def cdf(self, x):
        """P(e <= x); right-continuous, the atom at ``x`` is included."""
        idx = np.searchsorted(self.support, x, side="right")
        out = np.where(idx > 0, self._cum_w[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, x):
        """P(e < x)."""
        idx = np.searchsorted(self.support, x, side="left")
        out = np.where(idx > 0, self._cum_w[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def partial_expectation(self, c):
        idx = np.searchsorted(self.support, c, side="right")
        j = np.maximum(idx - 1, 0)
        val = self._i_at_support[j] + self._cum_w[j] * (np.asarray(c, dtype=float) - self.support[j])
        out = np.where(idx > 0, val, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return float(np.dot(self.weights, self.support))

    def conditional_mean_below(self, x: float) -> float:
        """E[e | e <= x]."""
        idx = int(np.searchsorted(self.support, x, side="right"))
        if idx == 0:
            raise DataError("no mass at or below x")
        w = self.weights[:idx]
        return float(np.dot(w, self.support[:idx]) / w.sum())

    def draw(self, rng: np.random.Generator, size=None):
        """I.i.d. draws by inverse-CDF lookup."""
        u = rng.random(size)
        idx = np.searchsorted(self._cum_w, u, side="right")
        idx = np.minimum(idx, self.support.size - 1)
        return self.support[idx]

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EnergyDistribution":
        try:
            return cls(np.asarray(payload["support"], dtype=float),
                       np.asarray(payload["weights"], dtype=float))
        except KeyError as exc:
            raise DataError(f"distribution JSON lacks {exc}") from None


def build_empirical(samples) -> EnergyDistribution:
    """Empirical distribution with weight ``count(v) / len(samples)`` per value."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise EmptySample("no samples")
    if not np.all(np.isfinite(x)):
        raise NonFinite("samples contain NaN or infinite values")
    values, counts = np.unique(x, return_counts=True)
    return EnergyDistribution(values, counts / x.size)


def cdf(d, x):
    return d.cdf(x)


def partial_expectation(d, c):
    return d.partial_expectation(c)


def mean(d) -> float:
    if isinstance(d, GaussianParams):
        return d.mean
    return d.mean()


def minimum_distribution(d: EnergyDistribution, m: int) -> EnergyDistribution:
    """Distribution of the minimum of ``m`` i.i.d. draws: ``F_m = 1 - (1 - F)^m``."""
    if m < 1 or int(m) != m:
        raise DataError("number of draws must be a positive integer")
    m = int(m)
    if m == 1:
        return d
    w = d.weights
    # at_least_i = P(e >= e_i) as suffix sums, accurate even for tiny tails
    at_least = np.cumsum(w[::-1])[::-1]
    # P(min = e_i) = at_least_i^m * (1 - (1 - w_i / at_least_i)^m), without cancellation
    ratio = np.minimum(w / at_least, 1.0)
    with np.errstate(divide="ignore"):
        new_w = at_least**m * -np.expm1(m * np.log1p(-ratio))
    return EnergyDistribution.normalized(d.support, np.maximum(new_w, 0.0))


def bootstrap_resample(d: EnergyDistribution, n: int, rng_seed) -> EnergyDistribution:
    """Empirical distribution of ``n`` i.i.d. draws from ``d``.

    Counts are drawn as one multinomial vector, which has the same law as
    tallying ``n`` independent draws.
    """
    if n < 1:
        raise DataError("bootstrap size must be >= 1")
    rng = np.random.default_rng(rng_seed)
    counts = rng.multinomial(int(n), d.weights)
    keep = counts > 0
    return EnergyDistribution(d.support[keep], counts[keep] / float(n))


# --------------------------------------------------------------------------
# Gaussian overlay

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _std_partial_expectation(z: float) -> float:
    """psi(z) = z Phi(z) + phi(z), the standard-normal partial expectation."""
    return z * 0.5 * math.erfc(-z / _SQRT2) + _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _log_std_partial_expectation(z: float) -> float:
    """log psi(z), accurate far into the lower tail."""
    if z > -5.0:
        return math.log(_std_partial_expectation(z))
    if z > -30.0:
        # psi = exp(-z^2/2) * (z/2 erfcx(-z/sqrt2) + 1/sqrt(2 pi))
        bracket = 0.5 * z * float(special.erfcx(-z / _SQRT2)) + _INV_SQRT_2PI
        return -0.5 * z * z + math.log(bracket)
    # asymptotic: psi ~ phi(z)/z^2 * (1 - 3/z^2 + 15/z^4 - 105/z^6)
    z2 = z * z
    series = 1.0 - 3.0 / z2 + 15.0 / z2**2 - 105.0 / z2**3
    return -0.5 * z2 + math.log(_INV_SQRT_2PI) - math.log(z2) + math.log(series)


@dataclass(frozen=True)
class GaussianParams:
    """Normal overlay evaluated as a continuous distribution.

    Its partial expectation has the closed form
    ``I(C) = sigma * (z Phi(z) + phi(z))`` with ``z = (C - mean) / sigma``.
    """

    mean: float
    stddev: float

    def __post_init__(self):
        if not (self.stddev > 0 and math.isfinite(self.stddev) and math.isfinite(self.mean)):
            raise DataError("stddev must be positive and finite")

    def cdf(self, x):
        if np.ndim(x):
            return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.stddev)
        return 0.5 * math.erfc(-(x - self.mean) / (self.stddev * _SQRT2))

    def partial_expectation(self, c):
        if np.ndim(c):
            z = (np.asarray(c, dtype=float) - self.mean) / self.stddev
            return self.stddev * (z * special.ndtr(z) + np.exp(-0.5 * z * z) * _INV_SQRT_2PI)
        return self.stddev * _std_partial_expectation((c - self.mean) / self.stddev)


def gaussian_fit(samples) -> GaussianParams:
    """Maximum-likelihood normal fit (variance with divisor n)."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise InsufficientData("Gaussian fit needs at least two samples")
    if not np.all(np.isfinite(x)):
        raise NonFinite("samples contain NaN or infinite values")
    m = float(x.mean())
    sd = float(np.sqrt(np.mean((x - m) ** 2)))
    if sd == 0.0 or np.all(x == x[0]):
        raise ZeroVariance("all samples are equal")
    return GaussianParams(m, sd)


# --------------------------------------------------------------------------
# generalized Pareto lower tail


@dataclass(frozen=True)
class GpdParams:
    """GPD over exceedances ``x = threshold - e`` of the lower tail.

    ``scale`` is lambda > 0, ``shape`` is k.  For k < 0 the tail ends at
    ``threshold - scale / |k|``.
    """

    scale: float
    shape: float
    threshold: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DataError("GPD scale must be positive and finite")
        if not (math.isfinite(self.shape) and math.isfinite(self.threshold)):
            raise NonFinite("GPD parameters must be finite")

    @property
    def endpoint(self) -> float:
        """Largest admissible exceedance (``inf`` unless k < 0)."""
        return self.scale / -self.shape if self.shape < 0 else math.inf

    def survival(self, x):
        """1 - G(x), clamped to 0 beyond a finite endpoint."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        lam, k = self.scale, self.shape
        if abs(k) < 1e-14:
            out = np.exp(-x / lam)
        else:
            base = 1.0 + k * x / lam
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(base > 0, np.power(np.maximum(base, 1e-300), -1.0 / k), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def survival_integral(self, y):
        """Integral of 1 - G(u) for u in [y, inf); ``inf`` when k >= 1."""
        lam, k = self.scale, self.shape
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        if k >= 1:
            out = np.full_like(y, np.inf)
        elif abs(k) < 1e-14:
            out = lam * np.exp(-y / lam)
        else:
            base = np.maximum(1.0 + k * y / lam, 0.0)
            out = lam / (1.0 - k) * np.power(base, 1.0 - 1.0 / k)
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, q):
        """Exceedance x with G(x) = q."""
        q = np.asarray(q, dtype=float)
        lam, k = self.scale, self.shape
        if abs(k) < 1e-14:
            out = -lam * np.log1p(-q)
        else:
            out = lam / k * np.expm1(-k * np.log1p(-q))
        return float(out) if np.ndim(out) == 0 else out

    def mean_exceedance(self) -> float:
        return self.scale / (1.0 - self.shape) if self.shape < 1 else math.inf


def gpd_cdf(g: GpdParams, x: float) -> float:
    """G(x) = 1 - (1 + k x / lambda)^(-1/k), or 1 - exp(-x / lambda) for k = 0."""
    if x < 0:
        raise DomainError("exceedance must be nonnegative")
    if g.shape < 0 and x >= g.endpoint:
        raise OutOfSupport(f"exceedance {x} beyond finite endpoint {g.endpoint}")
    lam, k = g.scale, g.shape
    if k == 0.0:
        return -math.expm1(-x / lam)
    return -math.expm1(-math.log1p(k * x / lam) / k)


@numba.njit(cache=True)
def _gpd_scale_mle(k, x, xmax, xmean):
    """Profile MLE of the scale at fixed shape k > -1 (safeguarded Newton).

    Solves h(lam) = (1+k) sum x/(lam + k x) - n = 0; h is convex decreasing on
    lam > max(0, -k xmax), so the root is unique.
    """
    n = x.size
    lo = max(0.0, -k * xmax)
    hi = 2.0 * max(xmax, (1.0 + k) * xmean)
    lam = 0.5 * (lo + hi)
    for _ in range(300):
        h = 0.0
        dh = 0.0
        for i in range(n):
            d = lam + k * x[i]
            h += x[i] / d
            dh -= x[i] / (d * d)
        h = (1.0 + k) * h - n
        dh = (1.0 + k) * dh
        if h > 0:
            lo = lam
        else:
            hi = lam
        step = h / dh
        new = lam - step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - lam) <= 1e-15 * lam or hi - lo <= 1e-15 * hi:
            lam = new
            break
        lam = new
    return lam


@numba.njit(cache=True)
def _gpd_loglik(lam, k, x):
    n = x.size
    if lam <= 0:
        return -np.inf
    s = 0.0
    if abs(k) < 1e-14:
        for i in range(n):
            s += x[i]
        return -n * np.log(lam) - s / lam
    if k == -1.0:
        for i in range(n):
            if 1.0 - x[i] / lam < 0:
                return -np.inf
        return -n * np.log(lam)
    for i in range(n):
        u = 1.0 + k * x[i] / lam
        if u <= 0:
            return -np.inf
        s += np.log1p(k * x[i] / lam)
    return -n * np.log(lam) - (1.0 + 1.0 / k) * s


@numba.njit(cache=True)
def _gpd_profile(k, x, xmax, xmean):
    if k <= -1.0:
        # boundary: density 1/lam on (0, lam), maximised at lam = max exceedance
        return -x.size * np.log(xmax), xmax
    lam = _gpd_scale_mle(k, x, xmax, xmean)
    return _gpd_loglik(lam, k, x), lam


@numba.njit(cache=True)
def _gpd_profile_grid(ks, x, xmax, xmean):
    out = np.empty(ks.size)
    for i in range(ks.size):
        out[i] = _gpd_profile(ks[i], x, xmax, xmean)[0]
    return out


def _tail_exceedances(samples, threshold: float) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise NonFinite("samples contain NaN or infinite values")
    exc = threshold - x[x < threshold]
    if exc.size < MIN_TAIL_SAMPLES:
        raise InsufficientTail(
            f"{exc.size} samples below threshold, need at least {MIN_TAIL_SAMPLES}")
    if np.all(exc == exc[0]):
        raise DegenerateTail("all tail exceedances are equal")
    return exc


def gpd_loglik(g: GpdParams, samples) -> float:
    """Log-likelihood of the lower-tail exceedances of ``samples`` under ``g``."""
    exc = np.asarray(samples, dtype=np.float64)
    exc = g.threshold - exc[exc < g.threshold]
    return float(_gpd_loglik(g.scale, g.shape, exc))


def gpd_fit_tail(samples, threshold: float) -> GpdParams:
    """Maximum-likelihood GPD fit of the lower tail below ``threshold``.

    Exceedances are ``threshold - e`` for every sample strictly below the
    threshold.  The scale is profiled out analytically-by-root-finding and the
    shape maximised over ``GPD_SHAPE_BOUNDS``: first on ``GPD_SHAPE_GRID``,
    then by bounded Brent refinement (tolerance 1e-8) around the best grid
    point.  The returned fit is never worse than the best grid point.
    """
    exc = _tail_exceedances(samples, threshold)
    # fit in units of the mean exceedance; the shape is scale free
    unit = float(exc.mean())
    x = exc / unit
    xmax, xmean = float(x.max()), 1.0

    grid = GPD_SHAPE_GRID
    ll = _gpd_profile_grid(grid, x, xmax, xmean)
    best = int(np.nanargmax(ll))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    k_best, ll_best = float(grid[best]), float(ll[best])
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda k: -_gpd_profile(k, x, xmax, xmean)[0],
            bounds=(lo, hi), method="bounded",
            options={"xatol": GPD_SHAPE_XTOL})
        if np.isfinite(res.fun) and -res.fun >= ll_best:
            k_best, ll_best = float(res.x), float(-res.fun)
    lam = float(_gpd_profile(k_best, x, xmax, xmean)[1])
    if k_best >= 1.0:
        warnings.warn(f"GPD tail fit has shape k={k_best:.3g} >= 1 (heavy tail)",
                      HeavyTailWarning, stacklevel=2)
    return GpdParams(scale=lam * unit, shape=k_best, threshold=float(threshold))


# --------------------------------------------------------------------------
# empirical body + GPD lower tail


@dataclass(frozen=True, eq=False)
class SplicedDistribution:
    """Empirical body for ``e >= threshold`` with a GPD lower tail below it.

    ``body`` is the empirical distribution conditioned on ``e >= threshold``
    (normalized to one); it carries probability ``1 - tail_mass`` overall.
    Below the threshold ``F(e) = tail_mass * (1 - G(threshold - e))``.
    """

    body: EnergyDistribution
    tail: GpdParams
    tail_mass: float

    def __post_init__(self):
        if not 0.0 < self.tail_mass < 1.0:
            raise DataError("tail_mass must lie in (0, 1)")
        if self.body.min_energy < self.tail.threshold:
            raise DataError("body must lie at or above the tail threshold")

    @property
    def threshold(self) -> float:
        return self.tail.threshold

    @property
    def body_weights(self) -> np.ndarray:
        """Unconditional probabilities of the body atoms (sum to 1 - tail_mass)."""
        return self.body.weights * (1.0 - self.tail_mass)

    @property
    def lower_bound(self) -> float:
        return self.threshold - self.tail.endpoint

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        mu, t = self.threshold, self.tail_mass
        below = t * self.tail.survival(mu - x_arr)
        above = t + (1.0 - t) * self.body.cdf(x_arr)
        out = np.where(x_arr < mu, below, above)
        return float(out) if np.ndim(out) == 0 else out

    def tail_partial_expectation(self) -> float:
        """I(threshold) = tail_mass * lambda / (1 - k)."""
        return self.tail_mass * self.tail.survival_integral(0.0)

    def partial_expectation(self, c):
        c_arr = np.asarray(c, dtype=float)
        mu, t = self.threshold, self.tail_mass
        below = t * self.tail.survival_integral(mu - c_arr)
        above = (self.tail_partial_expectation() + t * (c_arr - mu)
                 + (1.0 - t) * self.body.partial_expectation(c_arr))
        out = np.where(c_arr < mu, below, above)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        tail_mean = self.threshold - self.tail.mean_exceedance()
        return self.tail_mass * tail_mean + (1.0 - self.tail_mass) * self.body.mean()

    def draw(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        t = self.tail_mass
        in_tail = u < t
        q = np.clip(1.0 - u / t, 0.0, 1.0 - 1e-16)
        tail_e = self.threshold - self.tail.quantile(np.where(in_tail, q, 0.0))
        body_e = self.body.draw(rng, size)
        return np.where(in_tail, tail_e, body_e)


def splice_tail(emp: EnergyDistribution, g: GpdParams) -> SplicedDistribution:
    """Replace the part of ``emp`` strictly below ``g.threshold`` by the GPD tail."""
    mu = g.threshold
    tail_mass = emp.cdf_left(mu)
    if tail_mass <= 0.0:
        raise NoTailMass("no empirical mass below the threshold")
    if tail_mass >= 1.0 or mu > emp.max_energy:
        raise NoTailMass("threshold must lie inside the support range")
    keep = emp.support >= mu
    body = EnergyDistribution.normalized(emp.support[keep], emp.weights[keep])
    return SplicedDistribution(body=body, tail=g, tail_mass=float(tail_mass))


# --------------------------------------------------------------------------
# Dirichlet-multinomial posterior


@dataclass(frozen=True, eq=False)
class DirichletPosterior:
    """Dirichlet concentrations over a discrete energy support.

    The support may be empty (no prior information); posterior predictive
    queries then need at least one update first.
    """

    support: np.ndarray
    concentrations: np.ndarray

    def __post_init__(self):
        support = _frozen(self.support).reshape(-1)
        conc = _frozen(self.concentrations).reshape(-1)
        if support.shape != conc.shape:
            raise DataError("support and concentrations must have equal length")
        if support.size > 1 and not np.all(np.diff(support) > 0):
            raise DataError("support must be strictly increasing")
        if np.any(~np.isfinite(conc)) or np.any(conc <= 0):
            raise DataError("concentrations must be positive and finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "concentrations", conc)

    @classmethod
    def empty(cls) -> "DirichletPosterior":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_distribution(cls, d: EnergyDistribution, strength: float) -> "DirichletPosterior":
        """Prior worth ``strength`` virtual observations distributed as ``d``."""
        if strength <= 0:
            raise DataError("prior strength must be positive")
        return cls(d.support, strength * d.weights)

    @property
    def total(self) -> float:
        return float(self.concentrations.sum())


def _as_counts(prior: DirichletPosterior, observed) -> tuple[np.ndarray, np.ndarray]:
    """Return (energies, counts) for an update, energies possibly new."""
    if isinstance(observed, Mapping):
        energies = np.array([float(e) for e in observed.keys()], dtype=float)
        counts = np.array(list(observed.values()), dtype=float)
    else:
        counts = np.asarray(observed, dtype=float).reshape(-1)
        if counts.shape != prior.support.shape:
            raise DataError("aligned counts must match the posterior support")
        energies = prior.support
    if np.any(counts < 0):
        raise NegativeCount("observation counts must be nonnegative")
    if np.any(counts != np.round(counts)):
        raise DataError("observation counts must be integers")
    if not np.all(np.isfinite(energies)):
        raise NonFinite("observed energies must be finite")
    return energies, counts


def dirichlet_update(prior: DirichletPosterior, observed,
                     new_concentration: float = NEW_ENERGY_CONCENTRATION) -> DirichletPosterior:
    """Conjugate update ``nu_i -> nu_i + n_i``.

    ``observed`` is either a mapping ``{energy: count}`` or a count vector
    aligned with ``prior.support``.  Energies outside the current support are
    first added with concentration ``new_concentration``.
    """
    energies, counts = _as_counts(prior, observed)
    support = np.union1d(prior.support, energies[counts > 0]) if energies.size else prior.support
    conc = np.full(support.size, float(new_concentration))
    conc[np.searchsorted(support, prior.support)] = prior.concentrations
    if energies.size:
        np.add.at(conc, np.searchsorted(support, energies[counts > 0]), counts[counts > 0])
    return DirichletPosterior(support, conc)


def posterior_predictive(p: DirichletPosterior) -> EnergyDistribution:
    """Multinomial with the posterior-mean probabilities ``nu_i / sum(nu)``."""
    if p.support.size == 0:
        raise InsufficientData("posterior has empty support")
    return EnergyDistribution(p.support, p.concentrations / p.concentrations.sum())


# --------------------------------------------------------------------------
# file formats


def read_samples_csv(path) -> np.ndarray:
    """Energies from a CSV whose header starts with ``run_index,energy``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["run_index", "energy"]:
            raise DataError(f"{path}: expected header 'run_index,energy'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
    rows.sort()
    energies = np.array([e for _, e in rows], dtype=np.float64)
    if energies.size == 0:
        raise EmptySample(f"{path}: no samples")
    if not np.all(np.isfinite(energies)):
        raise NonFinite(f"{path}: non-finite energy")
    return energies


def write_samples_csv(path, energies) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run_index", "energy"])
        for i, e in enumerate(np.asarray(energies, dtype=float)):
            writer.writerow([i, repr(float(e))])


def save_distribution(path, d: EnergyDistribution) -> None:
    Path(path).write_text(json.dumps(d.to_dict()) + "\n")


def load_distribution(path) -> EnergyDistribution:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return EnergyDistribution.from_dict(payload)
