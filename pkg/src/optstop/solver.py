"""Ising / weighted MAX2SAT instances and a simulated-annealing sampler.

The energy of a spin configuration ``s in {-1, +1}^N`` is
``H(s) = sum_{(i, j)} J_ij s_i s_j`` over the instance's coupling list.

Simulated annealing runs single-spin Metropolis updates in sequential index
order; a sweep is ``N`` updates and the temperature is constant within a sweep
and linear in the sweep index from ``t_init`` to ``t_fin`` (both endpoints
included).  Each run owns a splitmix64 stream seeded from ``(master_seed,
run_index)``, so batches are bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from .dist import EnergyDistribution
from .errors import (
    DataError,
    DimensionMismatch,
    EmptyCandidates,
    InvalidSize,
    InvalidSpin,
    TooLarge,
)
from .stopping import solve_for_effort

__all__ = [
    "IsingInstance",
    "AnnealSchedule",
    "SampleRecord",
    "GroundState",
    "RunLengthChoice",
    "generate_complete_instance",
    "energy",
    "sa_run",
    "sample_batch",
    "sample_energies",
    "derive_seed",
    "brute_force_ground_state",
    "metropolis_visit_counts",
    "optimize_run_length",
    "load_instance",
    "save_instance",
    "write_sample_archive",
]

BRUTE_FORCE_MAX_VARS = 25
COUPLING_MAGNITUDES = np.arange(1, 11)


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Couplings ``(i, j, J_ij)`` with ``i < j`` over ``num_vars`` spins."""

    num_vars: int
    couplings: np.ndarray
    _indptr: np.ndarray = field(init=False, repr=False)
    _neighbors: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.num_vars)
        if n < 1:
            raise InvalidSize("an instance needs at least one variable")
        c = np.array(self.couplings, dtype=np.float64).reshape(-1, 3)
        i, j, w = c[:, 0], c[:, 1], c[:, 2]
        if np.any(i != np.round(i)) or np.any(j != np.round(j)):
            raise DataError("coupling indices must be integers")
        i, j = i.astype(np.int64), j.astype(np.int64)
        if np.any(i < 0) or np.any(j >= n) or np.any(i >= j):
            raise DataError("couplings need 0 <= i < j < num_vars")
        if np.any(w == 0) or not np.all(np.isfinite(w)):
            raise DataError("coupling strengths must be finite and nonzero")
        keys = i * n + j
        if np.unique(keys).size != keys.size:
            raise DataError("duplicate coupling pair")
        order = np.argsort(keys, kind="stable")
        c = c[order]
        c.setflags(write=False)
        # symmetric CSR adjacency for the Metropolis kernel
        rows = np.concatenate((i, j))
        cols = np.concatenate((j, i))
        vals = np.concatenate((w, w))
        perm = np.lexsort((cols, rows))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        object.__setattr__(self, "num_vars", n)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "_indptr", indptr)
        object.__setattr__(self, "_neighbors", cols[perm].astype(np.int64))
        object.__setattr__(self, "_weights", vals[perm].astype(np.float64))

    @property
    def num_couplings(self) -> int:
        return self.couplings.shape[0]

    def dense(self) -> np.ndarray:
        """Symmetric N x N coupling matrix."""
        m = np.zeros((self.num_vars, self.num_vars))
        i = self.couplings[:, 0].astype(np.int64)
        j = self.couplings[:, 1].astype(np.int64)
        m[i, j] = self.couplings[:, 2]
        m[j, i] = self.couplings[:, 2]
        return m

    def to_dict(self) -> dict:
        rows = []
        for i, j, w in self.couplings:
            rows.append([int(i), int(j), int(w) if w == int(w) else float(w)])
        return {"num_vars": self.num_vars, "couplings": rows}


@dataclass(frozen=True)
class AnnealSchedule:
    n_sweeps: int
    t_init: float = 10.0
    t_fin: float = 1.0 / 3.0

    def __post_init__(self):
        if not (self.t_init > self.t_fin > 0):
            raise DataError("schedule needs t_init > t_fin > 0")
        if self.n_sweeps < 0 or int(self.n_sweeps) != self.n_sweeps:
            raise DataError("n_sweeps must be a nonnegative integer")

    def temperatures(self) -> np.ndarray:
        """Per-sweep temperatures; a single sweep runs at ``t_fin``."""
        if self.n_sweeps == 1:
            return np.array([self.t_fin])
        return np.linspace(self.t_init, self.t_fin, int(self.n_sweeps))


@dataclass(frozen=True)
class SampleRecord:
    energy: float
    n_sweeps: int
    seed: int
    run_index: int
    spins: np.ndarray | None = field(default=None, compare=False, repr=False)


class GroundState(NamedTuple):
    energy: float
    first_excited: float
    configuration: np.ndarray


class RunLengthChoice(NamedTuple):
    unit_cost: float
    n_sweeps: int
    optimal_cost: float


# --------------------------------------------------------------------------
# random numbers: splitmix64, usable inside numba kernels

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30, _U27, _U31, _U11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_U63 = np.uint64(63)
_TWO_M53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@numba.njit(cache=True, nogil=True)
def _next(state):
    state[0] += _GOLDEN
    return _mix64(state[0])


@numba.njit(cache=True, nogil=True)
def _uniform(state):
    return (_next(state) >> _U11) * _TWO_M53


@numba.njit(cache=True, nogil=True)
def _derive(master, index):
    return _mix64(_mix64(master) + (index + np.uint64(1)) * _GOLDEN)


def derive_seed(master_seed: int, run_index: int) -> int:
    """Sub-seed of run ``run_index`` under ``master_seed`` (a 64-bit hash)."""
    return int(_derive(np.uint64(master_seed % 2**64), np.uint64(run_index)))


@numba.njit(cache=True, nogil=True)
def _derive_many(master, start, count):
    out = np.empty(count, dtype=np.uint64)
    for k in range(count):
        out[k] = _derive(master, np.uint64(start + k))
    return out


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, nogil=True)
def _init_state(indptr, nbr, wts, n, state, spins, fields):
    for i in range(n):
        spins[i] = 1.0 if (_next(state) >> _U63) else -1.0
    for i in range(n):
        h = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            h += wts[p] * spins[nbr[p]]
        fields[i] = h


@numba.njit(cache=True, nogil=True)
def _metropolis_update(indptr, nbr, wts, i, beta, state, spins, fields):
    de = -2.0 * spins[i] * fields[i]
    if de > 0.0:
        if _uniform(state) >= math.exp(-de * beta):
            return
    s_new = -spins[i]
    spins[i] = s_new
    for p in range(indptr[i], indptr[i + 1]):
        fields[nbr[p]] += 2.0 * wts[p] * s_new


@numba.njit(cache=True, nogil=True)
def _config_energy(n, spins, fields):
    e = 0.0
    for i in range(n):
        e += spins[i] * fields[i]
    return 0.5 * e


@numba.njit(cache=True, nogil=True)
def _anneal(indptr, nbr, wts, n, temps, seed, spins):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    fields = np.empty(n)
    _init_state(indptr, nbr, wts, n, state, spins, fields)
    for k in range(temps.size):
        beta = 1.0 / temps[k]
        for i in range(n):
            _metropolis_update(indptr, nbr, wts, i, beta, state, spins, fields)
    return _config_energy(n, spins, fields)


@numba.njit(cache=True, nogil=True)
def _anneal_batch(indptr, nbr, wts, n, temps, seeds, out):
    spins = np.empty(n)
    for r in range(seeds.size):
        out[r] = _anneal(indptr, nbr, wts, n, temps, seeds[r], spins)


@numba.njit(cache=True, nogil=True)
def _visit_counts(indptr, nbr, wts, n, temperature, n_updates, seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    spins = np.empty(n)
    fields = np.empty(n)
    _init_state(indptr, nbr, wts, n, state, spins, fields)
    counts = np.zeros(2**n, dtype=np.int64)
    beta = 1.0 / temperature
    for t in range(n_updates):
        _metropolis_update(indptr, nbr, wts, t % n, beta, state, spins, fields)
        code = 0
        for i in range(n):
            if spins[i] > 0:
                code |= 1 << i
        counts[code] += 1
    return counts


@numba.njit(cache=True)
def _gray_enumerate(jmat, n):
    """Exhaustive minimum over 2^(n-1) configurations (last spin fixed up)."""
    spins = np.ones(n)
    fields = np.empty(n)
    for i in range(n):
        fields[i] = jmat[i].sum()
    e = 0.5 * fields.sum()
    e0 = e
    e1 = np.inf
    best_code = 0
    tol = 1e-9 * (1.0 + abs(e))
    for k in range(1, 2 ** (n - 1)):
        b = 0
        while not (k >> b) & 1:
            b += 1
        de = -2.0 * spins[b] * fields[b]
        s_new = -spins[b]
        spins[b] = s_new
        for j in range(n):
            fields[j] += 2.0 * jmat[b, j] * s_new
        e += de
        if e < e0 - tol:
            e1 = e0
            e0 = e
            best_code = k ^ (k >> 1)
        elif e > e0 + tol and e < e1:
            e1 = e
    return e0, e1, best_code


# --------------------------------------------------------------------------
# public operations


def generate_complete_instance(num_vars: int, rng_seed) -> IsingInstance:
    """Complete graph with each J_ij uniform over +-{1, ..., 10}."""
    if num_vars < 2:
        raise InvalidSize("complete instances need at least two variables")
    rng = np.random.default_rng(rng_seed)
    i, j = np.triu_indices(num_vars, k=1)
    mags = rng.choice(COUPLING_MAGNITUDES, size=i.size)
    signs = rng.choice(np.array([-1, 1]), size=i.size)
    return IsingInstance(num_vars, np.column_stack((i, j, mags * signs)))


def _check_spins(inst: IsingInstance, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.size != inst.num_vars:
        raise DimensionMismatch(f"expected {inst.num_vars} spins, got {s.size}")
    if not np.all(np.abs(s) == 1):
        raise InvalidSpin("spins must be +1 or -1")
    return s


def energy(inst: IsingInstance, s) -> float:
    """H(s) = sum over couplings of J_ij s_i s_j."""
    s = _check_spins(inst, s)
    c = inst.couplings
    i, j = c[:, 0].astype(np.int64), c[:, 1].astype(np.int64)
    return float(np.dot(c[:, 2], s[i] * s[j]))


def sa_run(inst: IsingInstance, sched: AnnealSchedule, rng_seed: int,
           return_spins: bool = False) -> SampleRecord:
    """One annealing run from a random start; returns the final energy."""
    seed = int(rng_seed) % 2**64
    spins = np.empty(inst.num_vars)
    e = _anneal(inst._indptr, inst._neighbors, inst._weights, inst.num_vars,
                sched.temperatures(), np.uint64(seed), spins)
    return SampleRecord(float(e), int(sched.n_sweeps), seed, 0,
                        spins.astype(np.int8) if return_spins else None)


def sample_energies(inst: IsingInstance, sched: AnnealSchedule, n_runs: int,
                    master_seed: int, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Energies and seeds of ``n_runs`` independent runs, in run-index order."""
    if n_runs < 1 or workers < 1:
        raise DataError("n_runs and workers must be >= 1")
    seeds = _derive_many(np.uint64(int(master_seed) % 2**64), 0, int(n_runs))
    out = np.empty(n_runs)
    temps = sched.temperatures()
    args = (inst._indptr, inst._neighbors, inst._weights, inst.num_vars, temps)
    bounds = np.linspace(0, n_runs, min(workers, n_runs) + 1).astype(np.int64)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(chunks) == 1:
        _anneal_batch(*args, seeds, out)
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(_anneal_batch, *args, seeds[a:b], out[a:b]) for a, b in chunks]
            for f in futures:
                f.result()
    return out, seeds


def sample_batch(inst: IsingInstance, sched: AnnealSchedule, n_runs: int,
                 master_seed: int, workers: int = 1) -> list[SampleRecord]:
    """``n_runs`` annealing runs; run ``i`` is seeded with ``derive_seed(master_seed, i)``."""
    energies, seeds = sample_energies(inst, sched, n_runs, master_seed, workers)
    return [SampleRecord(float(e), int(sched.n_sweeps), int(s), i)
            for i, (e, s) in enumerate(zip(energies, seeds))]


def metropolis_visit_counts(inst: IsingInstance, temperature: float, n_updates: int,
                            rng_seed: int) -> np.ndarray:
    """Fixed-temperature sequential Metropolis; configuration counts after each update.

    Index bit ``i`` is set when spin ``i`` is +1.  Intended for tiny instances.
    """
    if inst.num_vars > 20:
        raise TooLarge("visit counting is limited to 20 spins")
    return _visit_counts(inst._indptr, inst._neighbors, inst._weights, inst.num_vars,
                         float(temperature), int(n_updates), np.uint64(int(rng_seed) % 2**64))


def brute_force_ground_state(inst: IsingInstance) -> GroundState:
    """Exact E_0 (with a minimizing configuration) and E_1, the next energy level."""
    n = inst.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_MAX_VARS} variables, got {n}")
    if n == 1:
        return GroundState(0.0, math.inf, np.ones(1, dtype=np.int8))
    e0, e1, code = _gray_enumerate(inst.dense(), n)
    config = np.ones(n, dtype=np.int8)
    for b in range(n - 1):
        if (code >> b) & 1:
            config[b] = -1
    return GroundState(float(e0), float(e1), config)


def optimize_run_length(curves: Mapping[int, EnergyDistribution], c_grid: Sequence[float],
                        t_per_sweep: float) -> list[RunLengthChoice]:
    """Lower envelope of C* over run lengths.

    Each candidate ``n_sweeps`` costs ``c * n_sweeps * t_per_sweep`` per call;
    for every ``c`` the candidate with the smallest C* wins, ties going to the
    shorter run.
    """
    if not curves:
        raise EmptyCandidates("no run-length candidates")
    if t_per_sweep <= 0:
        raise DataError("t_per_sweep must be positive")
    ordered = sorted(curves.items())
    if ordered[0][0] < 1:
        raise DataError("candidates need n_sweeps >= 1")
    out = []
    for c in c_grid:
        best = None
        for n_sw, d in ordered:
            cost = solve_for_effort(d, float(c) * n_sw * t_per_sweep)
            if best is None or cost < best[1]:
                best = (n_sw, cost)
        out.append(RunLengthChoice(float(c), int(best[0]), float(best[1])))
    return out


# --------------------------------------------------------------------------
# file formats


def load_instance(path) -> IsingInstance:
    try:
        payload = json.loads(Path(path).read_text())
        return IsingInstance(int(payload["num_vars"]), np.asarray(payload["couplings"], dtype=float))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: malformed instance file ({exc})") from None


def save_instance(path, inst: IsingInstance, **extra) -> None:
    payload = inst.to_dict()
    payload.update(extra)
    Path(path).write_text(json.dumps(payload) + "\n")


def write_sample_archive(path, records: Sequence[SampleRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run_index", "energy", "n_sweeps", "seed"])
        for r in records:
            writer.writerow([r.run_index, repr(r.energy), r.n_sweeps, r.seed])
