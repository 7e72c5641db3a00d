"""Benchmark campaigns, bootstrap error bars, scaling fits and give-up sizes."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dist import (
    EnergyDistribution,
    build_empirical,
    gpd_fit_tail,
    splice_tail,
)
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    InsufficientPoints,
    NonPositiveValue,
)
from .solver import (
    BRUTE_FORCE_MAX_VARS,
    AnnealSchedule,
    IsingInstance,
    SampleRecord,
    brute_force_ground_state,
    derive_seed,
    generate_complete_instance,
    load_instance,
    optimize_run_length,
    sample_energies,
    save_instance,
    write_sample_archive,
)
from .stopping import CostModel, regime, solve_for_effort, split_cost

__all__ = [
    "BenchmarkConfig",
    "BenchmarkReport",
    "ScalingFit",
    "BootstrapPoint",
    "SCALING_MODELS",
    "log_grid",
    "run_benchmark",
    "bootstrap_error_bars",
    "fit_scaling",
    "giveup_size",
    "read_scaling_points",
]

SCALING_MODELS = ("exp-sqrt", "quadratic", "exp-linear", "quadratic-2d")
DEFAULT_POINTS_PER_DECADE = 25


def log_grid(c_min: float, c_max: float, per_decade: int = DEFAULT_POINTS_PER_DECADE) -> np.ndarray:
    """Log-spaced grid from ``c_min`` to ``c_max`` (inclusive) with a fixed density per decade."""
    if not (0 < c_min < c_max) or not (math.isfinite(c_min) and math.isfinite(c_max)):
        raise ConfigError("c-grid bounds must be positive and increasing")
    if per_decade < 1:
        raise ConfigError("c-grid needs at least one point per decade")
    count = max(2, int(round(per_decade * math.log10(c_max / c_min))) + 1)
    return np.logspace(math.log10(c_min), math.log10(c_max), count)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BenchmarkConfig:
    """A benchmark campaign.

    Instances come from JSON files (``instances``) or from the complete-graph
    generator (``generate``: a mapping with ``sizes``, optional ``per_size``
    and ``seed``).  Each run of ``n_sweeps`` sweeps on ``N`` spins takes
    ``n_sweeps * N * time_per_update`` time units.
    """

    schedules: tuple[int, ...]
    runs: int
    c_grid: tuple[float, ...]
    output_dir: Path
    instances: tuple[Path, ...] = ()
    generate: Mapping | None = None
    seed: int = 0
    workers: int = 1
    time_per_update: float = 1.0
    t_init: float = 10.0
    t_fin: float = 1.0 / 3.0
    write_samples: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.schedules or any(int(s) != s or s < 1 for s in self.schedules):
            raise ConfigError("schedules must be a nonempty list of sweep counts >= 1")
        if len(set(self.schedules)) != len(self.schedules):
            raise ConfigError("duplicate schedule")
        c = np.asarray(self.c_grid, dtype=float)
        if c.size == 0 or np.any(~np.isfinite(c)) or np.any(c <= 0) or np.any(np.diff(c) <= 0):
            raise ConfigError("c-grid must be positive and strictly increasing")
        if bool(self.instances) == bool(self.generate):
            raise ConfigError("give exactly one of 'instances' or 'generate'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.time_per_update > 0:
            raise ConfigError("time_per_update must be positive")
        if not self.t_init > self.t_fin > 0:
            raise ConfigError("need t_init > t_fin > 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, payload: Mapping, base_dir: Path = Path(".")) -> "BenchmarkConfig":
        known = {"instances", "generate", "schedules", "runs", "c_grid", "seed", "workers",
                 "output_dir", "time_per_update", "t_init", "t_fin", "write_samples"}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            grid = payload["c_grid"]
            if isinstance(grid, Mapping):
                c_grid = log_grid(float(grid["min"]), float(grid["max"]),
                                  int(grid.get("per_decade", DEFAULT_POINTS_PER_DECADE)))
            else:
                c_grid = np.asarray(grid, dtype=float)
            out = Path(payload.get("output_dir", "bench-out"))
            return cls(
                schedules=tuple(int(s) for s in payload["schedules"]),
                runs=int(payload["runs"]),
                c_grid=tuple(float(c) for c in c_grid),
                output_dir=out if out.is_absolute() else base_dir / out,
                instances=tuple(p if Path(p).is_absolute() else base_dir / p
                                for p in map(Path, payload.get("instances", ()))),
                generate=payload.get("generate"),
                seed=int(payload.get("seed", 0)),
                workers=int(payload.get("workers", 1)),
                time_per_update=float(payload.get("time_per_update", 1.0)),
                t_init=float(payload.get("t_init", 10.0)),
                t_fin=float(payload.get("t_fin", 1.0 / 3.0)),
                write_samples=bool(payload.get("write_samples", True)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid benchmark config: {exc!r}") from None

    @classmethod
    def from_json(cls, path) -> "BenchmarkConfig":
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(payload, Mapping):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(payload, base_dir=path.parent)


# --------------------------------------------------------------------------
# campaign


class InstanceResult(NamedTuple):
    name: str
    instance: IsingInstance
    ground_energy: float
    first_excited: float
    ground_source: str
    distributions: dict[int, EnergyDistribution]


@dataclass
class BenchmarkReport:
    output_dir: Path
    files: list[Path] = field(default_factory=list)
    results: list[InstanceResult] = field(default_factory=list)
    cost_rows: list[dict] = field(default_factory=list)
    envelope_rows: list[dict] = field(default_factory=list)


def _load_instances(config: BenchmarkConfig) -> list[tuple[str, IsingInstance, dict]]:
    if config.instances:
        out = []
        for path in config.instances:
            inst = load_instance(path)
            extra = json.loads(Path(path).read_text())
            known = {k: extra[k] for k in ("ground_energy", "first_excited") if k in extra}
            out.append((Path(path).stem, inst, known))
        return out
    gen = config.generate
    try:
        sizes = [int(s) for s in gen["sizes"]]
        per_size = int(gen.get("per_size", 1))
        gen_seed = int(gen.get("seed", config.seed))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'generate' section: {exc!r}") from None
    out = []
    for size in sizes:
        for k in range(per_size):
            seed = derive_seed(derive_seed(gen_seed, size), k)
            out.append((f"complete_N{size}_{k}", generate_complete_instance(size, seed), {}))
    return out


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Mapping]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[h]) for h in header])


COST_COLUMNS = ["instance", "num_vars", "n_sweeps", "t_run", "c", "C_star", "E_star", "T_star",
                "n_star", "C_minus_E0", "regime"]
ENVELOPE_COLUMNS = ["instance", "num_vars", "c", "n_sweeps", "C_star", "C_minus_E0"]


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Sample every (instance, schedule) cell and tabulate C* over the c-grid.

    Writes ``costs.csv``, ``envelope.csv``, ``summary.json`` and, optionally,
    one sample archive per cell under ``samples/`` plus generated instances
    under ``instances/``.  Outputs depend only on the config and seed.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = BenchmarkReport(out)
    summary_instances = []
    c_grid = np.asarray(config.c_grid)

    for idx, (name, inst, known) in enumerate(_load_instances(config)):
        if config.generate:
            (out / "instances").mkdir(exist_ok=True)
            path = out / "instances" / f"{name}.json"
            save_instance(path, inst)
            report.files.append(path)
        inst_seed = derive_seed(config.seed, idx)
        t_per_sweep = inst.num_vars * config.time_per_update
        dists: dict[int, EnergyDistribution] = {}
        observed = []
        for s_idx, n_sw in enumerate(config.schedules):
            sched = AnnealSchedule(n_sw, config.t_init, config.t_fin)
            master = derive_seed(inst_seed, s_idx)
            energies, seeds = sample_energies(inst, sched, config.runs, master, config.workers)
            dists[n_sw] = build_empirical(energies)
            observed.append(energies)
            if config.write_samples:
                (out / "samples").mkdir(exist_ok=True)
                path = out / "samples" / f"{name}_sweeps{n_sw}.csv"
                write_sample_archive(path, [SampleRecord(float(e), n_sw, int(s), i)
                                            for i, (e, s) in enumerate(zip(energies, seeds))])
                report.files.append(path)

        # ground and first excited energies: known > brute force > best seen
        levels = np.unique(np.concatenate(observed))
        if "ground_energy" in known:
            e0, source = float(known["ground_energy"]), "instance-file"
            e1 = float(known.get("first_excited", math.nan))
        elif inst.num_vars <= BRUTE_FORCE_MAX_VARS:
            gs = brute_force_ground_state(inst)
            e0, e1, source = gs.energy, gs.first_excited, "brute-force"
        else:
            e0, source = float(levels[0]), "best-known"
            e1 = float(levels[1]) if levels.size > 1 else math.nan
        e0 = min(e0, float(levels[0]))
        report.results.append(InstanceResult(name, inst, e0, e1, source, dists))

        for n_sw in config.schedules:
            d = dists[n_sw]
            t_run = n_sw * t_per_sweep
            for c in c_grid:
                sol = split_cost(d, CostModel(float(c), t_run))
                report.cost_rows.append({
                    "instance": name, "num_vars": inst.num_vars, "n_sweeps": n_sw,
                    "t_run": t_run, "c": float(c), "C_star": sol.optimal_cost,
                    "E_star": sol.optimal_energy, "T_star": sol.optimal_effort,
                    "n_star": sol.mean_stop_step, "C_minus_E0": sol.optimal_cost - e0,
                    "regime": regime(d, sol.optimal_cost),
                })
        for choice in optimize_run_length(dists, c_grid, t_per_sweep):
            report.envelope_rows.append({
                "instance": name, "num_vars": inst.num_vars, "c": choice.unit_cost,
                "n_sweeps": choice.n_sweeps, "C_star": choice.optimal_cost,
                "C_minus_E0": choice.optimal_cost - e0,
            })
        summary_instances.append({
            "name": name, "num_vars": inst.num_vars, "num_couplings": inst.num_couplings,
            "ground_energy": e0, "first_excited": None if math.isnan(e1) else e1,
            "ground_source": source,
        })

    costs = out / "costs.csv"
    envelope = out / "envelope.csv"
    _write_csv(costs, COST_COLUMNS, report.cost_rows)
    _write_csv(envelope, ENVELOPE_COLUMNS, report.envelope_rows)
    summary = out / "summary.json"
    summary.write_text(json.dumps({
        "seed": config.seed,
        "runs": config.runs,
        "schedules": list(config.schedules),
        "c_grid": [float(c) for c in c_grid],
        "time_per_update": config.time_per_update,
        "t_init": config.t_init,
        "t_fin": config.t_fin,
        "instances": summary_instances,
    }, indent=2) + "\n")
    report.files += [costs, envelope, summary]
    return report


# --------------------------------------------------------------------------
# bootstrap


class BootstrapPoint(NamedTuple):
    unit_cost: float
    mean: float
    std: float
    in_tail: bool


def _tail_threshold(sorted_samples: np.ndarray, fraction: float) -> float:
    idx = min(int(math.ceil(fraction * sorted_samples.size)), sorted_samples.size - 1)
    return float(sorted_samples[idx])


def _with_gpd_tail(samples: np.ndarray, fraction: float):
    """Empirical distribution of ``samples`` with its lowest ``fraction`` replaced by a GPD."""
    xs = np.sort(samples)
    mu = _tail_threshold(xs, fraction)
    emp = build_empirical(xs)
    if not xs[0] < mu:
        return emp  # the lowest atom alone covers the tail fraction
    return splice_tail(emp, gpd_fit_tail(xs, mu))


def bootstrap_error_bars(samples, replicates: int, tail_percentile: float,
                         c_grid: Sequence[float], run_time: float = 1.0,
                         rng_seed: int = 0) -> list[BootstrapPoint]:
    """Bootstrap mean and spread of C* with a GPD lower tail in every replicate.

    ``tail_percentile`` is in percent: 0.1 models the lowest 0.1% with the
    GPD.  ``in_tail`` marks grid points whose mean C* lies below the tail
    threshold of the original sample.
    """
    if replicates < 2:
        raise ConfigError("need at least two bootstrap replicates")
    if not 0 < tail_percentile < 100:
        raise ConfigError("tail_percentile must lie in (0, 100)")
    x = np.asarray(samples, dtype=float).reshape(-1)
    fraction = tail_percentile / 100.0
    mu = _tail_threshold(np.sort(x), fraction)
    _with_gpd_tail(x, fraction)  # fail early when the full sample cannot be fitted
    efforts = [float(c) * run_time for c in c_grid]
    table = np.empty((replicates, len(efforts)))
    rng = np.random.default_rng(rng_seed)
    for b in range(replicates):
        d = _with_gpd_tail(x[rng.integers(0, x.size, x.size)], fraction)
        table[b] = [solve_for_effort(d, eff) for eff in efforts]
    means = table.mean(axis=0)
    stds = table.std(axis=0, ddof=1)
    return [BootstrapPoint(float(c), float(m), float(s), bool(m < mu))
            for c, m, s in zip(c_grid, means, stds)]


# --------------------------------------------------------------------------
# scaling fits


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of ``C* - E0`` against problem size.

    ``exp-sqrt``: alpha * exp(beta * sqrt(N)); ``exp-linear``: alpha * exp(beta * N);
    ``quadratic``: gamma N^2 + delta N + omega; ``quadratic-2d``: gamma N^2 + omega.
    The residual norm is measured on the original scale of ``y``.
    """

    model: str
    params: dict
    residual_norm: float
    signal_norm: float

    @property
    def relative_residual(self) -> float:
        return self.residual_norm / self.signal_norm if self.signal_norm > 0 else 0.0

    def predict(self, size):
        n = np.asarray(size, dtype=float)
        p = self.params
        if self.model == "exp-sqrt":
            return p["alpha"] * np.exp(p["beta"] * np.sqrt(n))
        if self.model == "exp-linear":
            return p["alpha"] * np.exp(p["beta"] * n)
        if self.model == "quadratic":
            return p["gamma"] * n**2 + p["delta"] * n + p["omega"]
        return p["gamma"] * n**2 + p["omega"]

    def to_dict(self) -> dict:
        return {"model": self.model, "params": dict(self.params),
                "residual_norm": self.residual_norm, "signal_norm": self.signal_norm,
                "relative_residual": self.relative_residual}


def fit_scaling(points: Sequence[tuple[float, float]], model: str) -> ScalingFit:
    if model not in SCALING_MODELS:
        raise ConfigError(f"unknown scaling model {model!r}; choose from {SCALING_MODELS}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n, y = pts[:, 0], pts[:, 1]
    need = 4 if model == "quadratic" else 3
    if pts.shape[0] < need:
        raise InsufficientPoints(f"{model} fit needs at least {need} points, got {pts.shape[0]}")
    if model.startswith("exp"):
        if np.any(y <= 0):
            raise NonPositiveValue("exponential fits need positive values")
        x = np.sqrt(n) if model == "exp-sqrt" else n
        a = np.column_stack((np.ones_like(x), x))
        (log_alpha, beta), *_ = np.linalg.lstsq(a, np.log(y), rcond=None)
        params = {"alpha": float(np.exp(log_alpha)), "beta": float(beta)}
    elif model == "quadratic":
        a = np.column_stack((n**2, n, np.ones_like(n)))
        (g, dl, w), *_ = np.linalg.lstsq(a, y, rcond=None)
        params = {"gamma": float(g), "delta": float(dl), "omega": float(w)}
    else:
        a = np.column_stack((n**2, np.ones_like(n)))
        (g, w), *_ = np.linalg.lstsq(a, y, rcond=None)
        params = {"gamma": float(g), "omega": float(w)}
    fit = ScalingFit(model, params, 0.0, float(np.linalg.norm(y)))
    resid = float(np.linalg.norm(y - fit.predict(n)))
    return ScalingFit(model, params, resid, fit.signal_norm)


def giveup_size(fit: ScalingFit, e1_gap: float) -> float:
    """Size at which the exponential branch reaches the first-excited gap."""
    if fit.model not in ("exp-sqrt", "exp-linear"):
        raise ConfigError("give-up size needs an exponential fit")
    alpha, beta = fit.params["alpha"], fit.params["beta"]
    if not (alpha > 0 and beta > 0):
        raise DomainError("give-up size needs alpha > 0 and beta > 0")
    if not e1_gap > alpha:
        raise DomainError(f"gap {e1_gap!r} must exceed alpha {alpha!r}")
    r = math.log(e1_gap / alpha)
    return r * r / (beta * beta) if fit.model == "exp-sqrt" else r / beta


def read_scaling_points(path) -> list[tuple[float, float]]:
    """Two-column CSV ``size,value`` with a header row."""
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows or [h.strip() for h in rows[0][:2]] != ["size", "value"]:
        raise DataError(f"{path}: expected header 'size,value'")
    try:
        return [(float(r[0]), float(r[1])) for r in rows[1:] if r]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from None
