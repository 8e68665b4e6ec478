"""Batch experiment runner: seeded run matrices, trace and strategy
emission, and cross-run summary statistics.

Output files (all under the configured directory):

* ``run_<id>.trace.csv`` with columns
  ``run_id,iteration,exploitability,alpha,cone_distance,bound,wall_ms``
  (a field is empty when it does not apply to the run);
* ``run_<id>.strategy.json``, a sorted list of
  ``{"infoset", "actions", "probabilities"}`` records;
* ``summary.csv`` with columns ``iteration,metric,mean,lo90,hi90`` where
  the band is the empirical 5th and 95th percentile across runs.

Reruns with the same config and base seed produce byte-identical files;
wall-clock timing is therefore off by default and opt-in via
``record_timing`` (a timed rerun cannot be byte-identical).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import ConvergenceTrace
from .games import build_game
from .solvers import SolveResult, SolverConfig, run_solver

TRACE_COLUMNS = ("run_id", "iteration", "exploitability", "alpha",
                 "cone_distance", "bound", "wall_ms")
SUMMARY_COLUMNS = ("iteration", "metric", "mean", "lo90", "hi90")

CONFIG_SCHEMA_VERSION = 1


class ExperimentConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A run matrix: one game, one solver setup, many seeds.

    Run k uses seed ``base_seed + k``, so a matrix is reproducible from its
    config alone.
    """

    name: str = "experiment"
    game: str = "kuhn"
    game_params: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    runs: int = 1
    base_seed: int = 0
    out_dir: str | None = None
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ExperimentConfigError("runs must be at least 1")
        if self.workers < 1:
            raise ExperimentConfigError("workers must be at least 1")

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "name": self.name,
            "game": self.game,
            "game_params": dict(self.game_params),
            "solver": self.solver.to_dict(),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "record_timing": self.record_timing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise ExperimentConfigError(
                f"unsupported or missing schema_version: {version!r}")
        known = {"name", "game", "game_params", "solver", "runs",
                 "base_seed", "out_dir", "workers", "record_timing"}
        unknown = set(data) - known
        if unknown:
            raise ExperimentConfigError(
                f"unknown experiment fields: {sorted(unknown)}")
        if "solver" in data:
            data["solver"] = SolverConfig.from_dict(data["solver"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class SummaryStats:
    """Per-checkpoint mean and empirical 90% band across runs."""

    iterations: np.ndarray
    metrics: dict[str, dict[str, np.ndarray]]  # metric -> mean/lo90/hi90

    def rows(self):
        for metric in sorted(self.metrics):
            stats = self.metrics[metric]
            for i, it in enumerate(self.iterations):
                yield (int(it), metric, stats["mean"][i], stats["lo90"][i],
                       stats["hi90"][i])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    results: list[SolveResult]
    summary: SummaryStats
    files: list[Path] = field(default_factory=list)


def summarize(traces: list[ConvergenceTrace]) -> SummaryStats:
    """Mean and empirical 5th/95th percentile band per checkpoint.

    All traces must share the same checkpoint iterations.  Metrics that are
    absent from a trace (all-None column) are skipped.
    """
    if not traces:
        raise ExperimentConfigError("need at least one trace to summarize")
    iterations = traces[0].iterations()
    for t in traces[1:]:
        if not np.array_equal(t.iterations(), iterations):
            raise ExperimentConfigError(
                "traces have misaligned checkpoints")
    metrics = {}
    for name in ("exploitability", "alpha", "cone_distance"):
        data = np.stack([t.series(name) for t in traces])
        if np.isnan(data).all():
            continue
        metrics[name] = {
            "mean": data.mean(axis=0),
            "lo90": np.percentile(data, 5.0, axis=0),
            "hi90": np.percentile(data, 95.0, axis=0),
        }
    return SummaryStats(iterations=iterations, metrics=metrics)


def _format(value) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(path, run_id: int, trace: ConvergenceTrace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for p in trace:
            writer.writerow([
                run_id, p.iteration, _format(p.exploitability),
                _format(p.alpha), _format(p.cone_distance),
                _format(p.bound), _format(p.wall_ms),
            ])


def write_summary_csv(path, summary: SummaryStats) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for it, metric, mean, lo, hi in summary.rows():
            writer.writerow([it, metric, _format(mean), _format(lo),
                             _format(hi)])


def dump_strategy(path, profile: dict[str, np.ndarray], game) -> None:
    """Strategy dump: sorted records of infoset, action labels, and
    probabilities.
    """
    from .game import as_flat

    flat = as_flat(game)
    records = []
    for key in sorted(profile):
        idx = flat.key_to_index[key]
        records.append({
            "infoset": key,
            "actions": list(flat.infoset_actions[idx]),
            "probabilities": [float(p) for p in profile[key]],
        })
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")


def load_strategy(path) -> dict[str, np.ndarray]:
    """Load a strategy dump, re-validating every probability vector."""
    with open(path) as fh:
        records = json.load(fh)
    profile = {}
    for rec in records:
        vec = np.asarray(rec["probabilities"], dtype=float)
        if vec.min() < -1e-9 or abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError(
                f"strategy for {rec['infoset']!r} is not a probability "
                f"vector: {vec}")
        profile[rec["infoset"]] = vec
    return profile


def _single_run(config_dict: dict, run_index: int) -> SolveResult:
    config = ExperimentConfig.from_dict(config_dict)
    game = build_game(config.game, **config.game_params)
    solver_config = SolverConfig.from_dict({
        **config.solver.to_dict(),
        "seed": config.base_seed + run_index,
    })
    return run_solver(game, solver_config,
                      record_timing=config.record_timing)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the run matrix and write traces, strategies, and summary.

    Runs are independent and dispatched to worker processes when
    ``workers`` exceeds one; outputs are identical either way because each
    run is fully determined by its own seed.
    """
    game = build_game(config.game, **config.game_params)  # validate early
    config_dict = config.to_dict()
    if config.workers > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_single_run,
                                    [config_dict] * config.runs,
                                    range(config.runs)))
    else:
        results = [_single_run(config_dict, k) for k in range(config.runs)]

    summary = summarize([r.trace for r in results])
    files: list[Path] = []
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        width = max(3, len(str(config.runs - 1)))
        for k, result in enumerate(results):
            trace_path = out / f"run_{k:0{width}d}.trace.csv"
            write_trace_csv(trace_path, k, result.trace)
            files.append(trace_path)
            strategy_path = out / f"run_{k:0{width}d}.strategy.json"
            dump_strategy(strategy_path, result.profile, game)
            files.append(strategy_path)
        summary_path = out / "summary.csv"
        write_summary_csv(summary_path, summary)
        files.append(summary_path)
        config_path = out / "config.json"
        config.dump_json(config_path)
        files.append(config_path)
    return ExperimentResult(config=config, results=results, summary=summary,
                            files=files)


def six_config_suite(runs: int = 30, iterations: int = 10_000,
                     base_seed: int = 0,
                     out_dir: str | None = None) -> list[ExperimentConfig]:
    """The six preference settings of the equilibrium-selection study.

    Order: BR with bet degree 10, BR bet 5, RM bet 5, RM pass 5, BR pass 5,
    BR pass 10; every other degree stays 1, thresholds stay 0.
    """
    settings = [
        ("br_bet10", "PrefCFR_BR", "Bet", 10.0),
        ("br_bet5", "PrefCFR_BR", "Bet", 5.0),
        ("rm_bet5", "PrefCFR_RM", "Bet", 5.0),
        ("rm_pass5", "PrefCFR_RM", "Pass", 5.0),
        ("br_pass5", "PrefCFR_BR", "Pass", 5.0),
        ("br_pass10", "PrefCFR_BR", "Pass", 10.0),
    ]
    configs = []
    for name, algo, action, degree in settings:
        entries = [{"infoset": key, "action": action, "delta": degree}
                   for key in ("J|", "Q|", "K|")]
        solver = SolverConfig.from_dict({
            "algorithm": algo,
            "iterations": iterations,
            "initial_profile": "random",
            "preference": entries,
        })
        configs.append(ExperimentConfig(
            name=name, game="kuhn", solver=solver, runs=runs,
            base_seed=base_seed,
            out_dir=None if out_dir is None else str(Path(out_dir) / name),
        ))
    return configs
