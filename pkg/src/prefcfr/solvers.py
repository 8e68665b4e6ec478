"""Iterative solvers over flattened trees: full-traversal regret updates
(vanilla and preference-weighted, with optional regret thresholds) and
external-sampling Monte Carlo, all sharing one table layout.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .evaluation import (BoundViolation, ConvergenceTrace, TracePoint,
                         convergence_bound, exploitability)
from .game import FlatGame, as_flat, uniform_profile

ALGORITHMS = ("CFR", "PrefCFR_RM", "PrefCFR_BR", "MCCFR_External")

#: Preference degrees above this slow convergence noticeably.
DELTA_COMFORT_LIMIT = 5.0


class SolverConfigError(ValueError):
    """Invalid solver or preference configuration."""


@dataclass(frozen=True)
class PreferenceConfig:
    """Per-action preference degrees and per-infoset regret thresholds.

    ``delta_exact`` maps (infoset key, action label) to a degree >= 1;
    ``delta_wildcard`` maps an action label to a degree applied at every
    infoset carrying that label (exact entries win).  ``beta_exact`` maps
    infoset keys to thresholds >= 0 and ``beta_default`` applies
    everywhere else.
    """

    delta_exact: dict[tuple[str, str], float] = field(default_factory=dict)
    delta_wildcard: dict[str, float] = field(default_factory=dict)
    beta_exact: dict[str, float] = field(default_factory=dict)
    beta_default: float = 0.0

    def __post_init__(self):
        for (key, action), value in self.delta_exact.items():
            if value < 1.0:
                raise SolverConfigError(
                    f"preference degree for ({key!r}, {action!r}) must be "
                    f">= 1, got {value}")
        for action, value in self.delta_wildcard.items():
            if value < 1.0:
                raise SolverConfigError(
                    f"wildcard preference degree for {action!r} must be "
                    f">= 1, got {value}")
        for key, value in self.beta_exact.items():
            if value < 0.0:
                raise SolverConfigError(
                    f"threshold for {key!r} must be >= 0, got {value}")
        if self.beta_default < 0.0:
            raise SolverConfigError(
                f"default threshold must be >= 0, got {self.beta_default}")
        high = [v for v in list(self.delta_exact.values()) +
                list(self.delta_wildcard.values())
                if v > DELTA_COMFORT_LIMIT]
        if high:
            warnings.warn(
                f"preference degrees above {DELTA_COMFORT_LIMIT} "
                f"({sorted(set(high))}) slow convergence noticeably",
                UserWarning, stacklevel=2)

    def is_trivial(self) -> bool:
        return not self.delta_exact and not self.delta_wildcard \
            and not self.beta_exact and self.beta_default == 0.0

    def delta_for(self, key: str, action: str) -> float:
        if (key, action) in self.delta_exact:
            return self.delta_exact[(key, action)]
        return self.delta_wildcard.get(action, 1.0)

    def beta_for(self, key: str) -> float:
        return self.beta_exact.get(key, self.beta_default)

    def materialize(self, flat: FlatGame) -> tuple[np.ndarray, np.ndarray]:
        """Per-action degree table and per-infoset threshold table."""
        delta = np.ones(flat.total_actions)
        beta = np.full(flat.n_infosets, self.beta_default)
        for k, key in enumerate(flat.infoset_keys):
            start = flat.iset_start[k]
            for j, action in enumerate(flat.infoset_actions[k]):
                delta[start + j] = self.delta_for(key, action)
            beta[k] = self.beta_for(key)
        return delta, beta

    def delta_star(self, flat: FlatGame) -> float:
        delta, _ = self.materialize(flat)
        return float(delta.max())

    @classmethod
    def from_entries(cls, entries) -> "PreferenceConfig":
        """Build from a list of dicts, e.g.

        ``{"infoset": "J|", "action": "Bet", "delta": 5.0}`` (exact),
        ``{"action": "Raise", "delta": 5.0}`` (every infoset),
        ``{"infoset": "J|", "beta": 0.05}`` and ``{"beta": 0.05}``.
        """
        delta_exact: dict[tuple[str, str], float] = {}
        delta_wildcard: dict[str, float] = {}
        beta_exact: dict[str, float] = {}
        beta_default = 0.0
        for entry in entries:
            unknown = set(entry) - {"infoset", "action", "delta", "beta"}
            if unknown:
                raise SolverConfigError(
                    f"unknown preference fields: {sorted(unknown)}")
            if "delta" in entry:
                if "action" not in entry:
                    raise SolverConfigError(
                        f"preference entry needs an action: {entry}")
                if "infoset" in entry:
                    delta_exact[(entry["infoset"], entry["action"])] = \
                        float(entry["delta"])
                else:
                    delta_wildcard[entry["action"]] = float(entry["delta"])
            elif "beta" in entry:
                if "infoset" in entry:
                    beta_exact[entry["infoset"]] = float(entry["beta"])
                else:
                    beta_default = float(entry["beta"])
            else:
                raise SolverConfigError(
                    f"preference entry needs delta or beta: {entry}")
        return cls(delta_exact=delta_exact, delta_wildcard=delta_wildcard,
                   beta_exact=beta_exact, beta_default=beta_default)

    def to_entries(self) -> list[dict]:
        entries: list[dict] = []
        for (key, action), value in sorted(self.delta_exact.items()):
            entries.append({"infoset": key, "action": action,
                            "delta": value})
        for action, value in sorted(self.delta_wildcard.items()):
            entries.append({"action": action, "delta": value})
        for key, value in sorted(self.beta_exact.items()):
            entries.append({"infoset": key, "beta": value})
        if self.beta_default:
            entries.append({"beta": self.beta_default})
        return entries


@dataclass(frozen=True)
class SolverConfig:
    """Everything one solver run needs besides the game itself."""

    algorithm: str = "CFR"
    iterations: int = 10_000
    seed: int = 0
    initial_profile: str = "uniform"  # or "random"
    preference: PreferenceConfig = field(default_factory=PreferenceConfig)
    checkpoints: str | int = "default"
    monitor_bounds: bool = True
    strict_bounds: bool = False
    # optional per-player rule override ("CFR", "PrefCFR_RM", "PrefCFR_BR")
    player_rules: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SolverConfigError(
                f"algorithm must be one of {ALGORITHMS}, "
                f"got {self.algorithm!r}")
        if self.iterations < 1:
            raise SolverConfigError("iterations must be at least 1")
        if self.initial_profile not in ("uniform", "random"):
            raise SolverConfigError(
                f"initial_profile must be uniform or random, "
                f"got {self.initial_profile!r}")
        if self.algorithm in ("CFR", "MCCFR_External") \
                and not self.preference.is_trivial():
            raise SolverConfigError(
                f"{self.algorithm} ignores preference settings; use a "
                "Pref-CFR algorithm or drop them")
        if self.player_rules is not None:
            for rule in self.player_rules:
                if rule not in ("CFR", "PrefCFR_RM", "PrefCFR_BR"):
                    raise SolverConfigError(
                        f"per-player rule {rule!r} not recognized")

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "seed": self.seed,
            "initial_profile": self.initial_profile,
            "preference": self.preference.to_entries(),
            "checkpoints": self.checkpoints,
            "monitor_bounds": self.monitor_bounds,
            "strict_bounds": self.strict_bounds,
            "player_rules": list(self.player_rules)
            if self.player_rules else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {"algorithm", "iterations", "seed", "initial_profile",
                 "preference", "checkpoints", "monitor_bounds",
                 "strict_bounds", "player_rules"}
        unknown = set(data) - known
        if unknown:
            raise SolverConfigError(
                f"unknown solver fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "preference" in kwargs:
            kwargs["preference"] = PreferenceConfig.from_entries(
                kwargs["preference"])
        if kwargs.get("player_rules") is not None:
            kwargs["player_rules"] = tuple(kwargs["player_rules"])
        return cls(**kwargs)


class RegretTables:
    """Average counterfactual regrets plus average-strategy accumulators.

    ``regret_avg`` holds the running mean of per-iteration regret
    contributions (zeros included for unreached infosets), so it equals the
    batch mean after any number of updates.  The average strategy is the
    reach-weighted numerator over denominator, uniform where never reached.
    """

    def __init__(self, flat: FlatGame):
        self.flat = flat
        self.regret_avg = np.zeros(flat.total_actions)
        self.strategy_numerator = np.zeros(flat.total_actions)
        self.strategy_denominator = np.zeros(flat.n_infosets)
        self.iterations = 0

    def average_strategy_flat(self) -> np.ndarray:
        flat = self.flat
        out = np.empty(flat.total_actions)
        for k in range(flat.n_infosets):
            s, n = flat.iset_start[k], flat.iset_count[k]
            den = self.strategy_denominator[k]
            if den > 0:
                out[s:s + n] = self.strategy_numerator[s:s + n] / den
            else:
                out[s:s + n] = 1.0 / n
        return out

    def average_profile(self) -> dict[str, np.ndarray]:
        return self.flat.flat_to_profile(self.average_strategy_flat())

    def regret_profile(self) -> dict[str, np.ndarray]:
        return self.flat.flat_to_profile(self.regret_avg)


# ---------------------------------------------------------------------------
# next-strategy rules at the single-infoset level


def next_strategy_rm(regret: np.ndarray) -> np.ndarray:
    """Positive regrets normalized; uniform when none are positive."""
    regret = np.asarray(regret, dtype=float)
    pos = np.maximum(regret, 0.0)
    total = pos.sum()
    if total > 0.0:
        return pos / total
    return np.full(regret.shape, 1.0 / regret.shape[0])


def _delta_fallback(delta: np.ndarray) -> np.ndarray:
    excess = delta - 1.0
    total = excess.sum()
    if total > 0.0:
        return excess / total
    return np.full(delta.shape, 1.0 / delta.shape[0])


def next_strategy_pref_rm(regret: np.ndarray,
                          delta: np.ndarray) -> np.ndarray:
    """Degree-weighted positive regrets normalized; excess-degree fallback."""
    regret = np.asarray(regret, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if (delta < 1.0).any():
        raise SolverConfigError("preference degrees must be >= 1")
    pos = np.maximum(regret, 0.0)
    if pos.any():
        weighted = delta * pos
        return weighted / weighted.sum()
    return _delta_fallback(delta)


def next_strategy_pref_br(regret: np.ndarray,
                          delta: np.ndarray) -> np.ndarray:
    """One-hot at argmax of degree-weighted regret (first index on ties)
    when some regret is positive; excess-degree fallback otherwise.
    """
    regret = np.asarray(regret, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if (delta < 1.0).any():
        raise SolverConfigError("preference degrees must be >= 1")
    if (regret > 0.0).any():
        out = np.zeros(regret.shape)
        out[int(np.argmax(delta * regret))] = 1.0
        return out
    return _delta_fallback(delta)


def apply_vulnerability(regret: np.ndarray, beta: float) -> np.ndarray:
    """Shift the regret vector down by the tolerated threshold."""
    if beta < 0.0:
        raise SolverConfigError("threshold must be >= 0")
    return np.asarray(regret, dtype=float) - beta


# ---------------------------------------------------------------------------
# traversal wrappers


def _rule_ids(flat: FlatGame, config: SolverConfig) -> np.ndarray:
    by_player = {}
    if config.player_rules is not None:
        if len(config.player_rules) != flat.n_players:
            raise SolverConfigError(
                "player_rules must list one rule per player")
        for i, rule in enumerate(config.player_rules):
            by_player[i] = _kernels.RULE_BR if rule == "PrefCFR_BR" \
                else _kernels.RULE_RM
    else:
        default = _kernels.RULE_BR if config.algorithm == "PrefCFR_BR" \
            else _kernels.RULE_RM
        by_player = {i: default for i in range(flat.n_players)}
    return np.array([by_player[p] for p in flat.infoset_player],
                    dtype=np.int64)


def _next_strategy_table(flat: FlatGame, tables: RegretTables,
                         delta: np.ndarray, beta: np.ndarray,
                         rule_ids: np.ndarray) -> np.ndarray:
    out = np.empty(flat.total_actions)
    _kernels.rule_next_strategy(tables.regret_avg, delta, beta,
                                flat.iset_start, flat.iset_count, rule_ids,
                                out)
    return out


def cfr_traverse(game, profile: dict[str, np.ndarray],
                 tables: RegretTables) -> RegretTables:
    """One full-tree simultaneous update of all players' tables.

    Every infoset's running-average regret absorbs this iteration's
    externally-weighted action regrets (zero where unreached), and the
    average-strategy accumulators absorb own-reach-weighted strategy mass.
    """
    flat = as_flat(game)
    if tables.flat is not flat:
        raise SolverConfigError("tables were built for a different game")
    strategy = flat.profile_to_flat(profile)
    inst = np.empty(flat.total_actions)
    reach = np.empty((flat.n_nodes, flat.n_players + 1))
    values = np.empty((flat.n_nodes, flat.n_players))
    tables.iterations += 1
    _kernels.cfr_iteration(*flat.tree_args(), strategy, tables.iterations,
                           flat.n_players, tables.regret_avg,
                           tables.strategy_numerator,
                           tables.strategy_denominator, inst, reach, values)
    return tables


def mccfr_external_iteration(game, profile: dict[str, np.ndarray],
                             tables: RegretTables, traverser: int,
                             rng) -> RegretTables:
    """External-sampling update for one designated traverser.

    ``rng`` must provide ``random(n)`` returning uniforms in [0, 1); one
    entry is consumed per chance or non-traverser decision node visited, in
    depth-first order.
    """
    flat = as_flat(game)
    if tables.flat is not flat:
        raise SolverConfigError("tables were built for a different game")
    strategy = flat.profile_to_flat(profile)
    uniforms = np.asarray(rng.random(flat.n_nodes), dtype=float)
    inst = np.empty(flat.total_actions)
    stack = np.empty(flat.n_nodes, dtype=np.int64)
    order = np.empty(flat.n_nodes, dtype=np.int64)
    chosen_edge = np.empty(flat.n_nodes, dtype=np.int64)
    value = np.empty(flat.n_nodes)
    tables.iterations += 1
    _kernels.es_iteration(*flat.tree_args(), strategy, traverser, uniforms,
                          tables.iterations, tables.regret_avg,
                          tables.strategy_numerator,
                          tables.strategy_denominator, inst, stack, order,
                          chosen_edge, value)
    return tables


def checkpoint_schedule(total: int, cadence: str | int = "default"
                        ) -> list[int]:
    """Checkpoint iterations: every step up to 100 then log-spaced
    ("default"), every step ("all"), or every k-th step (integer cadence).
    The final iteration is always included.
    """
    if cadence == "all":
        return list(range(1, total + 1))
    if cadence == "default":
        points = list(range(1, min(total, 100) + 1))
        t = points[-1] if points else 1
        while t < total:
            t = min(total, max(t + 1, int(t * 1.25)))
            points.append(t)
        return points
    k = int(cadence)
    if k < 1:
        raise SolverConfigError(f"checkpoint stride must be >= 1, got {k}")
    points = list(range(k, total + 1, k))
    if not points or points[-1] != total:
        points.append(total)
    return points


@dataclass
class SolveResult:
    """Average strategy of a finished run plus its convergence trace."""

    profile: dict[str, np.ndarray]
    trace: ConvergenceTrace
    tables: RegretTables
    config: SolverConfig
    bound_violations: list = field(default_factory=list)
    stored_profiles: list[np.ndarray] | None = None
    stored_regrets: list[np.ndarray] | None = None


def initial_strategy_flat(flat: FlatGame, config: SolverConfig,
                          rng: np.random.Generator) -> np.ndarray:
    if config.initial_profile == "random":
        out = np.empty(flat.total_actions)
        for k in range(flat.n_infosets):
            s, n = flat.iset_start[k], flat.iset_count[k]
            out[s:s + n] = rng.dirichlet(np.ones(n))
        return out
    return flat.profile_to_flat(uniform_profile(flat.game))


def run_solver(game, config: SolverConfig, store: bool = False,
               record_timing: bool = False) -> SolveResult:
    """Iterate the configured update rule and trace convergence.

    Checkpoints record the aggregate exploitability of the running average
    strategy, the first-decision bet probability when the game exposes the
    "J|" infoset, and the rate bound for the run's rule.  ``store`` keeps
    per-iteration strategies and instantaneous regret means for the
    store-and-compare tests (memory scales with iterations).
    """
    flat = as_flat(game)
    tables = RegretTables(flat)
    rng = np.random.default_rng(config.seed)
    delta, beta = config.preference.materialize(flat)
    rule_ids = _rule_ids(flat, config)
    delta_star = float(delta.max())
    preference_rule = config.algorithm.startswith("PrefCFR") and \
        (delta_star > 1.0 or float(beta.max(initial=0.0)) > 0.0)
    max_actions = int(flat.iset_count.max()) if flat.n_infosets else 1

    strategy = initial_strategy_flat(flat, config, rng)
    checkpoints = set(checkpoint_schedule(config.iterations,
                                          config.checkpoints))
    trace = ConvergenceTrace()
    result = SolveResult(profile={}, trace=trace, tables=tables,
                         config=config,
                         stored_profiles=[] if store else None,
                         stored_regrets=[] if store else None)

    inst = np.empty(flat.total_actions)
    reach = np.empty((flat.n_nodes, flat.n_players + 1))
    values = np.empty((flat.n_nodes, flat.n_players))
    stack = np.empty(flat.n_nodes, dtype=np.int64)
    order = np.empty(flat.n_nodes, dtype=np.int64)
    chosen_edge = np.empty(flat.n_nodes, dtype=np.int64)
    value1 = np.empty(flat.n_nodes)
    has_alpha = "J|" in flat.key_to_index
    start = time.perf_counter()

    for t in range(1, config.iterations + 1):
        if store:
            result.stored_profiles.append(strategy.copy())
        if config.algorithm == "MCCFR_External":
            traverser = (t - 1) % flat.n_players
            uniforms = rng.random(flat.n_nodes)
            tables.iterations = t
            _kernels.es_iteration(*flat.tree_args(), strategy, traverser,
                                  uniforms, t, tables.regret_avg,
                                  tables.strategy_numerator,
                                  tables.strategy_denominator, inst, stack,
                                  order, chosen_edge, value1)
        else:
            tables.iterations = t
            _kernels.cfr_iteration(*flat.tree_args(), strategy, t,
                                   flat.n_players, tables.regret_avg,
                                   tables.strategy_numerator,
                                   tables.strategy_denominator, inst, reach,
                                   values)
        if store:
            result.stored_regrets.append(inst.copy())
        if t in checkpoints:
            profile = tables.average_profile()
            report = exploitability(flat.game, profile)
            alpha = float(profile["J|"][1]) if has_alpha else None
            # the rate bound covers exact traversal only; sampled runs
            # fluctuate above it early on
            sampled = config.algorithm == "MCCFR_External"
            bound = None if sampled else convergence_bound(
                flat.payoff_range, max_actions, delta_star, t,
                preference_rule)
            wall = (time.perf_counter() - start) * 1e3 \
                if record_timing else None
            trace.append(TracePoint(iteration=t,
                                    exploitability=report.aggregate,
                                    alpha=alpha, cone_distance=None,
                                    bound=bound, wall_ms=wall))
            if config.monitor_bounds and bound is not None \
                    and report.aggregate > bound + 1e-6:
                result.bound_violations.append((t, report.aggregate, bound))
                if config.strict_bounds:
                    raise BoundViolation(
                        f"exploitability {report.aggregate:.6f} exceeded "
                        f"bound {bound:.6f} at iteration {t}")
        strategy = _next_strategy_table(flat, tables, delta, beta, rule_ids)

    result.profile = tables.average_profile()
    return result
