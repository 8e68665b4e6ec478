"""Exact evaluation: best response, exploitability, head-to-head values,
style summaries, and convergence-rate monitoring.

Everything here is a pure function of immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .game import MissingInfosetError, as_flat, expected_value, reach_matrix


@dataclass(frozen=True)
class TracePoint:
    """One checkpoint of a solver run.

    ``alpha``, ``cone_distance``, ``bound`` and ``wall_ms`` are None when
    the quantity does not apply to the run that produced the trace.
    """

    iteration: int
    exploitability: float
    alpha: float | None = None
    cone_distance: float | None = None
    bound: float | None = None
    wall_ms: float | None = None


class ConvergenceTrace:
    """Append-only checkpoint sequence with strictly increasing iterations."""

    def __init__(self, points: list[TracePoint] | None = None):
        self.points: list[TracePoint] = []
        for p in points or ():
            self.append(p)

    def append(self, point: TracePoint) -> None:
        if self.points and point.iteration <= self.points[-1].iteration:
            raise ValueError(
                f"trace iterations must increase: {point.iteration} after "
                f"{self.points[-1].iteration}")
        self.points.append(point)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def iterations(self) -> np.ndarray:
        return np.array([p.iteration for p in self.points], dtype=int)

    def series(self, name: str) -> np.ndarray:
        return np.array([
            np.nan if getattr(p, name) is None else getattr(p, name)
            for p in self.points
        ])


@dataclass(frozen=True)
class ExploitabilityReport:
    """Best-response gain per player plus their arithmetic mean."""

    per_player: np.ndarray
    aggregate: float
    best_responses: tuple[dict[str, np.ndarray], ...]

    def __post_init__(self):
        if abs(self.aggregate - float(np.mean(self.per_player))) > 1e-9:
            raise ValueError("aggregate must be the mean of per-player gains")


@dataclass(frozen=True)
class StyleMetrics:
    """Reach-weighted mean action distribution over selected infosets."""

    distribution: np.ndarray
    action_labels: tuple[str, ...]
    infosets: tuple[str, ...]
    weights: np.ndarray

    def frequency(self, action: str) -> float:
        return float(self.distribution[self.action_labels.index(action)])


def best_response(game, profile: dict[str, np.ndarray],
                  player: int) -> tuple[dict[str, np.ndarray], float]:
    """Exact best response of ``player`` against a fixed profile.

    Scores each of the player's infosets bottom-up by external reach
    (opponents and chance) and picks the argmax action, breaking ties
    toward the first declared action; infosets the opponents never reach
    also get the first action.  Returns the pure strategy (over the
    player's infosets only) and its expected value for the player.
    """
    flat = as_flat(game)
    padded = dict(profile)
    for k, key in enumerate(flat.infoset_keys):
        # the responder's own entries are irrelevant to the response; allow
        # profiles that cover only the opponents
        if flat.infoset_player[k] == player and key not in padded:
            padded[key] = np.full(flat.iset_count[k],
                                  1.0 / flat.iset_count[k])
    strategy = flat.profile_to_flat(padded)
    reach = np.empty((flat.n_nodes, flat.n_players + 1))
    _kernels.reach_forward(flat.kind, flat.player, flat.infoset,
                           flat.child_start, flat.child_count,
                           flat.child_node, flat.chance_prob, flat.iset_start,
                           strategy, flat.n_players, reach)
    ext = reach[:, flat.n_players].copy()
    for j in range(flat.n_players):
        if j != player:
            ext *= reach[:, j]
    chosen = np.zeros(flat.n_infosets, dtype=np.int64)
    value = np.empty(flat.n_nodes)
    computed = np.zeros(flat.n_nodes, dtype=np.int64)
    stack = np.empty(flat.n_nodes, dtype=np.int64)
    br_value = _kernels.best_response_backward(
        *flat.tree_args(), flat.infoset_player_arr, flat.iset_node_start,
        flat.iset_node_count, flat.iset_nodes, strategy, ext, player, chosen,
        value, computed, stack)
    response = {}
    for k, key in enumerate(flat.infoset_keys):
        if flat.infoset_player[k] != player:
            continue
        vec = np.zeros(flat.iset_count[k])
        vec[chosen[k]] = 1.0
        response[key] = vec
    return response, float(br_value)


def exploitability(game, profile: dict[str, np.ndarray]
                   ) -> ExploitabilityReport:
    """Best-response gain of every player against the profile.

    Per player the gain is the best-response value minus the profile's own
    expected value; the aggregate is the mean across players and is zero
    exactly at an equilibrium.
    """
    flat = as_flat(game)
    base = expected_value(game, profile)
    gains = np.empty(flat.n_players)
    responses = []
    for i in range(flat.n_players):
        response, value = best_response(game, profile, i)
        gains[i] = value - base[i]
        responses.append(response)
    return ExploitabilityReport(per_player=gains,
                                aggregate=float(gains.mean()),
                                best_responses=tuple(responses))


def extract_alpha(profile: dict[str, np.ndarray],
                  bet_index: int = 1) -> float:
    """Betting probability with the lowest card at the first decision
    (the equilibrium-family coordinate for Kuhn poker).
    """
    if "J|" not in profile:
        raise MissingInfosetError("J|")
    return float(profile["J|"][bet_index])


@dataclass(frozen=True)
class HeadToHeadResult:
    """Expected payoffs of fixed agents over seat assignments.

    ``table[k]`` holds the per-seat payoffs of permutation k (seat s was
    occupied by agent ``permutations[k][s]``); ``per_agent`` averages each
    agent's payoff over all assignments played.
    """

    per_agent: np.ndarray
    table: np.ndarray
    permutations: tuple[tuple[int, ...], ...]


def head_to_head(game, profiles: list[dict[str, np.ndarray]],
                 seat_permutations: bool = False) -> HeadToHeadResult:
    """Exact expected payoff of one fixed agent per seat.

    Each agent's profile must cover the whole game; seat s uses agent s's
    entries at seat-s infosets.  With ``seat_permutations`` every
    assignment of agents to seats is played and averaged, cancelling
    positional advantage.
    """
    from itertools import permutations as iter_permutations

    flat = as_flat(game)
    n = flat.n_players
    if len(profiles) != n:
        raise ValueError(
            f"need one profile per seat: got {len(profiles)} for {n} seats")
    perms = tuple(iter_permutations(range(n))) if seat_permutations \
        else ((tuple(range(n)),))
    table = np.empty((len(perms), n))
    per_agent = np.zeros(n)
    for k, perm in enumerate(perms):
        merged = {}
        for idx, key in enumerate(flat.infoset_keys):
            seat = flat.infoset_player[idx]
            merged[key] = profiles[perm[seat]][key]
        values = expected_value(game, merged)
        table[k] = values
        for seat in range(n):
            per_agent[perm[seat]] += values[seat]
    per_agent /= len(perms)
    return HeadToHeadResult(per_agent=per_agent, table=table,
                            permutations=perms)


def style_metrics(game, profile: dict[str, np.ndarray],
                  infoset_filter) -> StyleMetrics:
    """Aggregate action distribution over selected infosets.

    ``infoset_filter`` is an iterable of keys or a predicate over keys.
    Every selected infoset must expose the same action labels; each is
    weighted by its full reach probability (all players and chance) under
    the profile itself.
    """
    flat = as_flat(game)
    if callable(infoset_filter):
        keys = [k for k in flat.infoset_keys if infoset_filter(k)]
    else:
        keys = list(infoset_filter)
    if not keys:
        raise ValueError("infoset filter selected nothing")
    labels = None
    for key in keys:
        if key not in flat.key_to_index:
            raise MissingInfosetError(key)
        actions = flat.infoset_actions[flat.key_to_index[key]]
        if labels is None:
            labels = actions
        elif actions != labels:
            raise ValueError(
                f"selected infosets have mixed action lists: {labels} vs "
                f"{actions} at {key!r}")
    reach = reach_matrix(game, profile)
    total_reach = reach.prod(axis=1)
    weights = np.empty(len(keys))
    dist = np.zeros(len(labels))
    for j, key in enumerate(keys):
        idx = flat.key_to_index[key]
        nodes = flat.iset_nodes[
            flat.iset_node_start[idx]:
            flat.iset_node_start[idx] + flat.iset_node_count[idx]]
        weights[j] = total_reach[nodes].sum()
        dist += weights[j] * np.asarray(profile[key], dtype=float)
    if weights.sum() <= 0:
        raise ValueError("selected infosets are unreachable under profile")
    dist /= weights.sum()
    return StyleMetrics(distribution=dist, action_labels=labels,
                        infosets=tuple(keys), weights=weights)


def first_decision_infosets(game, player: int) -> list[str]:
    """Keys of the player's infosets reached before any own action.

    The flattener records each infoset's own-action recall history; a first
    decision is exactly an infoset with an empty one.
    """
    flat = as_flat(game)
    return [
        key for k, key in enumerate(flat.infoset_keys)
        if flat.infoset_player[k] == player
        and not flat.infoset_own_history[k]
    ]


class BoundViolation(RuntimeError):
    """Raised in strict mode when measured progress breaches a rate bound."""


@dataclass(frozen=True)
class BoundViolationRecord:
    iteration: int
    measured: float
    bound: float


def convergence_bound(payoff_range: float, action_count: int,
                      delta_star: float, iteration: int,
                      preference: bool) -> float:
    """Rate bound on the distance still to cover after ``iteration`` steps.

    Plain regret matching obeys payoff_range * sqrt(|A|) / sqrt(t);
    preference-weighted rules pay a linear factor in the largest weight:
    payoff_range * |A| * delta_star / sqrt(t).
    """
    if preference:
        return payoff_range * action_count * delta_star / np.sqrt(iteration)
    return payoff_range * np.sqrt(action_count) / np.sqrt(iteration)


def bound_monitor(trace: ConvergenceTrace, payoff_range: float,
                  action_count: int, delta_star: float = 1.0,
                  preference: bool = False,
                  slack: float = 1e-6) -> list[BoundViolationRecord]:
    """Flag trace points whose measured progress exceeds the rate bound.

    Normal-form traces are checked on their cone distance; extensive-form
    traces on measured exploitability.
    """
    if not len(trace):
        raise ValueError("trace is empty")
    violations = []
    for p in trace:
        measured = p.cone_distance if p.cone_distance is not None \
            else p.exploitability
        bound = convergence_bound(payoff_range, action_count, delta_star,
                                  p.iteration, preference)
        if measured > bound + slack:
            violations.append(BoundViolationRecord(
                iteration=p.iteration, measured=measured, bound=bound))
    return violations
