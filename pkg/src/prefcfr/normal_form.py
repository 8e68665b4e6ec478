"""Matrix games, regret vectors, and the approachability geometry used by
the self-play solver: forcing strategies, half-space checks, and distances
to (shifted) nonpositive-orthant target cones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .evaluation import BoundViolation, ConvergenceTrace, TracePoint

RULE_NAMES = ("RM", "PrefRM", "PrefBR")

#: Slack applied to every half-space and bound comparison.
CHECK_TOL = 1e-9


@dataclass(frozen=True)
class MatrixGame:
    """Finite normal-form game.

    ``payoffs[i, a_1, ..., a_n]`` is player i's payoff under the joint pure
    action profile; ``action_labels[i]`` names player i's actions in the
    declared (tie-breaking) order.
    """

    payoffs: np.ndarray
    action_labels: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        payoffs = np.asarray(self.payoffs, dtype=float)
        object.__setattr__(self, "payoffs", payoffs)
        n = payoffs.shape[0]
        if payoffs.ndim != n + 1:
            raise ValueError(
                f"payoff tensor of {n} players must have {n + 1} axes, "
                f"got {payoffs.ndim}")
        if not self.action_labels:
            labels = tuple(
                tuple(f"a{j}" for j in range(payoffs.shape[1 + i]))
                for i in range(n))
            object.__setattr__(self, "action_labels", labels)
        for i in range(n):
            if len(self.action_labels[i]) != payoffs.shape[1 + i]:
                raise ValueError(f"player {i} labels do not match tensor")

    @property
    def n_players(self) -> int:
        return self.payoffs.shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.payoffs.shape[1:]

    @property
    def payoff_range(self) -> float:
        return float(self.payoffs.max() - self.payoffs.min())

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "players": self.n_players,
            "action_counts": list(self.action_counts),
            "action_labels": [list(l) for l in self.action_labels],
            "payoffs": [self.payoffs[i].ravel().tolist()
                        for i in range(self.n_players)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatrixGame":
        known = {"schema_version", "players", "action_counts",
                 "action_labels", "payoffs"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown matrix-game fields: {sorted(unknown)}")
        counts = tuple(data["action_counts"])
        if len(counts) != data["players"]:
            raise ValueError("action_counts length must equal player count")
        payoffs = np.stack([
            np.asarray(flat, dtype=float).reshape(counts)
            for flat in data["payoffs"]
        ])
        labels = tuple(tuple(l) for l in data.get("action_labels") or ())
        return cls(payoffs=payoffs, action_labels=labels)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MatrixGame":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def action_values(game: MatrixGame, profile: list[np.ndarray],
                  player: int) -> np.ndarray:
    """Expected payoff of each pure action against the others' strategies."""
    acc = np.moveaxis(game.payoffs[player], player, 0)
    for i in range(game.n_players - 1, -1, -1):
        if i != player:
            acc = acc @ profile[i]
    return acc


def regret_vector(game: MatrixGame, profile: list[np.ndarray],
                  player: int) -> np.ndarray:
    """Pure-action payoffs minus the profile's expected payoff.

    Component a holds u(a, others) - u(profile); entries are bounded by the
    payoff range in absolute value.
    """
    profile = [np.asarray(p, dtype=float) for p in profile]
    for i, p in enumerate(profile):
        if p.shape != (game.action_counts[i],):
            raise ValueError(
                f"strategy for player {i} has wrong length {p.shape}")
    values = action_values(game, profile, player)
    return values - values @ profile[player]


class AverageRegret:
    """Running mean of per-iteration regret vectors.

    Updating with vector r sets mean += (r - mean) / count, which equals
    the batch mean of everything seen so far.
    """

    def __init__(self, n_actions: int):
        self.mean = np.zeros(n_actions)
        self.count = 0

    def update(self, regret: np.ndarray) -> None:
        self.count += 1
        self.mean += (regret - self.mean) / self.count


@dataclass(frozen=True)
class TargetCone:
    """Orthant-style target {x : x_a <= threshold for all a}.

    ``threshold`` 0 is the equilibrium cone; positive values tolerate that
    much regret per action.
    """

    threshold: float = 0.0

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("cone threshold must be nonnegative")


def cone_distance(avg_regret, cone: TargetCone | float = 0.0) -> float:
    """Euclidean distance from an average-regret point to the target cone,
    i.e. the L2 norm of max(regret - threshold, 0).
    """
    vec = avg_regret.mean if isinstance(avg_regret, AverageRegret) \
        else np.asarray(avg_regret, dtype=float)
    threshold = cone.threshold if isinstance(cone, TargetCone) else cone
    return float(np.linalg.norm(np.maximum(vec - threshold, 0.0)))


def forcing_strategy(avg_regret) -> np.ndarray:
    """L1-normalized positive part of the average regret vector.

    This is the strategy that forces the half-space whose normal is the
    positive part; callers must use the rule fallback when no component is
    positive.
    """
    vec = avg_regret.mean if isinstance(avg_regret, AverageRegret) \
        else np.asarray(avg_regret, dtype=float)
    pos = np.maximum(vec, 0.0)
    total = pos.sum()
    if total <= 0.0:
        raise ValueError(
            "no positive regret component; use the fallback distribution")
    return pos / total


def forcing_halfspace_check(loss_vector: np.ndarray,
                            chosen_regret: np.ndarray,
                            played_strategy: np.ndarray,
                            tol: float = CHECK_TOL) -> bool:
    """Inner-product test that the played strategy forces the half-space
    selected by ``chosen_regret`` (a nonnegative vector of kept positive
    regret components): <loss, chosen/||chosen||_1 - played> <= 0.

    Vacuously true when no component was kept (the average regret already
    sits in the target cone).
    """
    chosen = np.asarray(chosen_regret, dtype=float)
    total = chosen.sum()
    if total <= 0.0:
        return True
    gap = float(np.dot(loss_vector, chosen / total - played_strategy))
    return gap <= tol


def _chosen_component(shifted: np.ndarray, delta: np.ndarray,
                      rule: str) -> np.ndarray:
    """Kept positive-regret components defining the forcing half-space.

    Proportional rules keep the delta-weighted positive part; the
    best-response rule keeps a one-hot at argmax delta*shifted.  Returns a
    zero vector when nothing is positive.
    """
    pos = np.maximum(shifted, 0.0)
    if not pos.any():
        return np.zeros_like(shifted)
    if rule == "PrefBR":
        out = np.zeros_like(shifted)
        out[int(np.argmax(delta * shifted))] = pos[int(
            np.argmax(delta * shifted))]
        return out
    return delta * pos


def _rule_strategy(shifted: np.ndarray, delta: np.ndarray,
                   rule: str) -> np.ndarray:
    pos = np.maximum(shifted, 0.0)
    if pos.any():
        if rule == "PrefBR":
            out = np.zeros_like(shifted)
            out[int(np.argmax(delta * shifted))] = 1.0
            return out
        weighted = delta * pos
        return weighted / weighted.sum()
    excess = delta - 1.0
    total = excess.sum()
    if total > 0.0:
        return excess / total
    return np.full(shifted.shape, 1.0 / shifted.shape[0])


@dataclass
class NormalFormResult:
    average_strategies: list[np.ndarray]
    trace: ConvergenceTrace
    average_regrets: list[AverageRegret]
    halfspace_checks: int = 0
    halfspace_failures: int = 0
    bound_violations: list[tuple[int, float, float]] = field(
        default_factory=list)


def exploitability_matrix(game: MatrixGame,
                          profile: list[np.ndarray]) -> float:
    """Mean best-response gain across players at the given mixed profile."""
    eps = 0.0
    for i in range(game.n_players):
        values = action_values(game, profile, i)
        eps += values.max() - values @ profile[i]
    return float(eps / game.n_players)


def normal_form_solve(game: MatrixGame, algo: str = "RM", prefs=None,
                      iters: int = 1000, seed: int | None = None,
                      initial_profile: str = "uniform",
                      strict_bounds: bool = False) -> NormalFormResult:
    """Self-play no-regret iteration with per-step approachability monitors.

    Both players update simultaneously from iteration-t strategies.  Each
    step records the distance from the average regret to the shifted target
    cone, the rate bound (payoff_range * sqrt(|A|) / sqrt(t) for plain RM,
    payoff_range * |A| * delta_star / sqrt(t) for preference rules), the
    exploitability of the running average profile, and runs the forcing
    half-space check for the strategy actually played.  Bound breaches are
    collected, and raise :class:`BoundViolation` in strict mode.
    """
    from .solvers import PreferenceConfig  # deferred: solvers pulls kernels

    if algo not in RULE_NAMES:
        raise ValueError(f"algo must be one of {RULE_NAMES}, got {algo!r}")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    prefs = prefs or PreferenceConfig()
    n = game.n_players
    counts = game.action_counts
    L = game.payoff_range

    delta = []
    beta = []
    for i in range(n):
        key = f"p{i}|"
        delta.append(np.array([
            prefs.delta_for(key, a) for a in game.action_labels[i]
        ]))
        beta.append(prefs.beta_for(key))
    delta_star = max(float(d.max()) for d in delta)

    rng = np.random.default_rng(seed)
    if initial_profile == "random":
        current = [rng.dirichlet(np.ones(c)) for c in counts]
    elif initial_profile == "uniform":
        current = [np.full(c, 1.0 / c) for c in counts]
    else:
        raise ValueError(f"unknown initial profile {initial_profile!r}")

    avg_regret = [AverageRegret(c) for c in counts]
    avg_strategy = [np.zeros(c) for c in counts]
    trace = ConvergenceTrace()
    result = NormalFormResult(average_strategies=avg_strategy, trace=trace,
                              average_regrets=avg_regret)
    chosen_prev = [None] * n

    for t in range(1, iters + 1):
        # forcing check: the strategy about to be played at t was derived
        # from the average regret after t-1; its loss vector depends on the
        # others' play at t
        for i in range(n):
            if chosen_prev[i] is None:
                continue
            loss = action_values(game, current, i)
            result.halfspace_checks += 1
            if not forcing_halfspace_check(loss, chosen_prev[i], current[i]):
                result.halfspace_failures += 1
        for i in range(n):
            avg_regret[i].update(regret_vector(game, current, i))
            avg_strategy[i] += (current[i] - avg_strategy[i]) / t

        dist = 0.0
        bound = 0.0
        for i in range(n):
            dist = max(dist, cone_distance(avg_regret[i], beta[i]))
            if algo == "RM" and delta_star == 1.0:
                b = L * np.sqrt(counts[i]) / np.sqrt(t)
            else:
                b = L * counts[i] * delta_star / np.sqrt(t)
            bound = max(bound, b)
        if dist > bound + 1e-6:
            result.bound_violations.append((t, dist, bound))
            if strict_bounds:
                raise BoundViolation(
                    f"cone distance {dist:.6f} exceeded bound {bound:.6f} "
                    f"at iteration {t}")
        trace.append(TracePoint(
            iteration=t,
            exploitability=exploitability_matrix(game, avg_strategy),
            alpha=None, cone_distance=dist, bound=bound, wall_ms=None))

        for i in range(n):
            shifted = avg_regret[i].mean - beta[i]
            chosen_prev[i] = _chosen_component(shifted, delta[i], algo)
            current[i] = _rule_strategy(shifted, delta[i], algo)

    return result
