"""Extensive-form game abstraction, flattening, and traversal primitives.

Games expose a small accessor interface over opaque state objects
(:class:`Game`).  Before anything numeric happens the tree is flattened
once into preorder arrays (:class:`FlatGame`); all solvers and evaluators
run on those arrays.  Games must be finite trees with perfect recall, and
action order within an information set is the declaration order of the
game definition; that order also resolves every argmax tie in the library.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import CHANCE_NODE, DECISION, TERMINAL

#: Acting-player sentinel for chance nodes.
CHANCE = -1

#: Tolerance for probability-simplex validation.
SIMPLEX_TOL = 1e-9


class GameError(Exception):
    """Base class for game definition and traversal errors."""


class GameStructureError(GameError):
    """The game violates a structural requirement (tree, recall, simplex)."""


class MissingInfosetError(GameError, KeyError):
    """A profile lacks an information set required by the traversal."""

    def __init__(self, key: str):
        super().__init__(f"profile has no entry for information set {key!r}")
        self.key = key


class Game(abc.ABC):
    """Abstract extensive-form game over opaque immutable states.

    Implementations must be immutable after construction so instances can
    be shared freely across concurrent solver runs; traversal never locks.
    """

    player_count: int

    @abc.abstractmethod
    def root(self):
        """Initial state."""

    @abc.abstractmethod
    def is_terminal(self, state) -> bool:
        """True when the game is over at ``state``."""

    @abc.abstractmethod
    def terminal_payoffs(self, state):
        """Payoff vector of length ``player_count`` (terminal states only)."""

    @abc.abstractmethod
    def acting_player(self, state) -> int:
        """Player index to act, or ``CHANCE`` at chance nodes."""

    @abc.abstractmethod
    def legal_actions(self, state) -> list[str]:
        """Ordered action labels; chance nodes label their outcomes."""

    @abc.abstractmethod
    def chance_distribution(self, state) -> np.ndarray:
        """Outcome probabilities aligned with ``legal_actions`` (chance only)."""

    @abc.abstractmethod
    def infoset_key(self, state) -> str:
        """Identifier shared by all states the actor cannot tell apart.

        Keys follow the convention ``<private observation>|<public action
        history>``.
        """

    @abc.abstractmethod
    def child(self, state, action: str):
        """Successor state after ``action``."""

    @property
    def payoff_range(self) -> float:
        """Spread between best and worst terminal payoff across players."""
        return as_flat(self).payoff_range


@dataclass(frozen=True)
class ReachProbabilities:
    """Per-node reach decomposition under a profile.

    ``own[i]`` multiplies player i's action probabilities on the root path,
    ``external[i]`` multiplies everyone else's (chance included), and
    ``chance`` is the chance-only factor.
    """

    own: np.ndarray
    external: np.ndarray
    chance: float


class FlatGame:
    """Preorder array form of a game tree plus infoset metadata.

    Parents precede children; infosets are indexed in first-visit order,
    which under perfect recall places every infoset before the infosets it
    can lead to (used by the best-response pass).  ``iset_start`` maps an
    infoset to its row in the flat per-action tables of length
    ``total_actions``.
    """

    def __init__(self, game: Game, max_nodes: int = 500_000):
        self.game = game
        self.n_players = game.player_count
        kind: list[int] = []
        player: list[int] = []
        infoset: list[int] = []
        child_start: list[int] = []
        child_count: list[int] = []
        child_node: list[int] = []
        chance_prob: list[float] = []
        payoffs: list[np.ndarray] = []
        paths: list[tuple[str, ...]] = []

        self.infoset_keys: list[str] = []
        self.infoset_actions: list[tuple[str, ...]] = []
        self.infoset_player: list[int] = []
        self.key_to_index: dict[str, int] = {}
        iset_nodes: list[list[int]] = []
        iset_history: list[tuple] = []

        zero = np.zeros(self.n_players)
        # Stack entries: (state, path, per-player action history, edge slot
        # in child_node to backpatch), where a history is a tuple of
        # (infoset index, action index) pairs used for the recall check.
        stack = [(game.root(), (), tuple(() for _ in range(self.n_players)),
                  -1)]
        while stack:
            state, path, hist, parent_slot = stack.pop()
            node = len(kind)
            if node >= max_nodes:
                raise GameStructureError(
                    f"game tree exceeded {max_nodes} nodes; "
                    "not a finite tree?")
            if parent_slot >= 0:
                child_node[parent_slot] = node
            paths.append(path)
            if game.is_terminal(state):
                vec = np.asarray(game.terminal_payoffs(state), dtype=float)
                if vec.shape != (self.n_players,):
                    raise GameStructureError(
                        f"terminal payoff vector at {path!r} has shape "
                        f"{vec.shape}, expected ({self.n_players},)")
                kind.append(TERMINAL)
                player.append(-1)
                infoset.append(-1)
                child_start.append(len(child_node))
                child_count.append(0)
                payoffs.append(vec)
                continue
            actions = list(game.legal_actions(state))
            if not actions:
                raise GameStructureError(
                    f"non-terminal state at {path!r} has no actions")
            acting = game.acting_player(state)
            payoffs.append(zero)
            child_start.append(len(child_node))
            child_count.append(len(actions))
            if acting == CHANCE:
                probs = np.asarray(game.chance_distribution(state),
                                   dtype=float)
                if probs.shape != (len(actions),):
                    raise GameStructureError(
                        f"chance distribution at {path!r} does not match "
                        "its outcome count")
                if probs.min() < -SIMPLEX_TOL or \
                        abs(probs.sum() - 1.0) > SIMPLEX_TOL:
                    raise GameStructureError(
                        f"chance distribution at {path!r} is not a "
                        f"probability vector: {probs}")
                kind.append(CHANCE_NODE)
                player.append(-1)
                infoset.append(-1)
                chance_prob.extend(probs)
                child_node.extend(-1 for _ in actions)
                base = child_start[node]
                for c in reversed(range(len(actions))):
                    stack.append((game.child(state, actions[c]),
                                  path + (actions[c],), hist, base + c))
            else:
                if not 0 <= acting < self.n_players:
                    raise GameStructureError(
                        f"acting player {acting} at {path!r} out of range")
                key = game.infoset_key(state)
                if key in self.key_to_index:
                    idx = self.key_to_index[key]
                    if self.infoset_player[idx] != acting:
                        raise GameStructureError(
                            f"information set {key!r} claimed by two "
                            "players")
                    if self.infoset_actions[idx] != tuple(actions):
                        raise GameStructureError(
                            f"information set {key!r} has inconsistent "
                            "action lists")
                    if iset_history[idx] != hist[acting]:
                        raise GameStructureError(
                            f"imperfect recall at information set {key!r}")
                else:
                    idx = len(self.infoset_keys)
                    self.key_to_index[key] = idx
                    self.infoset_keys.append(key)
                    self.infoset_actions.append(tuple(actions))
                    self.infoset_player.append(acting)
                    iset_nodes.append([])
                    iset_history.append(hist[acting])
                iset_nodes[idx].append(node)
                kind.append(DECISION)
                player.append(acting)
                infoset.append(idx)
                chance_prob.extend(0.0 for _ in actions)
                child_node.extend(-1 for _ in actions)
                base = child_start[node]
                for c in reversed(range(len(actions))):
                    new_hist = list(hist)
                    new_hist[acting] = hist[acting] + ((idx, c),)
                    stack.append((game.child(state, actions[c]),
                                  path + (actions[c],), tuple(new_hist),
                                  base + c))

        self.infoset_own_history = iset_history
        self.kind = np.asarray(kind, dtype=np.int64)
        self.player = np.asarray(player, dtype=np.int64)
        self.infoset = np.asarray(infoset, dtype=np.int64)
        self.child_start = np.asarray(child_start, dtype=np.int64)
        self.child_count = np.asarray(child_count, dtype=np.int64)
        self.child_node = np.asarray(child_node, dtype=np.int64)
        self.chance_prob = np.asarray(chance_prob, dtype=float)
        self.terminal_payoff = np.vstack(payoffs) if payoffs else \
            np.zeros((0, self.n_players))
        self.node_path = paths

        self.n_nodes = len(kind)
        self.n_infosets = len(self.infoset_keys)
        self.infoset_player_arr = np.asarray(self.infoset_player,
                                             dtype=np.int64)
        counts = [len(a) for a in self.infoset_actions]
        self.iset_count = np.asarray(counts, dtype=np.int64)
        self.iset_start = np.zeros(self.n_infosets, dtype=np.int64)
        if self.n_infosets:
            np.cumsum(counts[:-1], out=self.iset_start[1:])
        self.total_actions = int(self.iset_count.sum())
        self.iset_node_count = np.asarray([len(ns) for ns in iset_nodes],
                                          dtype=np.int64)
        self.iset_node_start = np.zeros(self.n_infosets, dtype=np.int64)
        if self.n_infosets:
            np.cumsum(self.iset_node_count[:-1],
                      out=self.iset_node_start[1:])
        self.iset_nodes = np.asarray(
            [n for ns in iset_nodes for n in ns], dtype=np.int64)

        terminal_mask = self.kind == TERMINAL
        if terminal_mask.any():
            pay = self.terminal_payoff[terminal_mask]
            self.payoff_range = float(pay.max() - pay.min())
            sums = np.abs(pay.sum(axis=1))
            self.is_zero_sum = bool(sums.max() <= SIMPLEX_TOL)
        else:
            self.payoff_range = 0.0
            self.is_zero_sum = True

    # -- profile conversion -------------------------------------------------

    def profile_to_flat(self, profile: dict[str, np.ndarray],
                        strict: bool = True) -> np.ndarray:
        """Pack a key-indexed profile into the flat per-action table.

        With ``strict`` every infoset of the game must be present and each
        vector must be a simplex element of the right length.
        """
        out = np.empty(self.total_actions)
        for idx, key in enumerate(self.infoset_keys):
            try:
                vec = np.asarray(profile[key], dtype=float)
            except KeyError:
                raise MissingInfosetError(key) from None
            n = self.iset_count[idx]
            if vec.shape != (n,):
                raise GameError(
                    f"strategy at {key!r} has length {vec.shape}, "
                    f"expected {n}")
            if strict and (vec.min() < -SIMPLEX_TOL
                           or abs(vec.sum() - 1.0) > SIMPLEX_TOL):
                raise GameError(
                    f"strategy at {key!r} is not a probability vector: "
                    f"{vec}")
            out[self.iset_start[idx]:self.iset_start[idx] + n] = vec
        return out

    def flat_to_profile(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        return {
            key: flat[self.iset_start[i]:self.iset_start[i] +
                      self.iset_count[i]].copy()
            for i, key in enumerate(self.infoset_keys)
        }

    # -- kernel argument bundles ---------------------------------------

    def tree_args(self) -> tuple:
        """Positional node arrays in the order the kernels expect."""
        return (self.kind, self.player, self.infoset, self.child_start,
                self.child_count, self.child_node, self.chance_prob,
                self.terminal_payoff, self.iset_start)


def as_flat(game) -> FlatGame:
    """Flatten ``game`` (cached on the instance); pass-through for FlatGame."""
    if isinstance(game, FlatGame):
        return game
    cached = getattr(game, "_flat_cache", None)
    if cached is None:
        cached = FlatGame(game)
        try:
            game._flat_cache = cached
        except AttributeError:
            pass
    return cached


def enumerate_infosets(game) -> list[tuple[str, int, tuple[str, ...]]]:
    """All decision information sets as (key, player, actions).

    Order is first visit in depth-first traversal with children expanded in
    declared action order, so it is deterministic for a fixed game.
    """
    flat = as_flat(game)
    return [(key, flat.infoset_player[i], flat.infoset_actions[i])
            for i, key in enumerate(flat.infoset_keys)]


def uniform_profile(game) -> dict[str, np.ndarray]:
    flat = as_flat(game)
    return {
        key: np.full(flat.iset_count[i], 1.0 / flat.iset_count[i])
        for i, key in enumerate(flat.infoset_keys)
    }


def random_profile(game, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Independent uniform draw from each infoset's probability simplex."""
    flat = as_flat(game)
    return {
        key: rng.dirichlet(np.ones(flat.iset_count[i]))
        for i, key in enumerate(flat.infoset_keys)
    }


def validate_profile(game, profile: dict[str, np.ndarray]) -> None:
    """Check simplex validity and exact infoset coverage; raise GameError."""
    flat = as_flat(game)
    flat.profile_to_flat(profile, strict=True)
    extra = set(profile) - set(flat.infoset_keys)
    if extra:
        raise GameError(
            f"profile has entries for unknown information sets: "
            f"{sorted(extra)}")


def expected_value(game, profile: dict[str, np.ndarray]) -> np.ndarray:
    """Exact expected payoff vector under ``profile`` by full traversal."""
    flat = as_flat(game)
    strategy = flat.profile_to_flat(profile)
    values = np.empty((flat.n_nodes, flat.n_players))
    _kernels.values_backward(flat.kind, flat.player, flat.infoset,
                             flat.child_start, flat.child_count,
                             flat.child_node, flat.chance_prob,
                             flat.terminal_payoff, flat.iset_start, strategy,
                             flat.n_players, values)
    return values[0].copy()


def reach_matrix(game, profile: dict[str, np.ndarray]) -> np.ndarray:
    """Raw reach array: one row per node, players' own reach then chance."""
    flat = as_flat(game)
    strategy = flat.profile_to_flat(profile)
    reach = np.empty((flat.n_nodes, flat.n_players + 1))
    _kernels.reach_forward(flat.kind, flat.player, flat.infoset,
                           flat.child_start, flat.child_count,
                           flat.child_node, flat.chance_prob, flat.iset_start,
                           strategy, flat.n_players, reach)
    return reach


def reach_probabilities(
        game, profile: dict[str, np.ndarray]
) -> dict[tuple[str, ...], ReachProbabilities]:
    """Own and external reach for every node, keyed by root action path."""
    flat = as_flat(game)
    reach = reach_matrix(game, profile)
    out: dict[tuple[str, ...], ReachProbabilities] = {}
    for node in range(flat.n_nodes):
        own = reach[node, :flat.n_players]
        chance = reach[node, flat.n_players]
        total = chance * own.prod()
        external = np.empty(flat.n_players)
        for i in range(flat.n_players):
            if own[i] > 0.0:
                external[i] = total / own[i]
            else:
                mask = np.arange(flat.n_players) != i
                external[i] = chance * own[mask].prod()
        out[flat.node_path[node]] = ReachProbabilities(
            own=own.copy(), external=external, chance=float(chance))
    return out
