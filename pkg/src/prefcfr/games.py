"""Concrete game definitions: Kuhn poker, a raise-limited two-round poker,
and small matrix games (exposed both as tensors and as one-round trees).
"""

from __future__ import annotations

import numpy as np

from .game import CHANCE, Game
from .normal_form import MatrixGame

KUHN_CARDS = ("J", "Q", "K")
KUHN_RANK = {"J": 0, "Q": 1, "K": 2}
PASS, BET = "Pass", "Bet"

#: Index of Bet in the declared Kuhn action order (Pass, Bet).
KUHN_BET_INDEX = 1


class KuhnPoker(Game):
    """Three-card poker: ante 1, one bet of 1, showdown K > Q > J.

    States are (cards, history) where cards is None before the deal or an
    ordered pair of card letters, and history is a string over {p, b}.
    Information set keys read "<own card>|<history>", e.g. "J|" and "Q|pb".
    """

    player_count = 2

    def root(self):
        return (None, "")

    def is_terminal(self, state) -> bool:
        _, h = state
        return h in ("pp", "bp", "bb", "pbp", "pbb")

    def terminal_payoffs(self, state):
        cards, h = state
        if h.endswith("p") and "b" in h:
            # fold: the player who just passed facing a bet loses 1
            folder = (len(h) - 1) % 2
            v = 1.0 if folder == 1 else -1.0
            return np.array([v, -v])
        stake = 2.0 if h.endswith("bb") or h == "pbb" else 1.0
        v = stake if KUHN_RANK[cards[0]] > KUHN_RANK[cards[1]] else -stake
        return np.array([v, -v])

    def acting_player(self, state) -> int:
        cards, h = state
        if cards is None:
            return CHANCE
        return len(h) % 2

    def legal_actions(self, state):
        cards, _ = state
        if cards is None:
            return [a + b for a in KUHN_CARDS for b in KUHN_CARDS if a != b]
        return [PASS, BET]

    def chance_distribution(self, state):
        return np.full(6, 1.0 / 6.0)

    def infoset_key(self, state) -> str:
        cards, h = state
        return f"{cards[len(h) % 2]}|{h}"

    def child(self, state, action):
        cards, h = state
        if cards is None:
            return ((action[0], action[1]), "")
        return (cards, h + ("p" if action == PASS else "b"))


def kuhn_equilibrium_family(alpha: float) -> dict[str, np.ndarray]:
    """Player 1's one-parameter equilibrium family for Kuhn poker.

    ``alpha`` is the betting probability with J at the first decision and
    must lie in [0, 1/3].  The other entries follow from the indifference
    conditions of the game: bet 3*alpha with K, never bet Q, call with Q
    after pass-bet with probability alpha + 1/3, always fold J and call K
    facing a bet.  Joint with :func:`kuhn_player2_equilibrium` the profile
    has zero exploitability (checked by the test-suite oracle, not assumed).
    """
    if not 0.0 <= alpha <= 1.0 / 3.0 + 1e-12:
        raise ValueError(f"alpha must lie in [0, 1/3], got {alpha}")
    return {
        "J|": np.array([1.0 - alpha, alpha]),
        "Q|": np.array([1.0, 0.0]),
        "K|": np.array([1.0 - 3.0 * alpha, 3.0 * alpha]),
        "J|pb": np.array([1.0, 0.0]),
        "Q|pb": np.array([2.0 / 3.0 - alpha, alpha + 1.0 / 3.0]),
        "K|pb": np.array([0.0, 1.0]),
    }


def kuhn_player2_equilibrium() -> dict[str, np.ndarray]:
    """Player 2's unique Kuhn equilibrium strategy.

    After a check: bluff-bet J one third of the time, check Q, always bet
    K.  Facing a bet: fold J, call Q one third of the time, always call K.
    """
    return {
        "J|p": np.array([2.0 / 3.0, 1.0 / 3.0]),
        "Q|p": np.array([1.0, 0.0]),
        "K|p": np.array([0.0, 1.0]),
        "J|b": np.array([1.0, 0.0]),
        "Q|b": np.array([2.0 / 3.0, 1.0 / 3.0]),
        "K|b": np.array([0.0, 1.0]),
    }


FOLD, CALL, RAISE = "Fold", "Call", "Raise"


class SmallPoker(Game):
    """Raise-limited two-round poker over a six-card deck (three ranks,
    two suits each).

    Both players ante and receive one private card; a betting round
    follows, then one public card is revealed and a second round is played.
    A raise adds ``bet_sizes[round]`` on top of a call, capped at
    ``raise_cap`` raises per round.  Showdown: pairing the public card wins,
    otherwise the higher rank; equal ranks split.  Suits never matter, so
    information set keys carry ranks only:
    "<own rank><public rank or ->|<round1 actions>/<round2 actions>".

    The default sizing (ante 2, raises 6 then 12) keeps the equilibrium
    opening-raise frequency low enough that preference steering has room to
    push it up by a large factor.

    States are (holes, public, history) with cards like "Qa"; history is a
    string over {c, r, f} with "/" separating rounds.
    """

    player_count = 2

    def __init__(self, ranks=("J", "Q", "K"), ante=2, bet_sizes=(6, 12),
                 raise_cap=2):
        self.ranks = tuple(ranks)
        self.rank_order = {r: i for i, r in enumerate(self.ranks)}
        self.deck = tuple(r + s for r in self.ranks for s in ("a", "b"))
        self.ante = ante
        self.bet_sizes = tuple(bet_sizes)
        self.raise_cap = raise_cap

    def root(self):
        return (None, None, "")

    def _segments(self, history):
        return history.split("/") if "/" in history else [history]

    def _round_over(self, seg):
        return len(seg) >= 2 and seg.endswith("c")

    def is_terminal(self, state) -> bool:
        _, public, history = state
        if history.endswith("f"):
            return True
        segs = self._segments(history)
        return public is not None and len(segs) == 2 and \
            self._round_over(segs[1])

    def _invested(self, history):
        invested = [float(self.ante)] * 2
        for rnd, seg in enumerate(self._segments(history)):
            bet = [0.0, 0.0]
            for turn, a in enumerate(seg):
                p = turn % 2
                if a == "c":
                    bet[p] = bet[1 - p]
                elif a == "r":
                    bet[p] = bet[1 - p] + self.bet_sizes[rnd]
                else:  # fold leaves the shortfall unmatched
                    break
            invested[0] += bet[0]
            invested[1] += bet[1]
        return invested

    def terminal_payoffs(self, state):
        holes, public, history = state
        invested = self._invested(history)
        if history.endswith("f"):
            seg = self._segments(history)[-1]
            folder = (len(seg) - 1) % 2
            win = invested[folder]
            return np.array([win, -win]) if folder == 1 else \
                np.array([-win, win])
        strength = []
        for hole in holes:
            rank = hole[0]
            paired = public is not None and rank == public[0]
            strength.append((1 if paired else 0, self.rank_order[rank]))
        if strength[0] > strength[1]:
            return np.array([invested[1], -invested[1]])
        if strength[1] > strength[0]:
            return np.array([-invested[0], invested[0]])
        return np.array([0.0, 0.0])

    def _needs_public(self, state):
        _, public, history = state
        segs = self._segments(history)
        return public is None and self._round_over(segs[0])

    def acting_player(self, state) -> int:
        holes, _, history = state
        if holes is None or self._needs_public(state):
            return CHANCE
        seg = self._segments(history)[-1]
        return len(seg) % 2

    def legal_actions(self, state):
        holes, _, history = state
        if holes is None:
            return [f"{a},{b}" for a in self.deck for b in self.deck
                    if a != b]
        if self._needs_public(state):
            return [c for c in self.deck if c not in holes]
        seg = self._segments(history)[-1]
        if seg.endswith("r"):
            if seg.count("r") < self.raise_cap:
                return [FOLD, CALL, RAISE]
            return [FOLD, CALL]
        return [CALL, RAISE]

    def chance_distribution(self, state):
        n = len(self.legal_actions(state))
        return np.full(n, 1.0 / n)

    def infoset_key(self, state) -> str:
        holes, public, history = state
        seg = self._segments(history)[-1]
        p = len(seg) % 2
        pub = public[0] if public is not None else "-"
        return f"{holes[p][0]}{pub}|{history}"

    def child(self, state, action):
        holes, public, history = state
        if holes is None:
            a, b = action.split(",")
            return ((a, b), None, "")
        if self._needs_public(state):
            return (holes, action, history + "/")
        code = {FOLD: "f", CALL: "c", RAISE: "r"}[action]
        return (holes, public, history + code)


def matching_pennies() -> MatrixGame:
    u0 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return MatrixGame(payoffs=np.stack([u0, -u0]),
                      action_labels=(("Heads", "Tails"), ("Heads", "Tails")))


def rock_paper_scissors() -> MatrixGame:
    u0 = np.array([[0.0, -1.0, 1.0],
                   [1.0, 0.0, -1.0],
                   [-1.0, 1.0, 0.0]])
    labels = ("Rock", "Paper", "Scissors")
    return MatrixGame(payoffs=np.stack([u0, -u0]),
                      action_labels=(labels, labels))


def coordination_game() -> MatrixGame:
    """Two pure equilibria on the diagonal plus one mixed equilibrium."""
    u = np.array([[1.0, 0.0], [0.0, 2.0]])
    return MatrixGame(payoffs=np.stack([u, u]),
                      action_labels=(("A", "B"), ("A", "B")))


MATRIX_BUILDERS = {
    "matching_pennies": matching_pennies,
    "rps": rock_paper_scissors,
    "coordination": coordination_game,
}


class MatrixTreeGame(Game):
    """A matrix game as a two-level tree: player 1 moves hidden, then
    player 2.  Player 2's single information set spans all of player 1's
    choices.  Keys are "p0|" and "p1|".
    """

    player_count = 2

    def __init__(self, matrix: MatrixGame):
        if matrix.n_players != 2:
            raise ValueError("tree wrapper supports two-player matrices")
        self.matrix = matrix

    def root(self):
        return ()

    def is_terminal(self, state) -> bool:
        return len(state) == 2

    def terminal_payoffs(self, state):
        return self.matrix.payoffs[(slice(None),) + state]

    def acting_player(self, state) -> int:
        return len(state)

    def legal_actions(self, state):
        return list(self.matrix.action_labels[len(state)])

    def chance_distribution(self, state):
        raise NotImplementedError("matrix trees have no chance nodes")

    def infoset_key(self, state) -> str:
        return f"p{len(state)}|"

    def child(self, state, action):
        return state + (self.matrix.action_labels[len(state)].index(action),)


GAME_NAMES = ("kuhn", "small_poker", "matching_pennies", "rps",
              "coordination")


def build_game(name: str, **params) -> Game:
    """Construct and structurally validate a named game."""
    from .game import as_flat

    if name == "kuhn":
        game = KuhnPoker(**params)
    elif name == "small_poker":
        game = SmallPoker(**params)
    elif name in MATRIX_BUILDERS:
        game = MatrixTreeGame(MATRIX_BUILDERS[name](**params))
    else:
        raise ValueError(
            f"unknown game {name!r}; expected one of {GAME_NAMES}")
    as_flat(game)  # flattening runs all structural checks
    return game
