import numpy as np
import pytest

from prefcfr.game import CHANCE, Game
from prefcfr.games import KuhnPoker, SmallPoker


class OneShotGame(Game):
    """Single decision by one player, terminal payoffs per action."""

    def __init__(self, payoffs, players=1, actor=0, labels=None):
        self.payoffs = [np.asarray(p, dtype=float) for p in payoffs]
        self.player_count = players
        self.actor = actor
        self.labels = labels or [f"a{i}" for i in range(len(payoffs))]

    def root(self):
        return ()

    def is_terminal(self, state):
        return len(state) == 1

    def terminal_payoffs(self, state):
        return self.payoffs[state[0]]

    def acting_player(self, state):
        return self.actor

    def legal_actions(self, state):
        return list(self.labels)

    def chance_distribution(self, state):
        raise NotImplementedError

    def infoset_key(self, state):
        return "only|"

    def child(self, state, action):
        return (self.labels.index(action),)


class TerminalOnlyGame(Game):
    """No decisions at all; the root is terminal."""

    player_count = 2

    def __init__(self, payoffs=(3.0, -3.0)):
        self.payoffs = np.asarray(payoffs, dtype=float)

    def root(self):
        return ()

    def is_terminal(self, state):
        return True

    def terminal_payoffs(self, state):
        return self.payoffs

    def acting_player(self, state):
        raise NotImplementedError

    def legal_actions(self, state):
        raise NotImplementedError

    def chance_distribution(self, state):
        raise NotImplementedError

    def infoset_key(self, state):
        raise NotImplementedError

    def child(self, state, action):
        raise NotImplementedError


@pytest.fixture(scope="session")
def kuhn():
    return KuhnPoker()


@pytest.fixture(scope="session")
def small_poker():
    return SmallPoker()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
