import numpy as np
import pytest

from prefcfr.evaluation import exploitability
from prefcfr.game import CHANCE, as_flat, enumerate_infosets
from prefcfr.games import (KuhnPoker, build_game, kuhn_equilibrium_family,
                           kuhn_player2_equilibrium)

from oracles import oracle_exploitability


def kuhn_terminal(game, deal, history):
    state = ((deal[0], deal[1]), history)
    assert game.is_terminal(state)
    return game.terminal_payoffs(state)


class TestKuhnRules:
    # every deal and action path, payoffs written out by hand:
    # pp high card wins 1; bp bettor wins 1; bb high card wins 2;
    # pbp second bettor wins 1; pbb high card wins 2
    DEALS = [("J", "Q"), ("J", "K"), ("Q", "J"), ("Q", "K"), ("K", "J"),
             ("K", "Q")]

    @pytest.mark.parametrize("deal", DEALS)
    def test_all_paths(self, kuhn, deal):
        hi = 1.0 if "JQK".index(deal[0]) > "JQK".index(deal[1]) else -1.0
        expect = {
            "pp": hi,
            "bp": 1.0,
            "bb": 2.0 * hi,
            "pbp": -1.0,
            "pbb": 2.0 * hi,
        }
        for history, p1_payoff in expect.items():
            payoff = kuhn_terminal(kuhn, deal, history)
            assert payoff[0] == pytest.approx(p1_payoff)
            assert payoff.sum() == pytest.approx(0.0)

    def test_zero_sum_at_every_terminal(self, kuhn):
        flat = as_flat(kuhn)
        terminals = flat.kind == 2
        assert np.abs(flat.terminal_payoff[terminals].sum(axis=1)).max() \
            < 1e-12

    def test_six_equally_likely_deals(self, kuhn):
        root = kuhn.root()
        assert kuhn.acting_player(root) == CHANCE
        deals = kuhn.legal_actions(root)
        assert len(deals) == 6
        assert np.allclose(kuhn.chance_distribution(root), 1.0 / 6.0)

    def test_payoff_interval(self, kuhn):
        assert as_flat(kuhn).payoff_range == 4.0


class TestKuhnEquilibriumFamily:
    def test_alpha_endpoints(self):
        lo = kuhn_equilibrium_family(0.0)
        assert lo["J|"][1] == 0.0  # always pass with J
        hi = kuhn_equilibrium_family(1.0 / 3.0)
        assert hi["J|"][1] == pytest.approx(1.0 / 3.0)

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            kuhn_equilibrium_family(-0.01)
        with pytest.raises(ValueError):
            kuhn_equilibrium_family(0.34)

    @pytest.mark.parametrize("alpha", [0.0, 0.1, 0.2, 1.0 / 3.0])
    def test_family_is_equilibrium(self, kuhn, alpha):
        profile = {**kuhn_equilibrium_family(alpha),
                   **kuhn_player2_equilibrium()}
        report = exploitability(kuhn, profile)
        assert abs(report.aggregate) < 1e-6

    def test_family_zero_exploitability_by_enumeration(self, kuhn):
        profile = {**kuhn_equilibrium_family(0.25),
                   **kuhn_player2_equilibrium()}
        aggregate, gains = oracle_exploitability(kuhn, profile)
        assert abs(aggregate) < 1e-9
        assert max(abs(g) for g in gains) < 1e-9


class TestSmallPoker:
    def test_desk_scale(self, small_poker):
        flat = as_flat(small_poker)
        assert flat.n_nodes < 10 ** 5
        assert flat.is_zero_sum

    def test_perfect_recall_infosets(self, small_poker):
        # every state of an infoset shares the actor's observation history,
        # which the flattener checks; run it and spot-check the key format
        flat = as_flat(small_poker)
        assert all("|" in key for key in flat.infoset_keys)
        assert "J-|" in flat.key_to_index
        assert flat.iset_node_count[flat.key_to_index["J-|"]] == 10

    def test_pair_beats_high_card(self, small_poker):
        state = (("Ja", "Kb"), "Jb", "cc/cc")
        payoff = small_poker.terminal_payoffs(state)
        assert payoff[0] > 0

    def test_split_pot(self, small_poker):
        state = (("Qa", "Qb"), "Ja", "cc/cc")
        assert small_poker.terminal_payoffs(state) == pytest.approx([0, 0])

    def test_fold_pays_invested(self, small_poker):
        # P1 raises 6, P2 folds: P2 loses only the ante
        state = (("Ja", "Kb"), None, "rf")
        assert small_poker.terminal_payoffs(state) == pytest.approx([2, -2])
        # round-2 fold after a called round-1 raise
        state = (("Ja", "Kb"), "Qa", "rc/rf")
        assert small_poker.terminal_payoffs(state) == pytest.approx([8, -8])

    def test_raise_cap(self, small_poker):
        state = (("Ja", "Kb"), None, "rr")
        assert small_poker.legal_actions(state) == ["Fold", "Call"]


class TestBuildGame:
    def test_kuhn(self):
        assert len(enumerate_infosets(build_game("kuhn"))) == 12

    def test_rps_tree(self):
        game = build_game("rps")
        infosets = enumerate_infosets(game)
        assert len(infosets) == 2
        assert infosets[0][2] == ("Rock", "Paper", "Scissors")

    def test_coordination_pure_equilibria(self):
        game = build_game("coordination")
        for pick in (0, 1):
            vec = np.zeros(2)
            vec[pick] = 1.0
            profile = {"p0|": vec, "p1|": vec}
            report = exploitability(game, profile)
            assert abs(report.aggregate) < 1e-12
        # off-diagonal pure profiles are not equilibria
        profile = {"p0|": np.array([1.0, 0.0]), "p1|": np.array([0.0, 1.0])}
        assert exploitability(game, profile).aggregate > 0.4

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown game"):
            build_game("holdem")

    def test_bad_params(self):
        with pytest.raises(TypeError):
            build_game("kuhn", decks=2)
