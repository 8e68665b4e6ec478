import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefcfr.game import (GameError, GameStructureError, MissingInfosetError,
                          as_flat, enumerate_infosets, expected_value,
                          random_profile, reach_probabilities,
                          uniform_profile, validate_profile)
from prefcfr.games import KuhnPoker, MatrixTreeGame, matching_pennies

from conftest import OneShotGame, TerminalOnlyGame
from oracles import oracle_expected_value, oracle_external_reach


class TestEnumerateInfosets:
    def test_kuhn_has_twelve(self, kuhn):
        infosets = enumerate_infosets(kuhn)
        assert len(infosets) == 12
        by_player = {0: 0, 1: 0}
        for _, player, actions in infosets:
            by_player[player] += 1
            assert actions == ("Pass", "Bet")
        assert by_player == {0: 6, 1: 6}

    def test_kuhn_keys_unique_and_expected(self, kuhn):
        keys = {key for key, _, _ in enumerate_infosets(kuhn)}
        assert len(keys) == 12
        expected = {f"{c}|{h}" for c in "JQK" for h in ("", "pb")} | \
            {f"{c}|{h}" for c in "JQK" for h in ("p", "b")}
        assert keys == expected

    def test_single_decision_game(self):
        game = OneShotGame([[1.0], [0.0]])
        infosets = enumerate_infosets(game)
        assert len(infosets) == 1
        assert infosets[0][0] == "only|"

    def test_matching_pennies_tree_two_infosets(self):
        game = MatrixTreeGame(matching_pennies())
        infosets = enumerate_infosets(game)
        assert [key for key, _, _ in infosets] == ["p0|", "p1|"]
        assert [player for _, player, _ in infosets] == [0, 1]

    def test_deterministic_order(self, kuhn):
        first = enumerate_infosets(kuhn)
        second = enumerate_infosets(KuhnPoker())
        assert first == second

    def test_self_loop_rejected(self):
        class Loop(OneShotGame):
            def is_terminal(self, state):
                return False

            def child(self, state, action):
                return ()

        # revisiting the same infoset on a path trips the recall check
        with pytest.raises(GameStructureError):
            as_flat(Loop([[0.0], [0.0]]))

    def test_unbounded_tree_rejected(self):
        from prefcfr.game import FlatGame

        class Endless(OneShotGame):
            def is_terminal(self, state):
                return False

            def infoset_key(self, state):
                return f"d{len(state)}|"

            def child(self, state, action):
                return state + (0,)

        with pytest.raises(GameStructureError, match="exceeded"):
            FlatGame(Endless([[0.0], [0.0]]), max_nodes=500)


class TestExpectedValue:
    def test_kuhn_uniform_matches_enumeration(self, kuhn):
        profile = uniform_profile(kuhn)
        got = expected_value(kuhn, profile)
        want = oracle_expected_value(kuhn, profile)
        assert np.allclose(got, want, atol=1e-12)
        # frozen from the enumeration oracle
        assert got == pytest.approx([0.125, -0.125], abs=1e-12)

    def test_terminal_only_game(self):
        game = TerminalOnlyGame((3.0, -3.0))
        assert expected_value(game, {}) == pytest.approx([3.0, -3.0])

    def test_random_profiles_match_enumeration(self, kuhn, rng):
        for _ in range(5):
            profile = random_profile(kuhn, rng)
            got = expected_value(kuhn, profile)
            want = oracle_expected_value(kuhn, profile)
            assert np.allclose(got, want, atol=1e-12)

    def test_missing_infoset_named(self, kuhn):
        profile = uniform_profile(kuhn)
        del profile["Q|pb"]
        with pytest.raises(MissingInfosetError, match="Q\\|pb"):
            expected_value(kuhn, profile)

    def test_zero_sum_components(self, kuhn, rng):
        for _ in range(3):
            ev = expected_value(kuhn, random_profile(kuhn, rng))
            assert abs(ev.sum()) < 1e-9

    @given(lam=st.floats(0.0, 1.0))
    @settings(max_examples=20, deadline=None)
    def test_multilinearity(self, lam):
        kuhn = KuhnPoker()
        rng = np.random.default_rng(7)
        profile = random_profile(kuhn, rng)
        pure = dict(profile)
        pure["K|"] = np.array([0.0, 1.0])
        mixed = dict(profile)
        mixed["K|"] = (1 - lam) * profile["K|"] + lam * pure["K|"]
        ev_mix = expected_value(kuhn, mixed)
        combo = (1 - lam) * expected_value(kuhn, profile) \
            + lam * expected_value(kuhn, pure)
        assert np.allclose(ev_mix, combo, atol=1e-12)


class TestReachProbabilities:
    def test_root_reach_is_one(self, kuhn):
        reach = reach_probabilities(kuhn, uniform_profile(kuhn))
        root = reach[()]
        assert np.allclose(root.own, 1.0)
        assert np.allclose(root.external, 1.0)
        assert root.chance == 1.0

    def test_post_deal_node(self, kuhn):
        reach = reach_probabilities(kuhn, uniform_profile(kuhn))
        node = reach[("JQ",)]
        assert node.chance == pytest.approx(1.0 / 6.0)
        assert np.allclose(node.own, 1.0)
        assert np.allclose(node.external, 1.0 / 6.0)

    def test_zero_probability_action_zeroes_reach(self, kuhn):
        profile = uniform_profile(kuhn)
        profile["J|"] = np.array([1.0, 0.0])  # never bet with J
        reach = reach_probabilities(kuhn, profile)
        node = reach[("JQ", "Bet")]
        assert node.own[0] == 0.0
        # external reach for player 0 ignores player 0's own zero
        assert node.external[0] == pytest.approx(1.0 / 6.0)
        assert reach[("JQ", "Bet", "Bet")].own[0] == 0.0

    def test_infoset_external_reach_matches_oracle(self, kuhn, rng):
        profile = random_profile(kuhn, rng)
        reach = reach_probabilities(kuhn, profile)
        flat = as_flat(kuhn)
        pairs = oracle_external_reach(
            kuhn, profile,
            lambda s: kuhn.infoset_key(s) == "Q|pb")
        want = sum(ext for _, ext in pairs)
        got = 0.0
        idx = flat.key_to_index["Q|pb"]
        for node in flat.iset_nodes[
                flat.iset_node_start[idx]:
                flat.iset_node_start[idx] + flat.iset_node_count[idx]]:
            got += reach[flat.node_path[node]].external[0]
        assert got == pytest.approx(want, abs=1e-12)


class TestProfileValidation:
    def test_extra_keys_rejected(self, kuhn):
        profile = uniform_profile(kuhn)
        profile["bogus|"] = np.array([0.5, 0.5])
        with pytest.raises(GameError, match="bogus"):
            validate_profile(kuhn, profile)

    def test_non_simplex_rejected(self, kuhn):
        profile = uniform_profile(kuhn)
        profile["J|"] = np.array([0.7, 0.7])
        with pytest.raises(GameError, match="J\\|"):
            validate_profile(kuhn, profile)

    def test_uniform_and_random_are_valid(self, kuhn, rng):
        validate_profile(kuhn, uniform_profile(kuhn))
        validate_profile(kuhn, random_profile(kuhn, rng))


class TestFlatStructure:
    def test_parents_precede_children(self, kuhn):
        flat = as_flat(kuhn)
        for node in range(flat.n_nodes):
            for c in range(flat.child_count[node]):
                assert flat.child_node[flat.child_start[node] + c] > node

    def test_payoff_range(self, kuhn):
        assert as_flat(kuhn).payoff_range == 4.0

    def test_child_slots_all_filled(self, small_poker):
        flat = as_flat(small_poker)
        edges = 0
        for node in range(flat.n_nodes):
            edges += flat.child_count[node]
        assert edges == len(flat.child_node)
        assert (flat.child_node[:edges] >= 0).all()
