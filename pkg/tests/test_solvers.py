import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefcfr.game import (as_flat, random_profile, reach_probabilities,
                          uniform_profile)
from prefcfr.games import KuhnPoker
from prefcfr.solvers import (PreferenceConfig, RegretTables, SolverConfig,
                             SolverConfigError, apply_vulnerability,
                             cfr_traverse, checkpoint_schedule,
                             mccfr_external_iteration, next_strategy_pref_br,
                             next_strategy_pref_rm, next_strategy_rm,
                             run_solver)

from conftest import OneShotGame
from oracles import oracle_counterfactual_regret

simplex_vectors = st.integers(2, 5).flatmap(
    lambda n: st.lists(st.floats(-10, 10, allow_nan=False), min_size=n,
                       max_size=n))


class TestNextStrategyRM:
    def test_zero_regrets_uniform(self):
        assert next_strategy_rm(np.zeros(2)) == pytest.approx([0.5, 0.5])

    def test_normalization(self):
        assert next_strategy_rm(np.array([3.0, 1.0])) == \
            pytest.approx([0.75, 0.25])

    def test_negative_clamped(self):
        assert next_strategy_rm(np.array([-2.0, 1.0, 1.0])) == \
            pytest.approx([0.0, 0.5, 0.5])

    @given(vec=simplex_vectors)
    @settings(max_examples=50, deadline=None)
    def test_always_simplex(self, vec):
        out = next_strategy_rm(np.array(vec))
        assert out.min() >= 0.0
        assert out.sum() == pytest.approx(1.0)


class TestNextStrategyPrefRM:
    def test_unit_degrees_reduce_to_rm(self):
        assert next_strategy_pref_rm(np.array([3.0, 1.0]),
                                     np.ones(2)) == \
            pytest.approx([0.75, 0.25])

    def test_weighting(self):
        assert next_strategy_pref_rm(np.array([1.0, 1.0]),
                                     np.array([5.0, 1.0])) == \
            pytest.approx([5 / 6, 1 / 6])

    def test_fallback_branch(self):
        assert next_strategy_pref_rm(np.zeros(2),
                                     np.array([5.0, 2.0])) == \
            pytest.approx([0.8, 0.2])

    def test_fallback_uniform_at_unit_degrees(self):
        assert next_strategy_pref_rm(np.zeros(3), np.ones(3)) == \
            pytest.approx([1 / 3] * 3)

    def test_degrees_below_one_rejected(self):
        with pytest.raises(SolverConfigError):
            next_strategy_pref_rm(np.zeros(2), np.array([0.5, 1.0]))


class TestNextStrategyPrefBR:
    def test_plain_argmax(self):
        assert next_strategy_pref_br(np.array([2.0, 3.0]), np.ones(2)) == \
            pytest.approx([0.0, 1.0])

    def test_weighted_argmax(self):
        assert next_strategy_pref_br(np.array([2.0, 3.0]),
                                     np.array([2.0, 1.0])) == \
            pytest.approx([1.0, 0.0])

    def test_tie_breaks_to_first(self):
        assert next_strategy_pref_br(np.array([2.0, 2.0]), np.ones(2)) == \
            pytest.approx([1.0, 0.0])

    def test_one_hot_when_positive(self):
        out = next_strategy_pref_br(np.array([0.1, -3.0, 0.2]),
                                    np.array([1.0, 9.0, 1.0]))
        assert sorted(out) == [0.0, 0.0, 1.0]

    def test_fallback_when_no_positive(self):
        assert next_strategy_pref_br(np.array([-1.0, -2.0]),
                                     np.array([5.0, 2.0])) == \
            pytest.approx([0.8, 0.2])


class TestApplyVulnerability:
    def test_shift(self):
        shifted = apply_vulnerability(np.array([0.3, 0.1]), 0.05)
        assert shifted == pytest.approx([0.25, 0.05])
        assert int(np.argmax(shifted)) == 0

    def test_shift_below_zero_triggers_fallback_downstream(self):
        shifted = apply_vulnerability(np.array([0.03, 0.01]), 0.05)
        assert (shifted < 0).all()

    def test_zero_shift_is_identity(self):
        vec = np.array([0.3, -0.2])
        assert apply_vulnerability(vec, 0.0) == pytest.approx(vec)

    def test_negative_threshold_rejected(self):
        with pytest.raises(SolverConfigError):
            apply_vulnerability(np.zeros(2), -0.1)


class TestPreferenceConfig:
    def test_delta_below_one_rejected(self):
        with pytest.raises(SolverConfigError):
            PreferenceConfig(delta_exact={("J|", "Bet"): 0.5})

    def test_beta_below_zero_rejected(self):
        with pytest.raises(SolverConfigError):
            PreferenceConfig(beta_default=-1.0)

    def test_wildcard_applies_everywhere(self, small_poker):
        prefs = PreferenceConfig(delta_wildcard={"Raise": 5.0})
        flat = as_flat(small_poker)
        delta, _ = prefs.materialize(flat)
        for k, key in enumerate(flat.infoset_keys):
            for j, action in enumerate(flat.infoset_actions[k]):
                want = 5.0 if action == "Raise" else 1.0
                assert delta[flat.iset_start[k] + j] == want

    def test_exact_overrides_wildcard(self, kuhn):
        prefs = PreferenceConfig(delta_exact={("J|", "Bet"): 3.0},
                                 delta_wildcard={"Bet": 2.0})
        flat = as_flat(kuhn)
        delta, _ = prefs.materialize(flat)
        idx = flat.key_to_index["J|"]
        assert delta[flat.iset_start[idx] + 1] == 3.0
        other = flat.key_to_index["Q|"]
        assert delta[flat.iset_start[other] + 1] == 2.0

    def test_high_delta_warns(self):
        with pytest.warns(UserWarning, match="slow convergence"):
            PreferenceConfig(delta_wildcard={"Bet": 10.0})

    def test_entry_round_trip(self):
        entries = [
            {"infoset": "J|", "action": "Bet", "delta": 5.0},
            {"action": "Raise", "delta": 2.0},
            {"infoset": "Q|", "beta": 0.1},
            {"beta": 0.05},
        ]
        prefs = PreferenceConfig.from_entries(entries)
        again = PreferenceConfig.from_entries(prefs.to_entries())
        assert prefs == again

    def test_unknown_entry_field_rejected(self):
        with pytest.raises(SolverConfigError, match="unknown"):
            PreferenceConfig.from_entries([{"gamma": 2.0}])


class TestCfrTraverse:
    def test_one_decision_game(self):
        game = OneShotGame([[1.0], [0.0]])
        tables = RegretTables(as_flat(game))
        cfr_traverse(game, uniform_profile(game), tables)
        assert tables.regret_profile()["only|"] == \
            pytest.approx([0.5, -0.5])

    def test_best_action_regret_never_negative(self):
        game = OneShotGame([[3.0], [1.0], [2.0]])
        tables = RegretTables(as_flat(game))
        rng = np.random.default_rng(5)
        for _ in range(20):
            cfr_traverse(game, random_profile(game, rng), tables)
            assert tables.regret_profile()["only|"][0] >= 0.0

    def test_kuhn_one_iteration_matches_oracle(self, kuhn):
        profile = uniform_profile(kuhn)
        tables = RegretTables(as_flat(kuhn))
        cfr_traverse(kuhn, profile, tables)
        oracle = oracle_counterfactual_regret(kuhn, profile)
        got = tables.regret_profile()
        assert set(got) == set(oracle)
        for key in oracle:
            assert np.allclose(got[key], oracle[key], atol=1e-10), key

    def test_kuhn_random_profile_matches_oracle(self, kuhn, rng):
        profile = random_profile(kuhn, rng)
        tables = RegretTables(as_flat(kuhn))
        cfr_traverse(kuhn, profile, tables)
        oracle = oracle_counterfactual_regret(kuhn, profile)
        got = tables.regret_profile()
        for key in oracle:
            assert np.allclose(got[key], oracle[key], atol=1e-10), key


class TestStoreAndCompare:
    def test_average_strategy_matches_reach_weighted_mean(self, kuhn):
        config = SolverConfig(algorithm="CFR", iterations=150, seed=3,
                              initial_profile="random", checkpoints=150)
        result = run_solver(kuhn, config, store=True)
        flat = as_flat(kuhn)
        num = {key: np.zeros(len(a)) for key, _, a in
               [(k, p, flat.infoset_actions[i]) for i, (k, p) in
                enumerate(zip(flat.infoset_keys, flat.infoset_player))]}
        den = {key: 0.0 for key in num}
        for strategy in result.stored_profiles:
            profile = flat.flat_to_profile(strategy)
            reach = reach_probabilities(kuhn, profile)
            for i, key in enumerate(flat.infoset_keys):
                player = flat.infoset_player[i]
                own = sum(
                    reach[flat.node_path[n]].own[player]
                    for n in flat.iset_nodes[
                        flat.iset_node_start[i]:
                        flat.iset_node_start[i] + flat.iset_node_count[i]])
                num[key] += own * profile[key]
                den[key] += own
        for key in num:
            want = num[key] / den[key]
            assert np.allclose(result.profile[key], want, atol=1e-10), key

    def test_regret_running_mean_matches_batch_mean(self, kuhn):
        config = SolverConfig(algorithm="CFR", iterations=200, seed=9,
                              initial_profile="random", checkpoints=200)
        result = run_solver(kuhn, config, store=True)
        batch = np.mean(result.stored_regrets, axis=0)
        assert np.allclose(result.tables.regret_avg, batch, atol=1e-10)


class StubRng:
    """Deterministic stand-in: every uniform is 0, so sampling always
    lands on the first positive-probability child."""

    def random(self, n):
        return np.zeros(n)


class TestMccfrExternal:
    def test_stub_sampling_matches_restricted_traversal(self, kuhn):
        profile = uniform_profile(kuhn)
        tables = RegretTables(as_flat(kuhn))
        mccfr_external_iteration(kuhn, profile, tables, traverser=0,
                                 rng=StubRng())
        got = tables.regret_profile()

        # independent restricted walk: chance and player 1 forced to their
        # first action, player 0 expands everything
        def walk(state, collect):
            if kuhn.is_terminal(state):
                return float(kuhn.terminal_payoffs(state)[0])
            actions = kuhn.legal_actions(state)
            actor = kuhn.acting_player(state)
            if actor != 0:
                return walk(kuhn.child(state, actions[0]), collect)
            key = kuhn.infoset_key(state)
            probs = profile[key]
            vals = [walk(kuhn.child(state, a), collect) for a in actions]
            v = float(np.dot(probs, vals))
            vec = collect.setdefault(key, np.zeros(len(actions)))
            vec += np.asarray(vals) - v
            return v

        want = {}
        walk(kuhn.root(), want)
        for key, vec in got.items():
            expected = want.get(key, np.zeros_like(vec))
            assert np.allclose(vec, expected, atol=1e-12), key

    def test_single_decision_equals_full_traversal(self):
        game = OneShotGame([[1.0], [0.0]])
        profile = uniform_profile(game)
        t_full = RegretTables(as_flat(game))
        cfr_traverse(game, profile, t_full)
        t_es = RegretTables(as_flat(game))
        mccfr_external_iteration(game, profile, t_es, traverser=0,
                                 rng=StubRng())
        assert np.allclose(t_full.regret_avg, t_es.regret_avg, atol=1e-12)

    def test_converges_on_kuhn(self, kuhn):
        config = SolverConfig(algorithm="MCCFR_External", iterations=50_000,
                              seed=7, checkpoints=50_000)
        result = run_solver(kuhn, config)
        assert result.trace.points[-1].exploitability < 0.05


class TestRunSolver:
    def test_kuhn_cfr_converges(self, kuhn):
        config = SolverConfig(algorithm="CFR", iterations=10_000, seed=0,
                              initial_profile="random", checkpoints=10_000)
        result = run_solver(kuhn, config)
        assert result.trace.points[-1].exploitability < 0.01
        assert not result.bound_violations

    def test_trivial_pref_reproduces_cfr_per_iteration(self, kuhn):
        base = run_solver(kuhn, SolverConfig(
            algorithm="CFR", iterations=300, seed=11,
            initial_profile="random", checkpoints=300), store=True)
        pref = run_solver(kuhn, SolverConfig(
            algorithm="PrefCFR_RM", iterations=300, seed=11,
            initial_profile="random", checkpoints=300), store=True)
        for a, b in zip(base.stored_profiles, pref.stored_profiles):
            assert np.abs(a - b).max() <= 1e-12

    def test_every_iterate_is_simplex_and_br_is_one_hot(self, kuhn):
        prefs = PreferenceConfig(delta_exact={("J|", "Bet"): 5.0})
        result = run_solver(kuhn, SolverConfig(
            algorithm="PrefCFR_BR", iterations=200, seed=2,
            initial_profile="random", preference=prefs, checkpoints=200),
            store=True)
        flat = as_flat(kuhn)
        delta, _ = prefs.materialize(flat)
        for strategy in result.stored_profiles:
            for k in range(flat.n_infosets):
                row = strategy[flat.iset_start[k]:
                               flat.iset_start[k] + flat.iset_count[k]]
                assert row.min() >= 0.0
                assert row.sum() == pytest.approx(1.0, abs=1e-9)
        # the table kernel must agree with the vector rule at every step:
        # the strategy played at t+1 is the rule applied to the running
        # mean after t iterations, one-hot whenever a regret is positive
        running = np.zeros(flat.total_actions)
        for t, inst in enumerate(result.stored_regrets, start=1):
            running += (inst - running) / t
            if t == len(result.stored_profiles):
                break
            played = result.stored_profiles[t]
            for k in range(flat.n_infosets):
                s, n = flat.iset_start[k], flat.iset_count[k]
                want = next_strategy_pref_br(running[s:s + n],
                                             delta[s:s + n])
                assert np.allclose(played[s:s + n], want, atol=0), \
                    (t, flat.infoset_keys[k])
                if (running[s:s + n] > 0).any():
                    assert sorted(want) == [0.0] * (n - 1) + [1.0]

    def test_uniform_checkpoint_schedule(self):
        points = checkpoint_schedule(10, "all")
        assert points == list(range(1, 11))
        points = checkpoint_schedule(1000, "default")
        assert points[:100] == list(range(1, 101))
        assert points[-1] == 1000
        assert all(b > a for a, b in zip(points, points[1:]))
        points = checkpoint_schedule(100, 30)
        assert points == [30, 60, 90, 100]

    def test_preference_with_plain_cfr_rejected(self):
        with pytest.raises(SolverConfigError, match="ignores preference"):
            SolverConfig(algorithm="CFR", preference=PreferenceConfig(
                delta_wildcard={"Bet": 2.0}))

    def test_per_player_rules(self, kuhn):
        prefs = PreferenceConfig(delta_exact={("J|", "Bet"): 2.0})
        config = SolverConfig(algorithm="PrefCFR_BR", iterations=50, seed=1,
                              preference=prefs, checkpoints=50,
                              player_rules=("PrefCFR_BR", "PrefCFR_RM"))
        result = run_solver(kuhn, config, store=True)
        flat = as_flat(kuhn)
        # player 1 infosets follow the proportional rule: rows can be mixed
        # with several positive entries even after the first iteration
        mixed_seen = False
        for strategy in result.stored_profiles[2:]:
            for k in range(flat.n_infosets):
                if flat.infoset_player[k] == 1:
                    s, n = flat.iset_start[k], flat.iset_count[k]
                    if (strategy[s:s + n] > 1e-9).sum() > 1:
                        mixed_seen = True
        assert mixed_seen
