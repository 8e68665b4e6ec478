"""Hot numeric kernels shared by the solvers and evaluators.

Every kernel operates on flattened game arrays (see ``game.FlatGame``) and
is written in a style that compiles under ``numba.njit`` while also running
unmodified as plain Python over numpy arrays.  The JIT path is the default;
set ``PREFCFR_NO_NUMBA=1`` to force the pure-Python path (used by
``benchmarks/bench_kernels.py`` and as a fallback when numba is missing).

Node array conventions: nodes are stored in depth-first preorder, so a
parent always precedes its children.  Forward passes iterate ``0..n-1``,
backward passes ``n-1..0``.  ``reach`` rows hold one entry per player plus
a trailing chance entry.
"""

from __future__ import annotations

import os

# Node kinds in FlatGame.kind
DECISION = 0
CHANCE_NODE = 1
TERMINAL = 2

# Next-strategy rules
RULE_RM = 0
RULE_BR = 1


def _numba_requested() -> bool:
    flag = os.environ.get("PREFCFR_NO_NUMBA", "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_requested()


def _maybe_jit(fn):
    if not NUMBA_ENABLED:
        return fn
    from numba import njit

    return njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# strategy rules


@_maybe_jit
def rule_next_strategy(regret_avg, delta, beta, iset_start, iset_count,
                       iset_rule, out):
    """Fill ``out`` with the next per-infoset strategy.

    Per infoset the shifted regret b = regret_avg - beta is formed; its
    positive part drives either proportional matching (RULE_RM, weighted by
    delta) or a one-hot pick at argmax delta*b (RULE_BR, first index wins
    ties).  With no positive component the fallback is (delta-1)
    normalized, or uniform when all delta equal 1.
    """
    n_infosets = iset_start.shape[0]
    for k in range(n_infosets):
        s = iset_start[k]
        n = iset_count[k]
        shift = beta[k]
        pos_sum = 0.0
        weighted_sum = 0.0
        best = 0
        best_val = -1e300
        for j in range(n):
            b = regret_avg[s + j] - shift
            w = delta[s + j] * b
            if w > best_val:
                best_val = w
                best = j
            if b > 0.0:
                pos_sum += b
                weighted_sum += delta[s + j] * b
        if pos_sum > 0.0:
            if iset_rule[k] == 1:
                for j in range(n):
                    out[s + j] = 0.0
                out[s + best] = 1.0
            else:
                for j in range(n):
                    b = regret_avg[s + j] - shift
                    if b > 0.0:
                        out[s + j] = delta[s + j] * b / weighted_sum
                    else:
                        out[s + j] = 0.0
        else:
            excess = 0.0
            for j in range(n):
                excess += delta[s + j] - 1.0
            if excess > 0.0:
                for j in range(n):
                    out[s + j] = (delta[s + j] - 1.0) / excess
            else:
                for j in range(n):
                    out[s + j] = 1.0 / n


# ---------------------------------------------------------------------------
# tree passes


@_maybe_jit
def reach_forward(kind, player, infoset, child_start, child_count, child_node,
                  chance_prob, iset_start, strategy, n_players, reach):
    """Propagate per-player own-reach and chance reach from the root.

    ``reach[node, p]`` is the product of player p's own action probabilities
    on the root path; ``reach[node, n_players]`` is the chance product.
    """
    n_nodes = kind.shape[0]
    for j in range(n_players + 1):
        reach[0, j] = 1.0
    for node in range(n_nodes):
        kd = kind[node]
        if kd == 2:
            continue
        cs = child_start[node]
        cc = child_count[node]
        if kd == 1:
            for c in range(cc):
                ch = child_node[cs + c]
                for j in range(n_players + 1):
                    reach[ch, j] = reach[node, j]
                reach[ch, n_players] *= chance_prob[cs + c]
        else:
            pl = player[node]
            row = iset_start[infoset[node]]
            for c in range(cc):
                ch = child_node[cs + c]
                for j in range(n_players + 1):
                    reach[ch, j] = reach[node, j]
                reach[ch, pl] *= strategy[row + c]


@_maybe_jit
def values_backward(kind, player, infoset, child_start, child_count,
                    child_node, chance_prob, terminal_payoff, iset_start,
                    strategy, n_players, values):
    """Expected payoff vector at every node under the given profile."""
    n_nodes = kind.shape[0]
    for node in range(n_nodes - 1, -1, -1):
        kd = kind[node]
        if kd == 2:
            for j in range(n_players):
                values[node, j] = terminal_payoff[node, j]
            continue
        cs = child_start[node]
        cc = child_count[node]
        for j in range(n_players):
            values[node, j] = 0.0
        if kd == 1:
            for c in range(cc):
                ch = child_node[cs + c]
                p = chance_prob[cs + c]
                for j in range(n_players):
                    values[node, j] += p * values[ch, j]
        else:
            row = iset_start[infoset[node]]
            for c in range(cc):
                ch = child_node[cs + c]
                p = strategy[row + c]
                for j in range(n_players):
                    values[node, j] += p * values[ch, j]


@_maybe_jit
def cfr_iteration(kind, player, infoset, child_start, child_count, child_node,
                  chance_prob, terminal_payoff, iset_start, strategy, t,
                  n_players, regret_avg, strat_num, strat_den, inst, reach,
                  values):
    """One full-tree update: all players' tables refreshed simultaneously.

    Accumulates the externally-weighted action regrets of iteration t into
    ``inst`` and folds them into the running average ``regret_avg`` with
    weight 1/t; average-strategy accumulators gain own-reach-weighted
    strategy mass.  ``inst``, ``reach`` and ``values`` are caller scratch.
    """
    total_actions = regret_avg.shape[0]
    for a in range(total_actions):
        inst[a] = 0.0
    reach_forward(kind, player, infoset, child_start, child_count, child_node,
                  chance_prob, iset_start, strategy, n_players, reach)
    n_nodes = kind.shape[0]
    for node in range(n_nodes - 1, -1, -1):
        kd = kind[node]
        if kd == 2:
            for j in range(n_players):
                values[node, j] = terminal_payoff[node, j]
            continue
        cs = child_start[node]
        cc = child_count[node]
        for j in range(n_players):
            values[node, j] = 0.0
        if kd == 1:
            for c in range(cc):
                ch = child_node[cs + c]
                p = chance_prob[cs + c]
                for j in range(n_players):
                    values[node, j] += p * values[ch, j]
        else:
            iset = infoset[node]
            row = iset_start[iset]
            for c in range(cc):
                ch = child_node[cs + c]
                p = strategy[row + c]
                for j in range(n_players):
                    values[node, j] += p * values[ch, j]
            pl = player[node]
            ext = reach[node, n_players]
            for j in range(n_players):
                if j != pl:
                    ext *= reach[node, j]
            own = reach[node, pl]
            v_own = values[node, pl]
            for c in range(cc):
                ch = child_node[cs + c]
                inst[row + c] += ext * (values[ch, pl] - v_own)
                strat_num[row + c] += own * strategy[row + c]
            strat_den[iset] += own
    inv_t = 1.0 / t
    for a in range(total_actions):
        regret_avg[a] += (inst[a] - regret_avg[a]) * inv_t


@_maybe_jit
def _sample_index(probs, start, count, u):
    """Smallest index whose cumulative probability exceeds u (u in [0,1))."""
    acc = 0.0
    pick = count - 1
    for c in range(count):
        acc += probs[start + c]
        if u < acc:
            pick = c
            break
    return pick


@_maybe_jit
def es_iteration(kind, player, infoset, child_start, child_count, child_node,
                 chance_prob, terminal_payoff, iset_start, strategy,
                 traverser, uniforms, t, regret_avg, strat_num, strat_den,
                 inst, stack, order, chosen_edge, value):
    """External-sampling update for one traverser.

    The traverser expands every action; chance and the other players sample
    one child using consecutive entries of ``uniforms`` (consumed in
    depth-first visit order, at most one per node).  Sampled regrets fold
    into the running average exactly like the full traversal; average
    strategy accumulates at sampled non-traverser infosets with unit
    denominator weight per visit.
    """
    total_actions = regret_avg.shape[0]
    for a in range(total_actions):
        inst[a] = 0.0
    top = 0
    stack[0] = 0
    n_visit = 0
    u_idx = 0
    while top >= 0:
        node = stack[top]
        top -= 1
        order[n_visit] = node
        n_visit += 1
        kd = kind[node]
        if kd == 2:
            continue
        cs = child_start[node]
        cc = child_count[node]
        if kd == 1:
            u = uniforms[u_idx]
            u_idx += 1
            pick = _sample_index(chance_prob, cs, cc, u)
            chosen_edge[node] = cs + pick
            top += 1
            stack[top] = child_node[cs + pick]
        elif player[node] == traverser:
            chosen_edge[node] = -1
            for c in range(cc - 1, -1, -1):
                top += 1
                stack[top] = child_node[cs + c]
        else:
            iset = infoset[node]
            row = iset_start[iset]
            u = uniforms[u_idx]
            u_idx += 1
            pick = _sample_index(strategy, row, cc, u)
            chosen_edge[node] = cs + pick
            for c in range(cc):
                strat_num[row + c] += strategy[row + c]
            strat_den[iset] += 1.0
            top += 1
            stack[top] = child_node[cs + pick]
    for v in range(n_visit - 1, -1, -1):
        node = order[v]
        kd = kind[node]
        if kd == 2:
            value[node] = terminal_payoff[node, traverser]
        elif chosen_edge[node] >= 0:
            value[node] = value[child_node[chosen_edge[node]]]
        else:
            cs = child_start[node]
            cc = child_count[node]
            row = iset_start[infoset[node]]
            v_node = 0.0
            for c in range(cc):
                v_node += strategy[row + c] * value[child_node[cs + c]]
            for c in range(cc):
                inst[row + c] += value[child_node[cs + c]] - v_node
            value[node] = v_node
    inv_t = 1.0 / t
    for a in range(total_actions):
        regret_avg[a] += (inst[a] - regret_avg[a]) * inv_t


@_maybe_jit
def _eval_node(kind, player, infoset, child_start, child_count, child_node,
               chance_prob, terminal_payoff, iset_start, strategy, br_player,
               chosen, value, computed, stack, start):
    """Memoized value of ``start`` for br_player with chosen responses."""
    if computed[start] == 1:
        return value[start]
    top = 0
    stack[0] = start
    while top >= 0:
        node = stack[top]
        if computed[node] == 1:
            top -= 1
            continue
        kd = kind[node]
        if kd == 2:
            value[node] = terminal_payoff[node, br_player]
            computed[node] = 1
            top -= 1
            continue
        cs = child_start[node]
        cc = child_count[node]
        if kd == 0 and player[node] == br_player:
            ch = child_node[cs + chosen[infoset[node]]]
            if computed[ch] == 1:
                value[node] = value[ch]
                computed[node] = 1
                top -= 1
            else:
                top += 1
                stack[top] = ch
            continue
        ready = True
        for c in range(cc):
            if computed[child_node[cs + c]] == 0:
                ready = False
                top += 1
                stack[top] = child_node[cs + c]
        if ready:
            v = 0.0
            if kd == 1:
                for c in range(cc):
                    v += chance_prob[cs + c] * value[child_node[cs + c]]
            else:
                row = iset_start[infoset[node]]
                for c in range(cc):
                    v += strategy[row + c] * value[child_node[cs + c]]
            value[node] = v
            computed[node] = 1
            top -= 1
    return value[start]


@_maybe_jit
def best_response_backward(kind, player, infoset, child_start, child_count,
                           child_node, chance_prob, terminal_payoff,
                           iset_start, iset_player, iset_node_start,
                           iset_node_count, iset_nodes, strategy, ext_reach,
                           br_player, chosen, value, computed, stack):
    """Exact best response for one player against a fixed profile.

    Walks the player's infosets in reverse first-visit order (descendant
    infosets first under perfect recall), scoring each action by the
    external-reach-weighted value of its children with already-chosen
    downstream responses, then evaluates the root.  Ties and unreachable
    infosets resolve to the first declared action.  Returns the root value
    for ``br_player``; chosen action indices land in ``chosen``.
    """
    n_nodes = kind.shape[0]
    for node in range(n_nodes):
        computed[node] = 0
    n_infosets = iset_start.shape[0]
    for k in range(n_infosets - 1, -1, -1):
        if iset_player[k] != br_player:
            continue
        ns = iset_node_start[k]
        nc = iset_node_count[k]
        n_actions = child_count[iset_nodes[ns]]
        best = 0
        best_score = -1e300
        for c in range(n_actions):
            score = 0.0
            for m in range(nc):
                h = iset_nodes[ns + m]
                ch = child_node[child_start[h] + c]
                score += ext_reach[h] * _eval_node(
                    kind, player, infoset, child_start, child_count,
                    child_node, chance_prob, terminal_payoff, iset_start,
                    strategy, br_player, chosen, value, computed, stack, ch)
            if score > best_score:
                best_score = score
                best = c
        chosen[k] = best
    return _eval_node(kind, player, infoset, child_start, child_count,
                      child_node, chance_prob, terminal_payoff, iset_start,
                      strategy, br_player, chosen, value, computed, stack, 0)
