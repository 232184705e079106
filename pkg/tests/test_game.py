import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_instance
from imprex import (CredalSet, FinitaryGamble, ImpreciseTree, PreciseTree, StateSpace, backward_lower,
                    backward_upper, game_lower, game_upper, hedging_check, hitting_variable,
                    is_supermartingale, optimal_supermartingale)
from imprex.core import DepthExceeded, InvalidModel, NotConverged
from imprex.game import CutExtended, Supermartingale
from imprex.limits import ConvergenceControls, constant_sequence

AB = StateSpace("ab")
K2 = CredalSet([(0.4, 0.6), (0.7, 0.3)])
EQ = FinitaryGamble(AB, [[1.0, 0.0], [0.0, 1.0]])


def test_precise_uniform_cylinder():
    P = ImpreciseTree.uniform(AB, CredalSet.precise([0.5, 0.5]))
    assert backward_upper(P, FinitaryGamble.indicator(AB, (0, 0))) == pytest.approx(0.25)


def test_two_vertex_values():
    P = ImpreciseTree.uniform(AB, K2)
    assert backward_upper(P, EQ) == pytest.approx(0.67)
    assert backward_lower(P, EQ) == pytest.approx(0.34)
    assert backward_upper(P, EQ, (0,)) == pytest.approx(0.7)
    assert backward_upper(P, EQ, (0, 1)) == 0.0


def test_witness_table():
    P = ImpreciseTree.uniform(AB, K2)
    M = optimal_supermartingale(P, EQ)
    table = M.table()
    expected = {(): 0.67, (0,): 0.7, (1,): 0.6, (0, 0): 1.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 1.0}
    for t, v in expected.items():
        assert table[t] == pytest.approx(v)
    # tail rule freezes capital past the horizon
    assert M((0, 0, 1, 1)) == pytest.approx(1.0)
    assert is_supermartingale(M, P, depth=4).ok


def test_reduced_root_breaks_the_supermartingale():
    P = ImpreciseTree.uniform(AB, K2)
    table = optimal_supermartingale(P, EQ).table()
    table[()] = 0.57
    rep = is_supermartingale(Supermartingale(AB, table), P, depth=2)
    assert len(rep.violations) == 1
    t, slack = rep.violations[0]
    assert t == () and slack == pytest.approx(-0.1)


def test_zero_capital_cannot_hedge_one():
    M = Supermartingale(AB, {(): 0.0})
    verdict = hedging_check(M, FinitaryGamble.constant(AB, 1.0), (), 2)
    assert not verdict.ok and verdict.exhaustive
    assert verdict.counterexample == (0, 0)


def test_constant_gamble_has_constant_witness():
    P = ImpreciseTree.uniform(AB, K2)
    f = FinitaryGamble.constant(AB, 2.5, horizon=2)
    M = optimal_supermartingale(P, f)
    assert set(M.table().values()) == {2.5}
    assert game_upper(P, f).value == 2.5


def test_explicit_tail_rule():
    M = Supermartingale(AB, {(): 1.0, (0,): 1.0, (1,): 0.5}, tail_rule="explicit")
    assert M((1,)) == 0.5
    with pytest.raises(DepthExceeded):
        M((1, 0))
    with pytest.raises(InvalidModel):
        Supermartingale(AB, {(): 1.0}, tail_rule="sideways")


def test_precise_chain_hitting_time():
    p = PreciseTree.stationary(AB, {None: [0.5, 0.5], 0: [0.5, 0.5], 1: [0.0, 1.0]})
    P = ImpreciseTree.from_precise(p)
    tau = hitting_variable(AB, ["b"], "time")
    res = game_upper(P, tau, (0,))
    assert res.route == "limit" and res.diagnostics["converged"]
    assert res.value == pytest.approx(2.0, abs=1e-6)
    assert game_lower(P, tau, (0,)).value == pytest.approx(2.0, abs=1e-6)


def test_two_vertex_hitting_time():
    P = ImpreciseTree.uniform(AB, K2)
    tau = hitting_variable(AB, ["b"], "time")
    assert game_upper(P, tau).value == pytest.approx(10 / 3, abs=1e-6)
    assert game_lower(P, tau).value == pytest.approx(5 / 3, abs=1e-6)


def test_constant_sequence_goes_through_the_limit_route():
    P = ImpreciseTree.uniform(AB, K2)
    res = game_upper(P, constant_sequence(EQ))
    assert res.route == "limit"
    assert res.value == pytest.approx(0.67)


def test_cut_extension_bounded_case_matches_finitary():
    P = ImpreciseTree.uniform(AB, K2)
    v = CutExtended(AB, [[5.0, -3.0], [0.0, 2.0]])
    res = game_upper(P, v)
    assert res.route == "cut_extension"
    assert res.value == pytest.approx(backward_upper(P, FinitaryGamble(AB, v.values)))


def test_cut_extension_with_infinite_values():
    P = ImpreciseTree.uniform(AB, K2)
    assert game_upper(P, CutExtended(AB, [[math.inf, 0.0], [0.0, 1.0]])).value == math.inf
    assert game_upper(P, CutExtended(AB, [[-math.inf, 0.0], [0.0, 1.0]])).value == -math.inf
    # a vertex that puts no mass on the infinite cell keeps the lower value finite
    Q = ImpreciseTree.uniform(AB, CredalSet([(1.0, 0.0), (0.0, 1.0)]))
    assert game_lower(Q, CutExtended(AB, [math.inf, 2.0])).value == pytest.approx(2.0)


def test_cut_extension_rejects_nan():
    with pytest.raises(InvalidModel):
        CutExtended(AB, [np.nan, 1.0])


def test_divergent_limit_reports_infinity():
    P = ImpreciseTree.uniform(AB, CredalSet.vacuous(2))
    tau = hitting_variable(AB, ["b"], "time")
    res = game_upper(P, tau, (), ConvergenceControls(divergence_threshold=50.0))
    assert res.value == math.inf and res.diagnostics["diverged"]
    with pytest.raises(NotConverged):
        game_upper(P, tau)
    assert game_lower(P, tau).value == pytest.approx(1.0)


def test_not_converged_is_raised_with_trace():
    P = ImpreciseTree.uniform(AB, CredalSet.precise([0.999, 0.001]))
    with pytest.raises(NotConverged) as err:
        game_upper(P, hitting_variable(AB, ["b"], "indicator"), (), ConvergenceControls(max_horizon=20))
    assert len(err.value.result.trace) == 20


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_conjugacy_and_ordering(seed):
    P, f, s = random_instance(np.random.default_rng(seed), max_trees=10**9, max_horizon=4)
    up, lo = backward_upper(P, f, s), backward_lower(P, f, s)
    assert lo == pytest.approx(-backward_upper(P, -f, s))
    assert f.lo - 1e-12 <= lo <= up + 1e-12 <= f.hi + 2e-12
    assert backward_upper(P, 2.0 * f + 1.0, s) == pytest.approx(2.0 * up + 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_witness_is_valid_and_tight(seed):
    P, f, s = random_instance(np.random.default_rng(seed), max_trees=10**9, max_horizon=4)
    M = optimal_supermartingale(P, f, s)
    assert is_supermartingale(M, P, depth=f.horizon).ok
    assert hedging_check(M, f, s, f.horizon).ok
    assert M(s) == pytest.approx(backward_upper(P, f, s), abs=1e-12)
