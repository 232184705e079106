import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imprex import (DimensionMismatch, FinitaryGamble, InvalidModel, PathPrefix, SituationTooShort,
                    StateSpace, cut_lower, cut_upper, is_prefix)
from imprex.core import ext_add, sample_paths

AB = StateSpace("ab")
ABC = StateSpace("abc")


def test_state_space_needs_two_distinct_labels():
    with pytest.raises(InvalidModel):
        StateSpace(["a"])
    with pytest.raises(InvalidModel):
        StateSpace(["a", "a"])


def test_parse_and_format_round_trip():
    assert AB.parse("") == ()
    assert AB.parse("□") == ()
    assert AB.parse("-") == ()
    assert AB.parse("abba") == (0, 1, 1, 0)
    assert AB.format((0, 1, 1, 0)) == "abba"
    wide = StateSpace(["up", "down"])
    assert wide.parse("up,down,down") == (0, 1, 1)
    assert wide.format((0, 1)) == "up,down"
    with pytest.raises(InvalidModel):
        AB.parse("abc")


def test_situations_are_lexicographic():
    assert list(AB.situations(2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert list(ABC.situations(2, (2,))) == [(2, 0), (2, 1), (2, 2)]
    assert list(AB.situations(0)) == [()]


def test_is_prefix():
    assert is_prefix((), (0, 1))
    assert is_prefix((0,), (0, 1))
    assert not is_prefix((1,), (0, 1))
    assert not is_prefix((0, 1, 0), (0, 1))


def test_indicator_of_cylinder():
    f = FinitaryGamble.indicator(AB, (0, 1))
    assert f.horizon == 2
    assert f((0, 1)) == 1.0 and f((0, 1, 1, 1)) == 1.0
    assert f((1, 1)) == 0.0
    with pytest.raises(SituationTooShort):
        f((0,))


def test_one_step_gamble_reads_only_the_next_state():
    f = FinitaryGamble.one_step(AB, 2, [3.0, -1.0])
    assert f.horizon == 3
    for t in AB.situations(3):
        assert f(t) == (3.0 if t[2] == 0 else -1.0)


def test_gamble_rejects_bad_shapes_and_values():
    with pytest.raises(DimensionMismatch):
        FinitaryGamble(AB, np.zeros((2, 3)))
    with pytest.raises(InvalidModel):
        FinitaryGamble(AB, np.array([0.0, np.inf]))
    with pytest.raises(InvalidModel):
        FinitaryGamble(AB, np.array([0.0, 2.0]), bounds=(0.0, 1.0))


def test_values_are_read_only():
    f = FinitaryGamble(AB, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_cuts():
    f = FinitaryGamble(AB, np.array([[-3.0, 0.5], [2.0, 7.0]]))
    assert cut_upper(f, 1.0).values.tolist() == [[-3.0, 0.5], [1.0, 1.0]]
    assert cut_lower(f, 0.0).values.tolist() == [[0.0, 0.5], [2.0, 7.0]]
    assert cut_upper(f, 1.0).hi == 1.0
    assert cut_lower(f, 0.0).lo == 0.0


def test_extended_addition():
    assert ext_add(math.inf, 1.0) == math.inf
    with pytest.raises(ArithmeticError):
        ext_add(math.inf, -math.inf)


def test_path_prefix_extension_is_seeded():
    p = PathPrefix((0, 1), seed=3)
    a, b = p.extend(ABC, 8), p.extend(ABC, 8)
    assert a == b and a[:2] == (0, 1) and len(a) == 8
    assert p.extend(AB, 5, weights=lambda t: [0.0, 1.0])[2:] == (1, 1, 1)
    paths = sample_paths(AB, (1,), 4, 10, seed=1)
    assert len(paths) == 10 and all(t[0] == 1 and len(t) == 4 for t in paths)


grids = st.integers(0, 3).flatmap(
    lambda n: arrays(np.float64, (2,) * n, elements=st.floats(-10, 10, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(grids, st.integers(0, 3))
def test_lift_preserves_values(vals, extra):
    f = FinitaryGamble(AB, vals)
    g = f.lift(f.horizon + extra)
    for t in AB.situations(g.horizon):
        assert g(t) == f(t)
    assert (g.lo, g.hi) == (f.lo, f.hi)


@settings(max_examples=60, deadline=None)
@given(grids, grids)
def test_arithmetic_is_pointwise(a, b):
    f, g = FinitaryGamble(AB, a), FinitaryGamble(AB, b)
    m = max(f.horizon, g.horizon)
    for t in AB.situations(m):
        assert (f + g)(t) == pytest.approx(f(t) + g(t))
        assert (f - g)(t) == pytest.approx(f(t) - g(t))
        assert (2.5 * f)(t) == pytest.approx(2.5 * f(t))
    assert f.leq(f + abs(g.values).sum())


@settings(max_examples=40, deadline=None)
@given(grids, st.lists(st.integers(0, 1), max_size=4))
def test_times_indicator_vanishes_off_cylinder(vals, s):
    f = FinitaryGamble(AB, vals)
    s = tuple(s)
    g = f.times_indicator(s)
    for t in AB.situations(g.horizon):
        expected = f(t) if is_prefix(s, t) else 0.0
        assert g(t) == expected
