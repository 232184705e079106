import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imprex import CredalSet, InvalidModel, MassFunction, check_coherence, is_dominated
from imprex import lower_envelope, upper_envelope
from imprex.core import DimensionMismatch
from imprex.local import default_test_gambles

K2 = CredalSet([(0.4, 0.6), (0.7, 0.3)])


def test_mass_function_validation():
    MassFunction([0.25, 0.75])
    with pytest.raises(InvalidModel):
        MassFunction([0.5, 0.6])
    with pytest.raises(InvalidModel):
        MassFunction([1.2, -0.2])
    # within the simplex tolerance
    MassFunction([0.5, 0.5 + 5e-13])


def test_credal_set_deduplicates_vertices():
    K = CredalSet([(0.4, 0.6), (0.4, 0.6), (0.7, 0.3)])
    assert K.n_vertices == 2
    assert not K.is_precise
    assert CredalSet.precise([0.2, 0.8]).is_precise


def test_credal_set_needs_a_vertex():
    with pytest.raises(InvalidModel):
        CredalSet([])


def test_envelopes_on_two_vertices():
    assert upper_envelope(K2, [1.0, 2.0]) == pytest.approx(1.6)
    assert lower_envelope(K2, [1.0, 2.0]) == pytest.approx(1.3)
    assert K2.upper([1.0, 0.0]) == pytest.approx(0.7)


def test_envelope_of_constant_is_constant():
    for K in (K2, CredalSet.vacuous(3), CredalSet.linear_vacuous([0.2, 0.3, 0.5], 0.1)):
        assert upper_envelope(K, np.full(K.dim, 4.5)) == pytest.approx(4.5)
        assert lower_envelope(K, np.full(K.dim, -1.0)) == pytest.approx(-1.0)


def test_precise_envelope_is_expectation():
    p = [0.1, 0.6, 0.3]
    f = np.array([3.0, -1.0, 2.0])
    K = CredalSet.precise(p)
    assert upper_envelope(K, f) == pytest.approx(float(np.dot(f, p)))
    assert lower_envelope(K, f) == pytest.approx(float(np.dot(f, p)))


def test_vacuous_envelope_is_max():
    f = np.array([3.0, -1.0, 2.0])
    assert upper_envelope(CredalSet.vacuous(3), f) == 3.0
    assert lower_envelope(CredalSet.vacuous(3), f) == -1.0


def test_linear_vacuous_vertices():
    K = CredalSet.linear_vacuous([0.3, 0.5, 0.2], 0.2)
    expected = {(0.44, 0.4, 0.16), (0.24, 0.6, 0.16), (0.24, 0.4, 0.36)}
    assert {tuple(np.round(v, 12)) for v in K.vertices} == expected


def test_envelope_dimension_check():
    with pytest.raises(DimensionMismatch):
        upper_envelope(K2, [1.0, 2.0, 3.0])


def test_corrupted_evaluator_fails_c1():
    rep = check_coherence(lambda f: float(np.max(f)) + 1.0, [np.array([0.0, 1.0])], [1.0])
    assert not rep.ok
    assert rep.violations[0][0] == "C1"


def test_zero_scalar_homogeneity():
    rep = check_coherence(K2, [np.array([1.0, -2.0])], [0.0])
    assert rep.ok and rep.cases == 3


def test_domination_examples():
    assert is_dominated([0.4, 0.6], K2)
    assert is_dominated([0.55, 0.45], K2)
    res = is_dominated([0.9, 0.1], K2)
    assert not res
    assert res.witness @ np.array([0.9, 0.1]) > upper_envelope(K2, res.witness)
    assert np.allclose(res.witness, [1.0, 0.0])


def test_domination_in_three_states():
    K = CredalSet.linear_vacuous([0.3, 0.5, 0.2], 0.2)
    assert is_dominated(0.8 * np.array([0.3, 0.5, 0.2]) + 0.2 * np.array([1 / 3] * 3), K)
    assert not is_dominated([0.5, 0.3, 0.2], K)


@st.composite
def credal_sets(draw, d=None):
    d = d or draw(st.integers(2, 4))
    k = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**31))
    return CredalSet(np.random.default_rng(seed).dirichlet(np.ones(d), size=k))


def gambles_for(d):
    return st.lists(st.floats(-5, 5, allow_nan=False), min_size=d, max_size=d).map(np.array)


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_envelopes_are_coherent(data):
    K = data.draw(credal_sets())
    fs = [data.draw(gambles_for(K.dim)) for _ in range(4)]
    lams = data.draw(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=3))
    assert check_coherence(K, fs, lams).ok


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_lower_is_conjugate_and_below_upper(data):
    K = data.draw(credal_sets())
    f = data.draw(gambles_for(K.dim))
    assert lower_envelope(K, f) == pytest.approx(-upper_envelope(K, -f))
    assert lower_envelope(K, f) <= upper_envelope(K, f) + 1e-12
    assert f.min() - 1e-12 <= lower_envelope(K, f)
    assert upper_envelope(K, f) <= f.max() + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_convex_combinations_are_dominated(data):
    K = data.draw(credal_sets(d=data.draw(st.integers(2, 3))))
    w = np.random.default_rng(data.draw(st.integers(0, 2**31))).dirichlet(np.ones(K.n_vertices))
    assert is_dominated(w @ K.vertices, K)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_domination_witnesses_are_real(data):
    d = data.draw(st.integers(2, 3))
    K = data.draw(credal_sets(d=d))
    p = np.random.default_rng(data.draw(st.integers(0, 2**31))).dirichlet(np.ones(d))
    res = is_dominated(p, K)
    if not res:
        assert res.witness @ p > upper_envelope(K, res.witness)
    else:
        # every separating direction we know agrees
        for f in default_test_gambles(K):
            assert f @ p <= upper_envelope(K, f) + 1e-9
