import json

import numpy as np
import pytest

from imprex import FinitaryGamble, ImpreciseTree, InvalidModel, StateSpace, optimal_supermartingale
from imprex.corpus import corpus_variables, load_corpus_tree, tree_names, variable_names
from imprex.formats import (dump, load_supermartingale, load_tree, load_variable, supermartingale_document,
                            tree_document)

AB = StateSpace("ab")


def doc(**overrides):
    base = {"states": ["a", "b"], "kind": "imprecise", "rule": "uniform",
            "credal_sets": {"K": [[0.4, 0.6], [0.7, 0.3]]}, "assignments": {"*": "K"}}
    base.update(overrides)
    return base


def test_uniform_tree_round_trip():
    T = load_tree(doc())
    assert isinstance(T, ImpreciseTree) and T.rule == "uniform"
    assert T.local_model_at((0, 1)).n_vertices == 2
    assert load_tree(tree_document(T)).local_model_at(()).vertices.tolist() == [[0.4, 0.6], [0.7, 0.3]]


@pytest.mark.parametrize("name", tree_names())
def test_corpus_trees_round_trip(name):
    T = load_corpus_tree(name)
    again = load_tree(json.loads(dump(tree_document(T))))
    for length in range(3):
        for t in T.space.situations(length):
            a, b = T.local_model_at(t), again.local_model_at(t)
            assert np.array_equal(getattr(a, "vertices", getattr(a, "probs", None)),
                                  getattr(b, "vertices", getattr(b, "probs", None)))


def test_explicit_tree_document():
    d = doc(rule="explicit", depth=2, credal_sets={"K": [[0.5, 0.5]], "L": [[0.1, 0.9], [0.2, 0.8]]},
            assignments={"□": "K", "a": "L", "b": "K"})
    T = load_tree(d)
    assert T.depth == 2 and T.local_model_at((0,)).n_vertices == 2
    assert tree_document(T)["assignments"] == {"□": "K0", "a": "K1", "b": "K0"}


def test_file_loading(tmp_path):
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(doc()))
    assert load_tree(str(path)).space.labels == ("a", "b")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidModel):
        load_tree(tmp_path / "bad.json")


@pytest.mark.parametrize("bad", [
    doc(credal_sets={"K": [[0.5, 0.6]]}),
    doc(credal_sets={"K": [[1.2, -0.2]]}),
    doc(credal_sets={"K": [[0.5, 0.5, 0.0]]}),
    doc(credal_sets={"K": []}),
    doc(assignments={"*": "missing"}),
    doc(assignments={}),
    doc(kind="fuzzy"),
    doc(rule="random"),
    doc(kind="precise"),
    doc(rule="stationary", assignments={"□": "K", "a": "K"}),
    doc(rule="explicit", depth=2, assignments={"□": "K", "a": "K"}),
    {"states": ["a", "b"], "kind": "imprecise"},
])
def test_invalid_tree_documents(bad):
    with pytest.raises(InvalidModel):
        load_tree(bad)


def test_simplex_tolerance():
    load_tree(doc(credal_sets={"K": [[0.5, 0.5 + 5e-13]]}))
    with pytest.raises(InvalidModel):
        load_tree(doc(credal_sets={"K": [[0.5, 0.5 + 1e-9]]}))


def test_variable_documents():
    f = load_variable({"kind": "finitary_table", "values": [[1, 0], [0, 1]]}, AB)
    assert isinstance(f, FinitaryGamble) and f((0, 0)) == 1.0
    g = load_variable({"kind": "finitary_table", "table": {"aa": 1, "ab": 2, "ba": 3, "bb": 4}}, AB)
    assert g((1, 0)) == 3.0
    with pytest.raises(InvalidModel):
        load_variable({"kind": "finitary_table", "table": {"aa": 1, "ab": 2}}, AB)
    with pytest.raises(InvalidModel):
        load_variable({"kind": "finitary_table", "table": {"a": 1, "ab": 2}}, AB)
    with pytest.raises(InvalidModel):
        load_variable({"kind": "mystery"}, AB)
    with pytest.raises(InvalidModel):
        load_variable({"kind": "hitting_time"}, AB)
    tau = load_variable({"kind": "hitting_time", "targets": ["b"], "cap": 3}, AB)
    assert tau.at(5)((0, 0, 0, 0, 0)) == 3.0
    avg = load_variable({"kind": "truncated_average", "targets": ["a"], "window": 2}, AB)
    assert avg.at(2)((0, 1)) == 0.5


def test_corpus_variables_load():
    names = set(variable_names())
    assert {"reach_b", "hit_time_b", "table_ab"} <= names
    assert set(corpus_variables(AB)) < names


def test_supermartingale_round_trip(tmp_path):
    P = load_corpus_tree("binary_two_vertex")
    M = optimal_supermartingale(P, FinitaryGamble(AB, [[1.0, 0.0], [0.0, 1.0]]))
    d = supermartingale_document(M)
    assert d["values"][0] == ["□", pytest.approx(0.67)]
    path = tmp_path / "M.json"
    dump(d, path)
    N = load_supermartingale(str(path))
    assert N.table() == pytest.approx(M.table())
    assert N.lower_bound == pytest.approx(M.lower_bound)
    assert N((0, 0, 1)) == pytest.approx(1.0)


def test_invalid_supermartingale_documents():
    base = {"states": ["a", "b"], "tail_rule": "constant_after_depth", "lower_bound": 0.0}
    with pytest.raises(InvalidModel):
        load_supermartingale({**base, "values": [["a", 1.0]]})
    with pytest.raises(InvalidModel):
        load_supermartingale({**base, "values": [["□", 1.0], ["□", 2.0]]})
    with pytest.raises(InvalidModel):
        load_supermartingale({**base, "tail_rule": "other", "values": [["□", 1.0]]})


def test_dump_is_deterministic():
    assert dump({"b": 1, "a": [1, 2]}) == dump({"a": [1, 2], "b": 1})
