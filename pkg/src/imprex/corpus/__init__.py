"""Example trees and variables shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..formats import _read, load_tree, load_variable


def _path(kind: str, name: str):
    return resources.files(__name__).joinpath(kind, f"{name}.json")


def tree_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).joinpath("trees").iterdir()
                  if p.name.endswith(".json"))


def variable_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).joinpath("variables").iterdir()
                  if p.name.endswith(".json"))


def load_corpus_tree(name: str):
    with resources.as_file(_path("trees", name)) as p:
        return load_tree(p)


def load_corpus_trees(imprecise: bool = True) -> dict:
    """All shipped trees; precise ones are lifted when ``imprecise`` is set."""
    from ..trees import ImpreciseTree, PreciseTree

    out = {}
    for name in tree_names():
        T = load_corpus_tree(name)
        if imprecise and isinstance(T, PreciseTree):
            T = ImpreciseTree.from_precise(T)
        out[name] = T
    return out


def corpus_variables(space) -> dict:
    """Shipped variables that make sense on ``space`` (matching ``states`` if declared)."""
    out = {}
    for name in variable_names():
        with resources.as_file(_path("variables", name)) as p:
            doc = _read(p)
        states = doc.get("states")
        if states is not None and tuple(states) != space.labels:
            continue
        if any(t not in space.labels for t in doc.get("targets", ())):
            continue
        out[name] = load_variable(doc, space)
    return out


def corpus_credal_sets() -> dict:
    """Every distinct local model in the corpus trees, keyed ``tree/label``."""
    out = {}
    for name, T in load_corpus_trees().items():
        if T.rule == "uniform":
            out[f"{name}/*"] = T.models
        else:
            for key, K in T.models.items():
                label = "□" if key in (None, ()) else (T.space.labels[key] if T.rule == "stationary"
                                                       else T.space.format(key))
                out[f"{name}/{label}"] = K
    return out
