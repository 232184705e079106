"""Precise and imprecise probability trees.

Every tree answers ``local_model_at(s)``. For the layered algorithms a tree also
exposes a *key*: a summary of the situation that determines all future local
models (nothing for uniform trees, the last state for stationary trees, the
full situation otherwise). Two situations with the same key and length have
identical subtrees of local models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .core import BudgetExceeded, DepthExceeded, InvalidModel, Situation, StateSpace, is_prefix
from .local import CredalSet, MassFunction, is_dominated

RULES = ("uniform", "stationary", "explicit")


class _Tree:
    model_type: type = object

    def __init__(self, space: StateSpace, rule: str, models, depth: int | None = None):
        if rule not in RULES:
            raise InvalidModel(f"unknown rule {rule!r}; expected one of {RULES}")
        self.space = space
        self.rule = rule
        self.depth = depth
        if rule == "uniform":
            self._check_model(models)
        elif rule == "stationary":
            models = {k: v for k, v in models.items()}
            wanted = {None, *range(space.size)}
            if set(models) != wanted:
                missing = sorted(wanted - set(models), key=str)
                raise InvalidModel(f"stationary rule is missing models for {missing}")
            for m in models.values():
                self._check_model(m)
        else:
            if depth is None or depth < 0:
                raise InvalidModel("explicit trees need a non-negative depth")
            models = {tuple(k): v for k, v in models.items()}
            for length in range(depth):
                for t in space.situations(length):
                    if t not in models:
                        raise InvalidModel(f"explicit tree has no model at {space.format(t)!r}")
            for m in models.values():
                self._check_model(m)
        self.models = models

    def _check_model(self, m):
        if not isinstance(m, self.model_type):
            raise InvalidModel(f"expected {self.model_type.__name__}, got {type(m).__name__}")
        if len(self._probs_of(m)[0]) != self.space.size:
            raise InvalidModel("local model has the wrong number of states")

    @staticmethod
    def _probs_of(m) -> np.ndarray:
        return m.vertices if isinstance(m, CredalSet) else m.probs[None, :]

    # keyed access

    def key(self, s: Situation):
        if self.rule == "uniform":
            return ()
        if self.rule == "stationary":
            return s[-1] if s else None
        return tuple(s)

    def next_key(self, key, x: int):
        if self.rule == "uniform":
            return ()
        if self.rule == "stationary":
            return x
        return key + (x,)

    def model_for_key(self, key, length: int):
        if self.rule == "uniform":
            return self.models
        if self.rule == "stationary":
            return self.models[key]
        if length >= self.depth:
            raise DepthExceeded(f"explicit tree has depth {self.depth}; asked at length {length}")
        return self.models[key]

    def local_model_at(self, s: Situation):
        s = tuple(s)
        return self.model_for_key(self.key(s), len(s))

    def vertex_matrix(self, key, length: int) -> np.ndarray:
        """Rows are the candidate mass functions at this key."""
        return self._probs_of(self.model_for_key(key, length))

    def max_depth(self) -> float:
        return self.depth if self.rule == "explicit" else math.inf


class ImpreciseTree(_Tree):
    """Assigns a credal set to every situation."""

    model_type = CredalSet

    @classmethod
    def uniform(cls, space: StateSpace, K: CredalSet) -> "ImpreciseTree":
        return cls(space, "uniform", K)

    @classmethod
    def stationary(cls, space: StateSpace, models: Mapping) -> "ImpreciseTree":
        return cls(space, "stationary", models)

    @classmethod
    def explicit(cls, space: StateSpace, models: Mapping, depth: int) -> "ImpreciseTree":
        return cls(space, "explicit", models, depth)

    @classmethod
    def from_precise(cls, p: "PreciseTree") -> "ImpreciseTree":
        if p.rule == "uniform":
            return cls(p.space, "uniform", CredalSet.precise(p.models))
        if p.rule == "stationary":
            return cls(p.space, "stationary", {k: CredalSet.precise(v) for k, v in p.models.items()})
        if p.rule == "explicit":
            return cls(p.space, "explicit", {k: CredalSet.precise(v) for k, v in p.models.items()}, p.depth)
        raise InvalidModel(f"cannot lift a {p.rule} precise tree")

    @property
    def is_precise(self) -> bool:
        if self.rule == "uniform":
            return self.models.is_precise
        return all(K.is_precise for K in self.models.values())


class PreciseTree(_Tree):
    """Assigns a mass function to every situation.

    Besides the three rule forms, a precise tree can be a vertex selection of an
    imprecise tree, or a mixture of two precise trees.
    """

    model_type = MassFunction

    @classmethod
    def uniform(cls, space: StateSpace, p) -> "PreciseTree":
        return cls(space, "uniform", _mass(p))

    @classmethod
    def stationary(cls, space: StateSpace, models: Mapping) -> "PreciseTree":
        return cls(space, "stationary", {k: _mass(v) for k, v in models.items()})

    @classmethod
    def explicit(cls, space: StateSpace, models: Mapping, depth: int) -> "PreciseTree":
        return cls(space, "explicit", {k: _mass(v) for k, v in models.items()}, depth)

    @classmethod
    def from_selection(cls, P: ImpreciseTree, selection: "VertexSelection") -> "PreciseTree":
        return _SelectionTree(P, selection)

    @classmethod
    def mixture(cls, p: "PreciseTree", q: "PreciseTree", weight: float) -> "PreciseTree":
        """Local models ``(1 - weight) p(.|s) + weight q(.|s)``."""
        return _MixtureTree(p, q, weight)


def _mass(p) -> MassFunction:
    return p if isinstance(p, MassFunction) else MassFunction(p)


class _SelectionTree(PreciseTree):
    def __init__(self, base: ImpreciseTree, selection: "VertexSelection"):
        self.space = base.space
        self.rule = "selection"
        self.depth = base.depth
        self.base = base
        self.selection = selection
        self.models = None

    def key(self, s):
        return tuple(s)

    def next_key(self, key, x):
        return key + (x,)

    def model_for_key(self, key, length):
        K = self.base.local_model_at(key)
        return K.vertex(self.selection.choices.get(key, 0))

    def max_depth(self):
        return self.base.max_depth()


class _MixtureTree(PreciseTree):
    def __init__(self, p: PreciseTree, q: PreciseTree, weight: float):
        if p.space != q.space:
            raise InvalidModel("mixture components live on different state spaces")
        if not 0.0 <= weight <= 1.0:
            raise InvalidModel("mixture weight must lie in [0, 1]")
        self.space = p.space
        self.rule = "mixture"
        self.depth = None
        self.parts = (p, q)
        self.weight = float(weight)
        self.models = None

    def key(self, s):
        return (self.parts[0].key(s), self.parts[1].key(s))

    def next_key(self, key, x):
        return (self.parts[0].next_key(key[0], x), self.parts[1].next_key(key[1], x))

    def model_for_key(self, key, length):
        a = self.parts[0].model_for_key(key[0], length).probs
        b = self.parts[1].model_for_key(key[1], length).probs
        w = self.weight
        return MassFunction((1.0 - w) * a + w * b)

    def max_depth(self):
        return min(self.parts[0].max_depth(), self.parts[1].max_depth())


def local_model_at(T: _Tree, s: Situation):
    return T.local_model_at(s)


@dataclass(frozen=True)
class VertexSelection:
    """One vertex index per situation (``by="situation"``) or per layered class
    ``(key, automaton state)`` (``by="class"``)."""

    choices: dict
    by: str = "situation"


def relevant_situations(space: StateSpace, s: Situation, horizon: int) -> list[Situation]:
    """Situations ``t`` with ``s ⊑ t`` and ``len(t) < horizon``, breadth-first, lexicographic."""
    out = []
    for length in range(len(s), horizon):
        out.extend(space.situations(length, tuple(s)))
    return out


def count_vertex_trees(P: ImpreciseTree, s: Situation, horizon: int) -> int:
    count = 1
    for t in relevant_situations(P.space, s, horizon):
        count *= P.local_model_at(t).n_vertices
    return count


def enumerate_vertex_trees(P: ImpreciseTree, s: Situation, horizon: int,
                           cap: int | None = None) -> Iterator[PreciseTree]:
    """Every precise tree choosing one vertex per relevant situation.

    The order is mixed-radix over :func:`relevant_situations`, last situation
    varying fastest. Raises :class:`BudgetExceeded` when the count tops ``cap``.
    """
    rel = relevant_situations(P.space, s, horizon)
    radices = [P.local_model_at(t).n_vertices for t in rel]
    total = math.prod(radices)
    if cap is not None and total > cap:
        raise BudgetExceeded(f"{total} vertex trees exceed the cap of {cap}")

    def gen():
        for idx in np.ndindex(*radices) if rel else [()]:
            yield PreciseTree.from_selection(P, VertexSelection(dict(zip(rel, map(int, idx)))))

    return gen()


def is_compatible(p: PreciseTree, P: ImpreciseTree, depth: int) -> bool:
    """``p(.|s) ∈ P_s`` for every situation shorter than ``depth``."""
    if p.space != P.space:
        return False
    # credal sets are convex: mixing two compatible trees stays compatible
    if isinstance(p, _MixtureTree) and all(is_compatible(q, P, depth) for q in p.parts):
        return True
    for length in range(depth):
        for t in P.space.situations(length):
            K = P.local_model_at(t)
            m = p.local_model_at(t)
            if not is_dominated(m, K):
                return False
    return True
