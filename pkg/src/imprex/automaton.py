"""Finitary gambles computed by streaming a path through a finite automaton.

Hitting times and similar variables have horizons far beyond what a dense
grid over X^n can hold. Such a gamble is written as

    f(x_1 .. x_n) = sum_{t=1..n} reward(q_{t-1}, x_t, t) + terminal(q_n)

with ``q_t = step(q_{t-1}, x_t, t)``. Combined with a tree's key function this
gives a layered graph whose width stays small, and both evaluation routes run
on that graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable

import numpy as np

from .core import FinitaryGamble, InvalidModel, Situation, SituationTooShort, StateSpace

#: Largest grid an automaton gamble may be expanded to.
DENSE_LIMIT = 1 << 16

StepFn = Callable[[Hashable, int, int], "tuple[Hashable, float]"]


class AutomatonGamble:
    """A finitary gamble of horizon ``horizon`` given by an automaton.

    ``step(q, x, t)`` returns the next automaton state and the reward collected
    when reading state ``x`` at (1-based) time ``t``.
    """

    def __init__(self, space: StateSpace, horizon: int, init: Hashable, step: StepFn,
                 terminal: Callable[[Hashable], float] = lambda q: 0.0, name: str = "automaton"):
        if horizon < 0:
            raise InvalidModel("horizon must be non-negative")
        self.space = space
        self.horizon = int(horizon)
        self.init = init
        self.step = step
        self.terminal = terminal
        self.name = name
        self._bounds = None

    def __repr__(self) -> str:
        return f"AutomatonGamble({self.name}, horizon={self.horizon})"

    def run(self, t: Situation, upto: int | None = None) -> tuple[Hashable, float]:
        """Automaton state and collected reward after reading ``t[:upto]``."""
        q, acc = self.init, 0.0
        for i, x in enumerate(t[: len(t) if upto is None else upto]):
            q, r = self.step(q, x, i + 1)
            acc += r
        return q, acc

    def value(self, t: Situation) -> float:
        if len(t) < self.horizon:
            raise SituationTooShort(f"gamble has horizon {self.horizon} but situation has length {len(t)}")
        q, acc = self.run(t, self.horizon)
        return acc + float(self.terminal(q))

    __call__ = value

    @property
    def lo(self) -> float:
        return self._range()[0]

    @property
    def hi(self) -> float:
        return self._range()[1]

    def _range(self) -> tuple[float, float]:
        if self._bounds is None:
            lo = {self.init: 0.0}
            hi = {self.init: 0.0}
            for t in range(1, self.horizon + 1):
                nlo, nhi = {}, {}
                for q in lo:
                    for x in range(self.space.size):
                        q2, r = self.step(q, x, t)
                        nlo[q2] = min(nlo.get(q2, np.inf), lo[q] + r)
                        nhi[q2] = max(nhi.get(q2, -np.inf), hi[q] + r)
                lo, hi = nlo, nhi
            self._bounds = (min(v + self.terminal(q) for q, v in lo.items()),
                            max(v + self.terminal(q) for q, v in hi.items()))
        return self._bounds

    def affine(self, scale: float, shift: float = 0.0) -> "AutomatonGamble":
        """``scale * f + shift``."""
        step, term = self.step, self.terminal

        def step2(q, x, t):
            q2, r = step(q, x, t)
            return q2, scale * r

        return AutomatonGamble(self.space, self.horizon, self.init, step2,
                               lambda q: scale * term(q) + shift, f"{scale:g}*{self.name}+{shift:g}")

    def __neg__(self) -> "AutomatonGamble":
        return self.affine(-1.0)

    def to_dense(self, limit: int = DENSE_LIMIT) -> FinitaryGamble:
        d, n = self.space.size, self.horizon
        if d ** n > limit:
            raise ValueError(f"{d}^{n} cells exceed the dense limit {limit}")
        return FinitaryGamble.from_function(self.space, n, self.value)

    def dense_size(self) -> int:
        return self.space.size ** self.horizon

    @classmethod
    def from_finitary(cls, f: FinitaryGamble) -> "AutomatonGamble":
        """The prefix automaton: its state is the situation read so far."""
        n = f.horizon

        def step(q, x, t):
            return (q + (x,) if len(q) < n else q), 0.0

        return cls(f.space, n, (), step, lambda q: float(f.values[q]), "dense")


def as_automaton(f) -> AutomatonGamble:
    return f if isinstance(f, AutomatonGamble) else AutomatonGamble.from_finitary(f)


@dataclass
class Layer:
    """Nodes at one time step. ``nodes[i] = (tree key, automaton state)``."""

    length: int
    nodes: list
    models: list          # vertex matrices, one per node (non-final layers)
    children: np.ndarray  # (nodes, d) index into the next layer
    rewards: np.ndarray   # (nodes, d)
    terminal: np.ndarray | None = None


@dataclass
class Layered:
    """Layered graph of (key, automaton state) classes below a situation."""

    root_reward: float
    layers: list

    @property
    def trivial(self) -> bool:
        return len(self.layers) == 1

    def class_index(self) -> dict:
        """Distinct classes across all non-final layers, in first-seen order."""
        seen = {}
        for layer in self.layers[:-1]:
            for node in layer.nodes:
                seen.setdefault(node, len(seen))
        return seen


def build_layers(tree, f: AutomatonGamble, s: Situation) -> Layered:
    """Unroll ``tree`` and ``f`` from ``s`` up to the gamble's horizon.

    When ``len(s) >= horizon`` the result has a single final layer.
    """
    s = tuple(s)
    n, d = f.horizon, f.space.size
    k = min(len(s), n)
    q0, acc = f.run(s, k)
    if len(s) >= n:
        return Layered(acc, [Layer(len(s), [(None, q0)], [], np.zeros((1, 0), int), np.zeros((1, 0)),
                                   np.array([float(f.terminal(q0))]))])
    root = (tree.key(s), q0)
    layers = []
    current = [root]
    for length in range(k, n):
        index = {}
        nxt = []
        kids = np.empty((len(current), d), dtype=int)
        rew = np.empty((len(current), d))
        models = []
        for i, (key, q) in enumerate(current):
            models.append(tree.vertex_matrix(key, length))
            for x in range(d):
                q2, r = f.step(q, x, length + 1)
                child = (tree.next_key(key, x), q2)
                j = index.get(child)
                if j is None:
                    j = index[child] = len(nxt)
                    nxt.append(child)
                kids[i, x] = j
                rew[i, x] = r
        layers.append(Layer(length, current, models, kids, rew))
        current = nxt
    term = np.array([float(f.terminal(q)) for _, q in current])
    layers.append(Layer(n, current, [], np.zeros((len(current), 0), int), np.zeros((len(current), 0)), term))
    return Layered(acc, layers)
