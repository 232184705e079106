"""Game-theoretic route: backward recursion and witness supermartingales.

The upper expectation of a finitary gamble is the least starting capital of a
bounded-below supermartingale whose eventual level covers the gamble on every
path through the conditioning situation. Backward recursion through the local
upper envelopes produces both that number and a supermartingale attaining it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .automaton import AutomatonGamble, build_layers
from .core import (TOL, DepthExceeded, FinitaryGamble, InvalidModel, NotConverged, Situation,
                   StateSpace, is_prefix, sample_paths)
from .local import upper_envelope
from .trees import ImpreciseTree

TAIL_RULES = ("constant_after_depth", "explicit")


class Supermartingale:
    """Capital process on situations.

    Stored either as an explicit table or as a lookup function. Under
    ``constant_after_depth`` an unstored situation takes the value of its
    longest stored prefix, which freezes capital once the table runs out.
    """

    def __init__(self, space: StateSpace, values: dict | None = None, *, lookup: Callable | None = None,
                 tail_rule: str = "constant_after_depth", lower_bound: float | None = None,
                 depth: int | None = None, materialize: Callable | None = None):
        if tail_rule not in TAIL_RULES:
            raise InvalidModel(f"unknown tail rule {tail_rule!r}")
        if values is None and lookup is None:
            raise InvalidModel("need either a value table or a lookup")
        self.space = space
        self.tail_rule = tail_rule
        self._values = None if values is None else {tuple(k): float(v) for k, v in values.items()}
        self._lookup = lookup
        self._materialize = materialize
        if depth is None:
            depth = max(map(len, self._values)) if self._values else 0
        self.depth = depth
        if lower_bound is None:
            if self._values is None:
                raise InvalidModel("lazy supermartingales need an explicit lower bound")
            lower_bound = min(self._values.values())
        self.lower_bound = float(lower_bound)

    def __call__(self, t: Situation) -> float:
        t = tuple(t)
        if self._lookup is not None:
            return self._lookup(t)
        v = self._values.get(t)
        if v is not None:
            return v
        if self.tail_rule == "explicit":
            raise DepthExceeded(f"no stored value at {self.space.format(t)!r}")
        for i in range(len(t) - 1, -1, -1):
            v = self._values.get(t[:i])
            if v is not None:
                return v
        raise DepthExceeded(f"no stored prefix of {self.space.format(t)!r}")

    def table(self) -> dict:
        if self._values is not None:
            return dict(self._values)
        if self._materialize is None:
            raise ValueError("this supermartingale cannot be tabulated")
        return self._materialize()


@dataclass
class SupermartingaleReport:
    checked: int = 0
    violations: list = field(default_factory=list)   # (situation, slack)
    below_bound: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.below_bound


def is_supermartingale(M: Supermartingale, P: ImpreciseTree, depth: int | None = None,
                       tol: float = TOL) -> SupermartingaleReport:
    """Check ``Q_t(M(t·)) <= M(t)`` at every situation shorter than ``depth``."""
    depth = M.depth + 1 if depth is None else depth
    rep = SupermartingaleReport()
    d = P.space.size
    for length in range(depth):
        for t in P.space.situations(length):
            here = M(t)
            nxt = np.array([M(t + (x,)) for x in range(d)])
            slack = here - upper_envelope(P.local_model_at(t), nxt)
            rep.checked += 1
            if slack < -tol:
                rep.violations.append((t, float(slack)))
            if here < M.lower_bound - tol:
                rep.below_bound.append((t, here))
    return rep


# finitary backward recursion


def _backward_dense(P: ImpreciseTree, f: FinitaryGamble, s: Situation) -> dict:
    """Backward values at every situation from ``s`` down to the horizon."""
    n, space = f.horizon, f.space
    if len(s) >= n:
        return {s: f.value(s)}
    table = {z: float(f.values[z]) for z in space.situations(n, s)}
    for length in range(n - 1, len(s) - 1, -1):
        for t in space.situations(length, s):
            kids = np.array([table[t + (x,)] for x in range(space.size)])
            table[t] = upper_envelope(P.local_model_at(t), kids)
    return table


def _backward_layers(P: ImpreciseTree, f: AutomatonGamble, s: Situation):
    L = build_layers(P, f, s)
    to_go = [None] * len(L.layers)
    to_go[-1] = L.layers[-1].terminal
    for a in range(len(L.layers) - 2, -1, -1):
        layer = L.layers[a]
        nxt = to_go[a + 1]
        vals = np.empty(len(layer.nodes))
        for i, V in enumerate(layer.models):
            vals[i] = np.max(V @ (layer.rewards[i] + nxt[layer.children[i]]))
        to_go[a] = vals
    return L, to_go


def backward_upper(P: ImpreciseTree, f, s: Situation = ()) -> float:
    """Upper expectation of a finitary gamble by backward induction."""
    s = tuple(s)
    if isinstance(f, AutomatonGamble):
        L, to_go = _backward_layers(P, f, s)
        return float(L.root_reward + to_go[0][0])
    return _backward_dense(P, f, s)[s]


def backward_lower(P: ImpreciseTree, f, s: Situation = ()) -> float:
    return -backward_upper(P, -f, s)


def _off_branch(space: StateSpace, s: Situation, level: float) -> dict:
    """Ancestors of ``s`` and the siblings hanging off them, all at ``level``."""
    out = {}
    for i in range(len(s)):
        out[s[:i]] = level
        for x in range(space.size):
            if x != s[i]:
                out[s[:i] + (x,)] = level
    return out


def optimal_supermartingale(P: ImpreciseTree, f, s: Situation = ()) -> Supermartingale:
    """Supermartingale starting at the upper expectation and covering ``f`` on Γ(s).

    Inside the subtree of ``s`` it is the backward value; capital is frozen after
    the horizon. Elsewhere it sits at ``sup f``, which keeps the supermartingale
    inequality true on all of X*.
    """
    s = tuple(s)
    space = f.space
    if isinstance(f, FinitaryGamble):
        table = _off_branch(space, s, f.hi)
        table.update(_backward_dense(P, f, s))
        return Supermartingale(space, table, lower_bound=min(f.lo, min(table.values())))

    L, to_go = _backward_layers(P, f, s)
    n, k = f.horizon, len(s)
    hi = f.hi

    def lookup(t):
        if not is_prefix(s, t):
            return hi
        t = t[: max(n, k)]
        acc = L.root_reward
        node = 0
        for a, x in enumerate(t[k:]):
            layer = L.layers[a]
            acc += layer.rewards[node, x]
            node = layer.children[node, x]
        return float(acc + to_go[len(t) - len(s) if len(s) < n else 0][node])

    def materialize():
        out = _off_branch(space, s, hi)
        for length in range(k, max(n, k) + 1):
            for t in space.situations(length, s):
                out[t] = lookup(t)
        return out

    return Supermartingale(space, lookup=lookup, lower_bound=min(f.lo, hi), depth=max(n, k),
                           materialize=materialize)


# hedging


@dataclass
class HedgingVerdict:
    ok: bool
    paths_checked: int
    exhaustive: bool
    counterexample: Situation | None = None
    level: float | None = None
    target: float | None = None


def hedging_check(M: Supermartingale, f, s: Situation, horizon: int, paths: int = 4096,
                  seed: int = 0, tol: float = TOL) -> HedgingVerdict:
    """Look for a path through Γ(s) where the eventual capital falls short of ``f``.

    ``f`` may be a finitary gamble or a monotone variable, in which case the
    latest truncation that fits inside ``horizon`` is used. The sweep is
    exhaustive when the subtree below ``s`` has at most ``paths`` leaves.
    """
    from .limits import MonotoneVariable

    s = tuple(s)
    space = M.space
    if isinstance(f, MonotoneVariable):
        seq = f.anchored(len(s))
        g = None
        for n in range(1, horizon + 1):
            cand = seq.at(n)
            if cand.horizon > horizon:
                break
            g = cand
        if g is None:
            raise ValueError("no truncation of the variable fits inside the horizon")
        f = g
    horizon = max(horizon, f.horizon, len(s))
    leaves = space.size ** (horizon - len(s))
    exhaustive = leaves <= paths
    candidates = space.situations(horizon, s) if exhaustive else sample_paths(space, s, horizon, paths, seed)
    checked = 0
    for z in candidates:
        checked += 1
        level, target = M(z), f.value(z)
        if level < target - tol:
            return HedgingVerdict(False, checked, exhaustive, z, level, target)
    return HedgingVerdict(True, checked, exhaustive)


# unbounded finitary variables via cuts


class CutExtended:
    """A finitary variable that may be unbounded or take infinite values.

    Its upper expectation is defined through upper cuts (bounded-below part)
    and lower cuts (everything else).
    """

    def __init__(self, space: StateSpace, values):
        vals = np.array(values, dtype=float)
        if any(dim != space.size for dim in vals.shape):
            raise InvalidModel("values do not form a grid over the state space")
        if np.any(np.isnan(vals)):
            raise InvalidModel("NaN values are not allowed")
        vals.setflags(write=False)
        self.space = space
        self.values = vals

    @property
    def horizon(self) -> int:
        return self.values.ndim

    @property
    def finite_scale(self) -> float:
        fin = self.values[np.isfinite(self.values)]
        return float(np.max(np.abs(fin))) if fin.size else 0.0

    def cut(self, low: float, high: float) -> FinitaryGamble:
        """``(f ∨ low) ∧ high``."""
        return FinitaryGamble(self.space, np.minimum(np.maximum(self.values, low), high))

    def __neg__(self) -> "CutExtended":
        return CutExtended(self.space, -self.values)


@dataclass
class GameValue:
    value: float
    witness: Supermartingale | None = None
    route: str = "finitary_exact"
    diagnostics: dict = field(default_factory=dict)


def _cut_limit(evaluate: Callable[[float], float], scale: float, sign: int, controls):
    """Limit of ``evaluate(sign * c)`` along c = 1, 2, 4, ... ."""
    prev = None
    trace = []
    for j in range(64):
        c = 2.0 ** j
        v = evaluate(sign * c)
        trace.append((sign * c, v))
        if abs(v) > controls.divergence_threshold:
            return (math.inf if v > 0 else -math.inf), trace, True
        if prev is not None and c > scale and abs(v - prev) < controls.tol:
            return v, trace, True
        prev = v
    return prev, trace, False


def _game_cut(P, v: CutExtended, s, controls) -> GameValue:
    scale = v.finite_scale
    inner_traces = {}

    def lower_cut_value(low):
        val, trace, ok = _cut_limit(lambda high: backward_upper(P, v.cut(low, high), s), scale, +1, controls)
        inner_traces[low] = trace
        if not ok:
            raise NotConverged(f"upper cuts did not settle at lower cut {low}", trace)
        return val

    val, outer, ok = _cut_limit(lower_cut_value, scale, -1, controls)
    if not ok:
        raise NotConverged("lower cuts did not settle", outer)
    return GameValue(val, None, "cut_extension", {"outer": outer})


def game_upper(P: ImpreciseTree, v, s: Situation = (), controls=None) -> GameValue:
    """Game-theoretic upper expectation of a finitary gamble, monotone variable or cut-extended variable."""
    from .limits import ConvergenceControls, MonotoneVariable, converge

    controls = controls or ConvergenceControls()
    s = tuple(s)
    if isinstance(v, (FinitaryGamble, AutomatonGamble)):
        value = backward_upper(P, v, s)
        witness = optimal_supermartingale(P, v, s)
        return GameValue(value, witness, "finitary_exact", {"horizon": v.horizon})
    if isinstance(v, MonotoneVariable):
        seq = v.anchored(len(s))
        res = converge(seq, lambda g: backward_upper(P, g, s), controls)
        return GameValue(res.estimate, None, "limit",
                         {"trace": res.trace, "converged": res.converged, "diverged": res.diverged,
                          "horizon_used": res.horizon_used, "bound_direction": res.bound_direction})
    if isinstance(v, CutExtended):
        return _game_cut(P, v, s, controls)
    raise TypeError(f"cannot evaluate {type(v).__name__}")


def game_lower(P: ImpreciseTree, v, s: Situation = (), controls=None) -> GameValue:
    res = game_upper(P, -v, s, controls)
    res.value = -res.value
    res.witness = None
    return res
