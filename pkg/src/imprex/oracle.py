"""Measure-theoretic route: expectations under precise trees and their upper envelope.

Everything here runs forwards: probability mass is pushed from the
conditioning situation down to the horizon and gamble values are summed
against it. No backward recursion is used, so this module serves as an
independent check on :mod:`imprex.game`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .automaton import DENSE_LIMIT, AutomatonGamble, as_automaton, build_layers
from .core import FinitaryGamble, Situation, is_prefix
from .trees import ImpreciseTree, PreciseTree, VertexSelection, relevant_situations

DEFAULT_BUDGET = 10**6
_CHUNK_CELLS = 1 << 22


def cylinder_probability(p: PreciseTree, z: Situation, s: Situation) -> float:
    """Probability of Γ(z) conditional on s under the precise tree ``p``."""
    z, s = tuple(z), tuple(s)
    k, ell = len(s), len(z)
    if k >= ell:
        return 1.0 if s[:ell] == z else 0.0
    if z[:k] != s:
        return 0.0
    prob = 1.0
    for i in range(k, ell):
        prob *= float(p.local_model_at(z[:i]).probs[z[i]])
    return prob


# dense gambles: one digit column per relevant situation


@dataclass
class _DensePlan:
    situations: list
    radices: list
    levels: list          # padded vertex tensors (m_j, kmax, d), one per level
    leaf_values: np.ndarray
    width: int

    @property
    def count(self) -> int:
        return math.prod(self.radices)


def _dense_plan(T, f: FinitaryGamble, s: Situation) -> _DensePlan:
    s = tuple(s)
    n, d = f.horizon, f.space.size
    rel = relevant_situations(f.space, s, n)
    levels, radices = [], []
    for length in range(len(s), n):
        sits = list(f.space.situations(length, s))
        mats = [T.vertex_matrix(T.key(t), length) for t in sits]
        kmax = max(m.shape[0] for m in mats)
        V = np.zeros((len(sits), kmax, d))
        for i, m in enumerate(mats):
            V[i, : m.shape[0]] = m
            radices.append(m.shape[0])
        levels.append(V)
    if len(s) >= n:
        leaves = np.array([f.value(s)])
    else:
        leaves = np.asarray(f.restrict(s), dtype=float).reshape(-1)
    width = d ** max(n - len(s), 0)
    return _DensePlan(rel, radices, levels, leaves, width)


def _dense_values(plan: _DensePlan, digits: np.ndarray) -> np.ndarray:
    T = digits.shape[0]
    mass = np.ones((T, 1))
    col = 0
    for V in plan.levels:
        m = V.shape[0]
        probs = V[np.arange(m)[None, :], digits[:, col: col + m]]  # (T, m, d)
        col += m
        mass = (mass[:, :, None] * probs).reshape(T, -1)
    return mass @ plan.leaf_values


# automaton gambles: one digit column per layered class


@dataclass
class _LayerPlan:
    root_reward: float
    classes: list
    radices: list
    steps: list           # (class columns, padded V, flat rewards, scatter matrix)
    terminal: np.ndarray
    injective: bool

    @property
    def count(self) -> int:
        return math.prod(self.radices)


def _inert_nodes(L) -> list:
    """Per layer, which nodes have a future that no vertex choice can change."""
    const = [None] * len(L.layers)
    const[-1] = [float(v) for v in L.layers[-1].terminal]
    for a in range(len(L.layers) - 2, -1, -1):
        layer, nxt = L.layers[a], const[a + 1]
        row = []
        for i in range(len(layer.nodes)):
            outs = {None if nxt[j] is None else layer.rewards[i, x] + nxt[j]
                    for x, j in enumerate(layer.children[i])}
            row.append(outs.pop() if len(outs) == 1 and None not in outs else None)
        const[a] = row
    return [[c is not None for c in row] for row in const]


def _layer_plan(T, f: AutomatonGamble, s: Situation) -> _LayerPlan:
    L = build_layers(T, f, s)
    cls = L.class_index()
    inert = _inert_nodes(L)
    d = f.space.size
    radices = [0] * len(cls)
    live = [False] * len(cls)
    steps = []
    for a, layer in enumerate(L.layers[:-1]):
        cols = np.array([cls[node] for node in layer.nodes])
        kmax = max(m.shape[0] for m in layer.models)
        V = np.zeros((len(layer.nodes), kmax, d))
        for i, m in enumerate(layer.models):
            V[i, : m.shape[0]] = m
            radices[cols[i]] = m.shape[0]
            live[cols[i]] = live[cols[i]] or not inert[a][i]
        m_next = len(L.layers[a + 1].nodes)
        scatter = np.zeros((len(layer.nodes) * d, m_next))
        scatter[np.arange(len(layer.nodes) * d), layer.children.reshape(-1)] = 1.0
        steps.append((cols, V, layer.rewards.reshape(-1), scatter))
    # a class whose future is fixed everywhere keeps vertex 0
    radices = [r if alive else 1 for r, alive in zip(radices, live)]
    n_situations = sum(d ** i for i in range(len(L.layers) - 1))
    injective = sum(len(layer.nodes) for layer in L.layers[:-1]) == len(cls) == n_situations
    return _LayerPlan(L.root_reward, list(cls), radices, steps, L.layers[-1].terminal, injective)


def _layer_values(plan: _LayerPlan, digits: np.ndarray) -> np.ndarray:
    T = digits.shape[0]
    mass = np.ones((T, 1))
    total = np.full(T, plan.root_reward)
    for cols, V, rew, scatter in plan.steps:
        m = V.shape[0]
        probs = V[np.arange(m)[None, :], digits[:, cols]]
        flow = (mass[:, :, None] * probs).reshape(T, -1)
        total += flow @ rew
        mass = flow @ scatter
    return total + mass @ plan.terminal


# shared enumeration / sampling


def _digits_for(radices, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.zeros((idx.size, len(radices)), dtype=np.int64)
    for r in range(len(radices) - 1, -1, -1):
        out[:, r] = idx % radices[r]
        idx //= radices[r]
    return out


def _chunk(plan_width: int, ncols: int) -> int:
    return max(1, _CHUNK_CELLS // max(1, plan_width + ncols))


def _search(radices, evaluate, width, budget, seed):
    """Max of ``evaluate`` over digit vectors; exhaustive when within budget."""
    R = len(radices)
    total = math.prod(radices)
    chunk = _chunk(width, R)
    best_val, best_dig = -math.inf, np.zeros(R, dtype=np.int64)
    if total <= budget:
        for start in range(0, total, chunk):
            dig = _digits_for(radices, start, min(total, start + chunk))
            vals = evaluate(dig)
            i = int(np.argmax(vals))
            if vals[i] > best_val:
                best_val, best_dig = float(vals[i]), dig[i].copy()
        return best_val, best_dig, total, True

    rng = np.random.default_rng(seed)
    high = np.asarray(radices, dtype=np.int64)
    evaluated = 0
    while evaluated < budget:
        size = min(chunk, budget - evaluated)
        dig = rng.integers(0, high, size=(size, R))
        vals = evaluate(dig)
        evaluated += size
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_dig = float(vals[i]), dig[i].copy()
    # greedy coordinate ascent from the best sample
    improved = True
    while improved:
        improved = False
        for r in range(R):
            if radices[r] < 2:
                continue
            cand = np.repeat(best_dig[None, :], radices[r], axis=0)
            cand[:, r] = np.arange(radices[r])
            vals = evaluate(cand)
            evaluated += radices[r]
            i = int(np.argmax(vals))
            if vals[i] > best_val + 1e-15:
                best_val, best_dig, improved = float(vals[i]), cand[i].copy(), True
    return best_val, best_dig, evaluated, False


@dataclass
class EnvelopeResult:
    """Upper envelope over compatible precise trees.

    With ``exact=False`` the value is a sup over a subset of compatible trees,
    hence a certified lower bound on the true envelope.
    """

    value: float
    exact: bool
    trees_evaluated: int
    argmax_selection: VertexSelection
    mode: str = "enumerate"
    diagnostics: dict = field(default_factory=dict)


def _dense_count_fits(P, f: AutomatonGamble, s, budget) -> bool:
    if f.dense_size() > DENSE_LIMIT or len(s) >= f.horizon:
        return False
    log_count = 0.0
    for t in relevant_situations(f.space, s, f.horizon):
        log_count += math.log(P.local_model_at(t).n_vertices)
        if log_count > math.log(budget):
            return False
    return True


def _plan_exact(plan: _LayerPlan) -> bool:
    """Class choices cover every vertex tree when classes are situations or nothing is left to choose."""
    return plan.injective or all(r == 1 for r in plan.radices)


def measure_upper_finitary(P: ImpreciseTree, f, s: Situation = (), budget: int = DEFAULT_BUDGET,
                           seed: int = 0, prefer: str = "auto") -> EnvelopeResult:
    """Sup of ``finitary_expectation(p, f, s)`` over precise trees compatible with ``P``.

    Dense gambles enumerate every vertex tree over the relevant situations.
    Automaton gambles with long horizons enumerate vertex choices per layered
    class instead; that family is exact only when classes coincide with
    situations (or ``P`` is precise), and a lower bound otherwise. ``prefer``
    forces that class mode (``"policy"``) or lets small automaton gambles be
    expanded and enumerated exactly (``"auto"``).
    """
    s = tuple(s)
    plan = None
    if isinstance(f, AutomatonGamble):
        plan = _layer_plan(P, f, s)
        if prefer == "auto" and not _plan_exact(plan) and _dense_count_fits(P, f, s, budget):
            f = f.to_dense()
    if isinstance(f, FinitaryGamble):
        plan = _dense_plan(P, f, s)
        val, dig, evaluated, full = _search(plan.radices, lambda g: _dense_values(plan, g),
                                            plan.width, budget, seed)
        sel = VertexSelection({t: int(i) for t, i in zip(plan.situations, dig)})
        return EnvelopeResult(val, full, evaluated, sel, "enumerate" if full else "sample")

    val, dig, evaluated, full = _search(plan.radices, lambda g: _layer_values(plan, g),
                                        max(len(st[2]) for st in plan.steps) if plan.steps else 1,
                                        budget, seed)
    sel = VertexSelection({c: int(i) for c, i in zip(plan.classes, dig)}, by="class")
    exact = full and _plan_exact(plan)
    return EnvelopeResult(val, exact, evaluated, sel, "policy" if full else "policy-sample",
                          {"classes": len(plan.classes)})


def measure_lower_finitary(P: ImpreciseTree, f, s: Situation = (), budget: int = DEFAULT_BUDGET,
                           seed: int = 0, prefer: str = "auto") -> EnvelopeResult:
    res = measure_upper_finitary(P, -f, s, budget, seed, prefer)
    res.value = -res.value
    return res


def evaluate_selection(P: ImpreciseTree, f, s: Situation, selection: VertexSelection) -> float:
    """Expectation of ``f`` under the precise tree a selection picks out of ``P``."""
    s = tuple(s)
    if selection.by == "situation":
        return finitary_expectation(PreciseTree.from_selection(P, selection), f, s)
    plan = _layer_plan(P, as_automaton(f), s)
    dig = np.array([[selection.choices.get(c, 0) for c in plan.classes]], dtype=np.int64)
    return float(_layer_values(plan, dig)[0])


def finitary_expectation(p: PreciseTree, f, s: Situation = ()) -> float:
    """``sum_z f(z) P_p(z | s)`` over the horizon grid, computed forwards."""
    s = tuple(s)
    if isinstance(f, FinitaryGamble):
        plan = _dense_plan(p, f, s)
        return float(_dense_values(plan, np.zeros((1, len(plan.radices)), dtype=np.int64))[0])
    plan = _layer_plan(p, f, s)
    return float(_layer_values(plan, np.zeros((1, len(plan.radices)), dtype=np.int64))[0])


def finitary_expectation_bruteforce(p: PreciseTree, f: FinitaryGamble, s: Situation = ()) -> float:
    """Literal weighted sum over every cell of the grid; for small cross-checks."""
    ell = max(f.horizon, len(s))
    g = f.lift(ell)
    return float(sum(g.values[z] * cylinder_probability(p, z, s)
                     for z in f.space.situations(ell) if is_prefix(z[: len(s)], s)))


class _Inexact(Exception):
    pass


def measure_upper_limit(P: ImpreciseTree, seq, s: Situation = (), controls=None,
                        budget: int = DEFAULT_BUDGET):
    """Envelope value of a monotone limit, read off the trace of its truncations.

    The trace is first built from exact envelopes only. If some truncation is
    out of reach, the whole trace is redone in class mode, which keeps it
    monotone; ``result.exact`` then reports ``False`` unless class mode happened
    to be exact at every horizon.
    """
    from .core import NotConverged
    from .limits import ConvergenceControls, converge

    controls = controls or ConvergenceControls()
    s = tuple(s)
    seq = seq.anchored(len(s))

    def exact_only(g):
        res = measure_upper_finitary(P, g, s, budget)
        if not res.exact:
            raise _Inexact
        return res.value

    try:
        result = converge(seq, exact_only, controls)
        result.exact = True
        return result
    except NotConverged as err:
        err.result.exact = True
        raise
    except _Inexact:
        pass

    records = []

    def evaluator(g):
        res = measure_upper_finitary(P, g, s, budget, prefer="policy")
        records.append(res.exact)
        return res.value

    try:
        result = converge(seq, evaluator, controls)
    except NotConverged as err:
        err.result.exact = all(records)
        raise
    result.exact = all(records)
    return result
