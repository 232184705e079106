"""Non-finitary variables as monotone limits of finitary gambles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .automaton import AutomatonGamble
from .core import (TOL, EmptyTarget, FinitaryGamble, InvalidModel, NotConverged, Situation, StateSpace)

DIRECTIONS = ("non_decreasing", "non_increasing")


@dataclass(frozen=True)
class MonotoneVariable:
    """A variable given as the pointwise limit of ``generator(1), generator(2), ...``.

    ``anchor`` re-targets variables whose definition depends on when observation
    starts (hitting times measured from the conditioning situation).
    """

    direction: str
    generator: Callable[[int], object]
    lower_bound: float | None = None
    name: str = "sequence"
    anchor: Callable[[int], "MonotoneVariable"] | None = None
    origin: int = 0

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise InvalidModel(f"direction must be one of {DIRECTIONS}")
        if self.direction == "non_decreasing" and self.lower_bound is None:
            raise InvalidModel("non-decreasing sequences need a uniform lower bound")

    def at(self, n: int):
        return self.generator(n)

    def anchored(self, k: int) -> "MonotoneVariable":
        return self if self.anchor is None else self.anchor(k)

    @property
    def increasing(self) -> bool:
        return self.direction == "non_decreasing"

    def __neg__(self) -> "MonotoneVariable":
        gen = self.generator
        flipped = "non_increasing" if self.increasing else "non_decreasing"
        bound = None if self.increasing else -_hi(gen(1))
        anchor = None if self.anchor is None else (lambda k, a=self.anchor: -a(k))
        return MonotoneVariable(flipped, lambda n: -gen(n), bound, f"-{self.name}", anchor, self.origin)


def _hi(g) -> float:
    return g.hi


def constant_sequence(f, name: str = "constant") -> MonotoneVariable:
    """``f, f, f, ...``; both directions hold, the non-decreasing one is declared."""
    return MonotoneVariable("non_decreasing", lambda n: f, f.lo, name)


# convergence


@dataclass
class ConvergenceControls:
    tol: float = TOL
    max_horizon: int = 64
    stall_window: int = 3
    divergence_threshold: float = 1e12


@dataclass
class LimitResult:
    """Outcome of following a monotone trace.

    For non-decreasing sequences every trace value bounds the limit from below;
    for non-increasing ones, from above.
    """

    estimate: float
    bound_direction: str
    converged: bool
    horizon_used: int
    trace: list = field(default_factory=list)
    diverged: bool = False
    exact: bool | None = None

    def is_monotone(self, tol: float = TOL) -> bool:
        vals = [v for _, v in self.trace]
        sign = 1.0 if self.bound_direction == "from_below" else -1.0
        return all(sign * (b - a) >= -tol for a, b in zip(vals, vals[1:]))


def converge(seq: MonotoneVariable, evaluator: Callable[[object], float],
             controls: ConvergenceControls | None = None, raise_on_failure: bool = True) -> LimitResult:
    """Evaluate ``seq`` at horizons 1, 2, ... until the values settle.

    Settled means ``stall_window`` consecutive steps each moving less than
    ``tol``. A non-decreasing trace that passes the divergence threshold is
    reported as +inf. Otherwise running out of horizon raises
    :class:`NotConverged` carrying the partial result.
    """
    c = controls or ConvergenceControls()
    direction = "from_below" if seq.increasing else "from_above"
    trace = []
    stall = 0
    for n in range(1, c.max_horizon + 1):
        v = float(evaluator(seq.at(n)))
        if trace and abs(v - trace[-1][1]) < c.tol:
            stall += 1
        else:
            stall = 0
        trace.append((n, v))
        if stall >= c.stall_window:
            return LimitResult(v, direction, True, n, trace)
        if seq.increasing and v > c.divergence_threshold:
            return LimitResult(math.inf, direction, False, n, trace, diverged=True)
    result = LimitResult(trace[-1][1], direction, False, c.max_horizon, trace)
    if raise_on_failure:
        raise NotConverged(f"{seq.name} did not settle within horizon {c.max_horizon}", result)
    return result


# built-in constructions


def _target_set(space: StateSpace, targets: Iterable) -> frozenset:
    out = set()
    for a in targets:
        out.add(space.index(a) if isinstance(a, str) else int(a))
    if not out:
        raise EmptyTarget("target set is empty")
    if any(x < 0 or x >= space.size for x in out):
        raise InvalidModel("target state out of range")
    return frozenset(out)


def hitting_variable(space: StateSpace, targets: Iterable, mode: str = "indicator",
                     cap: float | None = None, include_history: bool = False,
                     origin: int = 0) -> MonotoneVariable:
    """Reach indicator or hitting time of a set of states.

    Hits are counted from time ``origin + 1`` on and the hitting time is
    measured relative to ``origin``. With ``include_history=False`` (default)
    the origin follows the conditioning situation, so its own states never
    count; with ``include_history=True`` the variable is absolute (origin 0).
    """
    A = _target_set(space, targets)
    if mode not in ("indicator", "time"):
        raise InvalidModel(f"unknown hitting mode {mode!r}")
    if mode == "time" and len(A) == space.size:
        raise EmptyTarget("hitting time of the full state space: nothing to wait for")
    if cap is not None and cap <= 0:
        raise InvalidModel("cap must be positive")
    k = 0 if include_history else origin

    if mode == "indicator":
        def step(q, x, t):
            if t <= k:
                return q, 0.0
            return q or (x in A), 0.0

        def term(q):
            return 1.0 if q else 0.0
    else:
        # the state is the time waited so far (tracked only under a cap) or "done"
        def step(q, x, t):
            if q == "done" or t <= k:
                return q, 0.0
            r = 1.0 if cap is None else min(q + 1.0, cap) - q
            if x in A or (cap is not None and q + 1.0 >= cap):
                return "done", r
            return (q + 1.0 if cap is not None else 0.0), r

        def term(q):
            return 0.0

    init = False if mode == "indicator" else 0.0
    label = "".join(space.labels[i] for i in sorted(A))
    name = f"hit_{mode}[{label}]"

    def gen(n):
        return AutomatonGamble(space, k + n, init, step, term, f"{name}@{n}")

    anchor = None if include_history else (
        lambda kk: hitting_variable(space, A, mode, cap, False, kk))
    return MonotoneVariable("non_decreasing", gen, 0.0, name, anchor, k)


def truncated_average(space: StateSpace, targets: Iterable, window: int,
                      include_history: bool = False, origin: int = 0) -> MonotoneVariable:
    """Fraction of the first ``window`` steps spent in the target set.

    ``f_n`` counts steps up to ``min(n, window)``, so the sequence grows and
    reaches its limit at ``n = window``.
    """
    A = _target_set(space, targets)
    if window < 1:
        raise InvalidModel("window must be at least 1")
    k = 0 if include_history else origin
    w = 1.0 / window

    def step(q, x, t):
        return None, (w if k < t <= k + window and x in A else 0.0)

    def gen(n):
        return AutomatonGamble(space, k + n, None, step, lambda q: 0.0, f"avg@{n}")

    anchor = None if include_history else (
        lambda kk: truncated_average(space, A, window, False, kk))
    return MonotoneVariable("non_decreasing", gen, 0.0, "truncated_average", anchor, k)


def usc_decomposition(space: StateSpace, sup_oracle: Callable[[Situation], float], n: int,
                      depends_on: int | None = None) -> FinitaryGamble:
    """The ``n``-measurable gamble ``t ↦ max(-n, sup of f over Γ(t))``.

    When the oracle is known to read only the first ``depends_on`` states, the
    gamble is stored at horizon ``min(n, depends_on)``.
    """
    m = n if depends_on is None else min(n, depends_on)
    return FinitaryGamble.from_function(space, m, lambda t: max(-float(n), float(sup_oracle(t))))


def lsc_decomposition(space: StateSpace, inf_oracle: Callable[[Situation], float], n: int,
                      depends_on: int | None = None) -> FinitaryGamble:
    """The ``n``-measurable gamble ``t ↦ min(n, inf of f over Γ(t))``."""
    m = n if depends_on is None else min(n, depends_on)
    return FinitaryGamble.from_function(space, m, lambda t: min(float(n), float(inf_oracle(t))))


def cylinder_sup(g: FinitaryGamble) -> Callable[[Situation], float]:
    """Sup of a table gamble over the cylinder of a situation."""
    def oracle(t):
        if len(t) >= g.horizon:
            return g.value(t)
        return float(np.max(g.restrict(t)))
    return oracle


def cylinder_inf(g: FinitaryGamble) -> Callable[[Situation], float]:
    def oracle(t):
        if len(t) >= g.horizon:
            return g.value(t)
        return float(np.min(g.restrict(t)))
    return oracle


def usc_from_table(g: FinitaryGamble) -> MonotoneVariable:
    """Non-increasing decomposition of a table gamble; settles at its horizon."""
    sup = cylinder_sup(g)
    return MonotoneVariable("non_increasing", lambda n: usc_decomposition(g.space, sup, n, g.horizon),
                            None, "usc_from_table")


def lsc_from_table(g: FinitaryGamble) -> MonotoneVariable:
    inf = cylinder_inf(g)
    return MonotoneVariable("non_decreasing", lambda n: lsc_decomposition(g.space, inf, n, g.horizon),
                            min(1.0, g.lo), "lsc_from_table")


def monotone_approach(g: FinitaryGamble, h: FinitaryGamble, direction: str) -> MonotoneVariable:
    """A monotone sequence of ``n``-measurable gambles converging to ``g``.

    Before the horizon of ``g`` and ``h`` the terms are cylinder bounds of ``g``
    shifted by ``2^-n max(h)``; afterwards they are ``g ∓ 2^-n h``. ``h`` must
    be non-negative.
    """
    if h.lo < 0:
        raise InvalidModel("the perturbation must be non-negative")
    m, c = max(g.horizon, h.horizon), h.hi
    if direction == "non_decreasing":
        inf = cylinder_inf(g)

        def gen(n):
            if n < m:
                return lsc_decomposition(g.space, inf, n, g.horizon) - 2.0 ** -n * c
            return g - 2.0 ** -n * h

        return MonotoneVariable(direction, gen, min(1.0, g.lo) - c, "approach_up")
    sup = cylinder_sup(g)

    def gen(n):
        if n < m:
            return usc_decomposition(g.space, sup, n, g.horizon) + 2.0 ** -n * c
        return g + 2.0 ** -n * h

    return MonotoneVariable(direction, gen, None, "approach_down")


def _dense(g, m: int) -> np.ndarray:
    if isinstance(g, AutomatonGamble):
        g = g.to_dense()
    return g.lift(m).values


def validate_monotone(seq: MonotoneVariable, horizons: Sequence[int] = (1, 2, 3, 4, 5),
                      tol: float = TOL) -> None:
    """Check the declared direction pointwise on full grids; raise on violation."""
    hs = sorted(horizons)
    gambles = {n: seq.at(n) for n in hs}
    for n, g in gambles.items():
        if g.horizon > seq.origin + n:
            raise ValueError(f"{seq.name}: term {n} has horizon {g.horizon} > {seq.origin + n}")
    sign = 1.0 if seq.increasing else -1.0
    for a, b in zip(hs, hs[1:]):
        m = max(gambles[a].horizon, gambles[b].horizon)
        diff = sign * (_dense(gambles[b], m) - _dense(gambles[a], m))
        if np.min(diff) < -tol:
            idx = np.unravel_index(int(np.argmin(diff)), diff.shape)
            raise ValueError(f"{seq.name} is not {seq.direction} between terms {a} and {b} at {idx}")
        if seq.lower_bound is not None and _dense(gambles[b], m).min() < seq.lower_bound - tol:
            raise ValueError(f"{seq.name} drops below its declared lower bound")
