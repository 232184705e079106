"""State spaces, situations, finitary gambles and cuts.

A situation is a plain tuple of state indices; the empty tuple is the root.
Finitary gambles store their values densely on the grid X^n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

#: Absolute tolerance for every real-valued comparison in the package.
TOL = 1e-9

Situation = tuple  # tuple[int, ...]
ExtendedReal = float  # finite float, or +/- math.inf


class ImprexError(Exception):
    """Base class for all package errors."""


class SituationTooShort(ImprexError, ValueError):
    pass


class DepthExceeded(ImprexError, LookupError):
    pass


class BudgetExceeded(ImprexError):
    pass


class DimensionMismatch(ImprexError, ValueError):
    pass


class EmptyTarget(ImprexError, ValueError):
    pass


class InvalidModel(ImprexError, ValueError):
    """A probability vector, tree or file failed validation."""


class NotConverged(ImprexError):
    """A limit computation ran out of horizon; ``result`` holds the partial trace."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def ext_add(a: float, b: float) -> float:
    """Add two extended reals, refusing the undefined ``inf - inf``."""
    if (a == math.inf and b == -math.inf) or (a == -math.inf and b == math.inf):
        raise ArithmeticError("(+inf) + (-inf) is undefined")
    return a + b


class StateSpace:
    """A finite, ordered set of at least two state labels."""

    def __init__(self, labels: Sequence[str]):
        labels = tuple(str(x) for x in labels)
        if len(labels) < 2:
            raise InvalidModel("a state space needs at least two states")
        if len(set(labels)) != len(labels):
            raise InvalidModel(f"duplicate state labels in {labels}")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}
        self._compact = all(len(lab) == 1 for lab in labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, StateSpace) and other.labels == self.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"StateSpace({list(self.labels)!r})"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidModel(f"unknown state {label!r}") from None

    def parse(self, text: str | Sequence[str]) -> Situation:
        """Parse ``"ab"`` (single-char labels) or ``"x,y"`` into a situation.

        ``""``, ``"-"`` and ``"□"`` denote the empty situation.
        """
        if not isinstance(text, str):
            return tuple(self.index(lab) for lab in text)
        text = text.strip()
        if text in ("", "-", "□"):
            return ()
        if "," in text or not self._compact:
            return tuple(self.index(lab.strip()) for lab in text.split(","))
        return tuple(self.index(ch) for ch in text)

    def format(self, s: Situation) -> str:
        if not s:
            return ""
        sep = "" if self._compact else ","
        return sep.join(self.labels[i] for i in s)

    def situations(self, length: int, prefix: Situation = ()) -> Iterator[Situation]:
        """All situations of the given length extending ``prefix``, in lexicographic order."""
        for tail in itertools.product(range(self.size), repeat=length - len(prefix)):
            yield tuple(prefix) + tail

    def check(self, s: Situation) -> Situation:
        s = tuple(int(x) for x in s)
        if any(x < 0 or x >= self.size for x in s):
            raise InvalidModel(f"situation {s} has entries outside 0..{self.size - 1}")
        return s


def is_prefix(s: Situation, t: Situation) -> bool:
    """True iff ``s`` is an initial segment of ``t`` (that is, Γ(t) ⊆ Γ(s))."""
    return len(s) <= len(t) and tuple(t[: len(s)]) == tuple(s)


@dataclass(frozen=True, eq=False)
class FinitaryGamble:
    """A bounded variable that depends on the first ``horizon`` states only.

    ``values`` has shape ``(d,) * horizon``; a horizon-0 gamble is a constant.
    """

    space: StateSpace
    values: np.ndarray
    bounds: tuple[float, float] | None = None
    lo: float = field(init=False)
    hi: float = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        d = self.space.size
        if any(dim != d for dim in vals.shape):
            raise DimensionMismatch(f"values shape {vals.shape} is not a power grid of {d} states")
        if not np.all(np.isfinite(vals)):
            raise InvalidModel("finitary gambles take finite values only")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        vmin, vmax = float(vals.min()), float(vals.max())
        if self.bounds is None:
            lo, hi = vmin, vmax
        else:
            lo, hi = map(float, self.bounds)
            if vmin < lo - TOL or vmax > hi + TOL:
                raise InvalidModel(f"values in [{vmin}, {vmax}] escape declared bounds [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # construction helpers

    @classmethod
    def constant(cls, space: StateSpace, c: float, horizon: int = 0) -> "FinitaryGamble":
        return cls(space, np.full((space.size,) * horizon, float(c)))

    @classmethod
    def indicator(cls, space: StateSpace, s: Situation) -> "FinitaryGamble":
        """Indicator of the cylinder event Γ(s)."""
        vals = np.zeros((space.size,) * len(s))
        vals[tuple(s)] = 1.0
        return cls(space, vals)

    @classmethod
    def from_function(cls, space: StateSpace, horizon: int,
                      fn: Callable[[Situation], float]) -> "FinitaryGamble":
        vals = np.empty((space.size,) * horizon)
        for z in space.situations(horizon):
            vals[z] = fn(z)
        return cls(space, vals)

    @classmethod
    def one_step(cls, space: StateSpace, k: int, local: Sequence[float]) -> "FinitaryGamble":
        """The gamble ``f(X_{k+1})`` for a local gamble ``f`` on X."""
        local = np.asarray(local, dtype=float)
        if local.shape != (space.size,):
            raise DimensionMismatch("local gamble has the wrong length")
        shape = (1,) * k + (space.size,)
        return cls(space, np.broadcast_to(local.reshape(shape), (space.size,) * (k + 1)))

    # basic accessors

    @property
    def horizon(self) -> int:
        return self.values.ndim

    def value(self, t: Situation) -> float:
        n = self.horizon
        if len(t) < n:
            raise SituationTooShort(f"gamble has horizon {n} but situation has length {len(t)}")
        return float(self.values[tuple(t[:n])])

    def __call__(self, t: Situation) -> float:
        return self.value(t)

    def lift(self, m: int) -> "FinitaryGamble":
        """The same variable represented at horizon ``m >= horizon``."""
        n = self.horizon
        if m < n:
            raise ValueError(f"cannot lift horizon {n} down to {m}")
        if m == n:
            return self
        d = self.space.size
        vals = np.broadcast_to(self.values.reshape(self.values.shape + (1,) * (m - n)), (d,) * m)
        return FinitaryGamble(self.space, vals, (self.lo, self.hi))

    def restrict(self, s: Situation) -> np.ndarray:
        """Values on the subtree below ``s`` (requires ``len(s) <= horizon``)."""
        return self.values[tuple(s)]

    # arithmetic

    def _aligned(self, other: "FinitaryGamble") -> tuple[np.ndarray, np.ndarray]:
        if other.space != self.space:
            raise DimensionMismatch("gambles live on different state spaces")
        m = max(self.horizon, other.horizon)
        return self.lift(m).values, other.lift(m).values

    def __add__(self, other):
        if isinstance(other, FinitaryGamble):
            a, b = self._aligned(other)
            return FinitaryGamble(self.space, a + b)
        return FinitaryGamble(self.space, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return FinitaryGamble(self.space, -self.values)

    def __mul__(self, other):
        if isinstance(other, FinitaryGamble):
            a, b = self._aligned(other)
            return FinitaryGamble(self.space, a * b)
        return FinitaryGamble(self.space, self.values * float(other))

    __rmul__ = __mul__

    def times_indicator(self, s: Situation) -> "FinitaryGamble":
        """``f · 1_s``."""
        return self * FinitaryGamble.indicator(self.space, s)

    def leq(self, other: "FinitaryGamble", tol: float = TOL) -> bool:
        a, b = self._aligned(other)
        return bool(np.all(a <= b + tol))

    def allclose(self, other: "FinitaryGamble", tol: float = TOL) -> bool:
        a, b = self._aligned(other)
        return bool(np.all(np.abs(a - b) <= tol))

    def __repr__(self) -> str:
        return f"FinitaryGamble(horizon={self.horizon}, range=[{self.lo:g}, {self.hi:g}])"


def gamble_value(f, t: Situation) -> float:
    return f.value(t)


def cut_upper(f: FinitaryGamble, c: float) -> FinitaryGamble:
    """Pointwise ``min(f, c)``."""
    return FinitaryGamble(f.space, np.minimum(f.values, c), (min(f.lo, c), min(f.hi, c)))


def cut_lower(f: FinitaryGamble, c: float) -> FinitaryGamble:
    """Pointwise ``max(f, c)``."""
    return FinitaryGamble(f.space, np.maximum(f.values, c), (max(f.lo, c), max(f.hi, c)))


@dataclass(frozen=True)
class PathPrefix:
    """A finite path prefix plus the seed used to extend it."""

    situation: Situation
    seed: int = 0

    def extend(self, space: StateSpace, length: int, weights=None) -> Situation:
        """Extend to ``length`` states, drawing each new state independently.

        ``weights`` is an optional callable mapping the current situation to a
        probability vector; states are uniform otherwise.
        """
        rng = np.random.default_rng(self.seed)
        path = list(self.situation)
        while len(path) < length:
            if weights is None:
                path.append(int(rng.integers(space.size)))
            else:
                path.append(int(rng.choice(space.size, p=weights(tuple(path)))))
        return tuple(path)


def sample_paths(space: StateSpace, prefix: Situation, length: int, count: int,
                 seed: int = 0) -> list[Situation]:
    """``count`` uniformly drawn extensions of ``prefix`` to ``length`` states."""
    rng = np.random.default_rng(seed)
    extra = length - len(prefix)
    if extra <= 0:
        return [tuple(prefix[:length])] * count
    draws = rng.integers(space.size, size=(count, extra))
    return [tuple(prefix) + tuple(int(x) for x in row) for row in draws]
