"""Credal sets in vertex form and the local coherent upper expectations they induce."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import TOL, DimensionMismatch, InvalidModel

#: Tolerance on simplex membership of probability vectors.
SIMPLEX_TOL = 1e-12


class MassFunction:
    """A probability vector on the state space."""

    __slots__ = ("probs",)

    def __init__(self, probs: Sequence[float]):
        p = np.array(probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise InvalidModel(f"mass function must be a vector of length >= 2, got {probs!r}")
        if np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidModel(f"{p.tolist()} is not a probability vector")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        self.probs = p

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"MassFunction({self.probs.tolist()})"

    def expectation(self, f) -> float:
        f = np.asarray(f, dtype=float)
        if f.shape != self.probs.shape:
            raise DimensionMismatch(f"gamble of shape {f.shape} on {self.probs.size} states")
        return float(f @ self.probs)


class CredalSet:
    """A closed convex set of mass functions, given by its extreme points.

    Duplicate vertices are merged on construction.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices: Iterable):
        rows = []
        for v in vertices:
            p = v.probs if isinstance(v, MassFunction) else MassFunction(v).probs
            if rows and p.size != rows[0].size:
                raise DimensionMismatch("vertices of different lengths")
            if not any(np.max(np.abs(p - q)) <= SIMPLEX_TOL for q in rows):
                rows.append(p)
        if not rows:
            raise InvalidModel("a credal set needs at least one vertex")
        arr = np.vstack(rows)
        arr.setflags(write=False)
        self.vertices = arr

    @classmethod
    def precise(cls, p) -> "CredalSet":
        return cls([p])

    @classmethod
    def vacuous(cls, d: int) -> "CredalSet":
        return cls(np.eye(d))

    @classmethod
    def linear_vacuous(cls, p, eps: float) -> "CredalSet":
        """Vertices ``(1 - eps) p + eps δ_x`` for every state x."""
        if not 0.0 <= eps <= 1.0:
            raise InvalidModel(f"eps must lie in [0, 1], got {eps}")
        p = MassFunction(p).probs
        return cls((1.0 - eps) * p + eps * np.eye(p.size))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def is_precise(self) -> bool:
        return self.n_vertices == 1

    def vertex(self, i: int) -> MassFunction:
        return MassFunction(self.vertices[i])

    def contains_vertex(self, p, tol: float = SIMPLEX_TOL) -> bool:
        p = np.asarray(getattr(p, "probs", p), dtype=float)
        return bool(np.any(np.max(np.abs(self.vertices - p), axis=1) <= tol))

    def upper(self, f) -> float:
        return upper_envelope(self, f)

    def lower(self, f) -> float:
        return lower_envelope(self, f)

    def __repr__(self) -> str:
        return f"CredalSet({self.vertices.tolist()})"


def _as_local(K: CredalSet, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (K.dim,):
        raise DimensionMismatch(f"local gamble of shape {f.shape} against {K.dim} states")
    return f


def upper_envelope(K: CredalSet, f) -> float:
    """``max_v <f, v>`` over the vertices, which equals the sup over the hull."""
    return float(np.max(K.vertices @ _as_local(K, f)))


def lower_envelope(K: CredalSet, f) -> float:
    return -upper_envelope(K, -_as_local(K, f))


# coherence


@dataclass
class CoherenceReport:
    cases: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_coherence(upper: CredalSet | Callable, test_gambles: Sequence, nonneg_scalars: Sequence[float],
                    tol: float = TOL) -> CoherenceReport:
    """Check C1 (bounded by sup), C2 (sub-additivity) and C3 (non-negative homogeneity).

    ``upper`` is either a credal set or any callable on local gambles, so that
    deliberately broken evaluators can be fed through the same checks.
    """
    if not test_gambles:
        raise ValueError("need at least one test gamble")
    Q = (lambda f: upper_envelope(upper, f)) if isinstance(upper, CredalSet) else upper
    gambles = [np.asarray(f, dtype=float) for f in test_gambles]
    rep = CoherenceReport()
    for i, f in enumerate(gambles):
        rep.cases += 1
        q = Q(f)
        if q > f.max() + tol:
            rep.violations.append(("C1", (i,), q, float(f.max())))
    for (i, f), (j, g) in itertools.combinations_with_replacement(enumerate(gambles), 2):
        rep.cases += 1
        lhs, rhs = Q(f + g), Q(f) + Q(g)
        if lhs > rhs + tol:
            rep.violations.append(("C2", (i, j), lhs, rhs))
    for i, f in enumerate(gambles):
        for lam in nonneg_scalars:
            if lam < 0:
                raise ValueError("homogeneity scalars must be non-negative")
            rep.cases += 1
            lhs, rhs = Q(lam * f), lam * Q(f)
            if abs(lhs - rhs) > tol * max(1.0, abs(rhs)):
                rep.violations.append(("C3", (i, lam), lhs, rhs))
    return rep


# domination


def _nullspace_normal(rows: np.ndarray) -> np.ndarray | None:
    _, sv, vt = np.linalg.svd(rows)
    rank = int(np.sum(sv > 1e-12))
    if rank != vt.shape[1] - 1:
        return None
    return vt[-1]


def default_test_gambles(K: CredalSet, limit: int = 4096) -> list[np.ndarray]:
    """Separating directions used by :func:`is_dominated`.

    Coordinate indicators, all sign vectors, edge directions between vertex
    pairs, and facet normals of every (d-1)-subset of vertices. For d <= 3 these
    include every hull facet, which makes the falsifier exact.
    """
    d = K.dim
    out = [row for row in np.eye(d)]
    out += [np.array(sig, dtype=float) for sig in itertools.product((-1.0, 1.0), repeat=d)]
    V = K.vertices
    for i, j in itertools.combinations(range(len(V)), 2):
        diff = V[j] - V[i]
        out += [diff, -diff]
    ones = np.ones(d)
    for count, subset in enumerate(itertools.combinations(range(len(V)), d - 1)):
        if count >= limit:
            break
        rows = np.vstack([V[list(subset[1:])] - V[subset[0]], ones]) if d > 2 else ones[None, :]
        nrm = _nullspace_normal(rows)
        if nrm is not None:
            out += [nrm, -nrm]
    return out


@dataclass(frozen=True)
class Domination:
    dominated: bool
    witness: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.dominated


def is_dominated(p, K: CredalSet, test_gambles: Sequence | None = None, tol: float = TOL) -> Domination:
    """Sound falsifier for ``p ∈ K``; exact for up to three states.

    Returns a witness gamble ``f`` with ``<f, p> > upper(K, f)`` when one is found.
    """
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    if p.shape != (K.dim,):
        raise DimensionMismatch("mass function and credal set disagree on the state count")
    if K.contains_vertex(p):
        return Domination(True)
    gambles = default_test_gambles(K) + [np.asarray(g, dtype=float) for g in (test_gambles or ())]
    for f in gambles:
        if f @ p > upper_envelope(K, f) + tol:
            return Domination(False, f)
    return Domination(True)
