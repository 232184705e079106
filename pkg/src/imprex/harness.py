"""Executable property suites, the two evaluation routes, and fault injection.

Every suite returns a :class:`PropertyReport`. Reports are pure functions of
their inputs and seed, so rendering one twice gives identical text.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .automaton import AutomatonGamble
from .core import TOL, FinitaryGamble, NotConverged, Situation, cut_upper
from .game import backward_upper
from .limits import (ConvergenceControls, MonotoneVariable, converge, hitting_variable,
                     usc_from_table)
from .local import CredalSet, check_coherence, upper_envelope
from .oracle import DEFAULT_BUDGET, measure_upper_finitary, measure_upper_limit
from .trees import ImpreciseTree

#: Fault name -> (suite that must catch it, check tag it must trip).
FAULTS = {
    "sup_plus_one": ("coherence", "C1"),
    "one_step_shift": ("axioms", "P1"),
    "depth1_shift": ("axioms", "P3"),
    "range_penalty": ("axioms", "P4"),
    "jump_up_at_one": ("capacity", "CA2"),
    "jump_down_at_zero": ("capacity", "CA3"),
}


@dataclass
class RunConfig:
    tol: float = TOL
    budget: int = DEFAULT_BUDGET
    max_horizon: int = 64
    samples: int = 200
    seeds: tuple = (0,)
    tree: str | None = None
    var: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.max_horizon < 1 or self.samples < 0:
            raise ValueError("horizons must be positive and sample counts non-negative")
        self.seeds = tuple(int(s) for s in self.seeds)

    def controls(self) -> ConvergenceControls:
        return ConvergenceControls(tol=self.tol, max_horizon=self.max_horizon)

    def echo(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        return out


@dataclass
class PropertyReport:
    suite: str
    cases: int = 0
    violations: list = field(default_factory=list)   # (descriptor, observed, expected, slack)
    seed: int = 0
    config: dict = field(default_factory=dict)
    untestable: int = 0
    rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def tags(self) -> set:
        return {v[0].split()[0] for v in self.violations}

    def add(self, descriptor: str, observed: float, expected: float, slack: float):
        self.violations.append((descriptor, float(observed), float(expected), float(slack)))

    def merge(self, other: "PropertyReport", prefix: str = "") -> None:
        self.cases += other.cases
        self.untestable += other.untestable
        self.violations += [(f"{d} {prefix}".strip(), o, e, s) for d, o, e, s in other.violations]
        self.rows += other.rows

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "config": self.config,
            "cases": self.cases,
            "untestable": self.untestable,
            "ok": self.ok,
            "violations": [list(v) for v in sorted(self.violations, key=lambda v: v[0])],
            "rows": sorted(self.rows, key=lambda r: r["case"]),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def to_table(self) -> str:
        lines = [f"suite {self.suite}  seed {self.seed}  cases {self.cases}  "
                 f"violations {len(self.violations)}  untestable {self.untestable}"]
        if self.rows:
            keys = [k for k in self.rows[0] if k != "case"]
            lines.append("  ".join(["case".ljust(36)] + [k.rjust(14) for k in keys]))
            for r in sorted(self.rows, key=lambda r: r["case"]):
                lines.append("  ".join([str(r["case"]).ljust(36)] + [_cell(r[k]).rjust(14) for k in keys]))
        for d, o, e, s in sorted(self.violations, key=lambda v: v[0]):
            lines.append(f"  VIOLATION {d}: observed {o:.12g} expected {e:.12g} slack {s:.3g}")
        return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# evaluators


class GameEvaluator:
    """Backward recursion; the reference route."""

    name = "game"

    def upper(self, P, f, s) -> float:
        return backward_upper(P, f, s)

    def lower(self, P, f, s) -> float:
        return -self.upper(P, -f, s)

    def limit(self, P, seq: MonotoneVariable, s, controls=None, raise_on_failure=True):
        return converge(seq.anchored(len(s)), lambda g: self.upper(P, g, s), controls, raise_on_failure)


class OracleEvaluator(GameEvaluator):
    """Forward enumeration over compatible precise trees."""

    name = "oracle"

    def __init__(self, budget: int = DEFAULT_BUDGET, seed: int = 0):
        self.budget = budget
        self.seed = seed
        self.last_exact = True

    def upper(self, P, f, s) -> float:
        res = measure_upper_finitary(P, f, s, self.budget, self.seed)
        self.last_exact = res.exact
        return res.value

    def limit(self, P, seq, s, controls=None, raise_on_failure=True):
        try:
            res = measure_upper_limit(P, seq, s, controls, self.budget)
        except NotConverged as err:
            if raise_on_failure:
                raise
            res = err.result
        self.last_exact = bool(res.exact)
        return res


class FaultyEvaluator(GameEvaluator):
    """The game route with one deliberate defect, for mutation coverage."""

    def __init__(self, fault: str, base: GameEvaluator | None = None):
        if fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}; choose from {sorted(FAULTS)}")
        self.fault = fault
        self.base = base or GameEvaluator()
        self.name = f"{self.base.name}+{fault}"

    def upper(self, P, f, s) -> float:
        v = self.base.upper(P, f, s)
        fault = self.fault
        if fault == "depth1_shift" and len(s) == 1:
            return v + 0.1
        if fault == "one_step_shift" and f.horizon == len(s) + 1:
            return v + 0.05
        if fault == "range_penalty":
            return v - 0.5 * (f.hi - f.lo)
        if fault == "jump_up_at_one" and f.hi >= 1.0:
            return v + 0.1
        if fault == "jump_down_at_zero" and f.lo <= 0.0:
            return v - 0.1
        return v


def local_upper(K: CredalSet, fault: str | None = None):
    if fault == "sup_plus_one":
        return lambda f: upper_envelope(K, f) + 1.0
    return lambda f: upper_envelope(K, f)


# helpers


def _random_situation(rng, P: ImpreciseTree, max_len: int) -> Situation:
    k = int(rng.integers(0, max_len + 1))
    return tuple(int(x) for x in rng.integers(0, P.space.size, size=k))


def _random_gamble(rng, P: ImpreciseTree, horizon: int, low=-1.0, high=1.0) -> FinitaryGamble:
    d = P.space.size
    return FinitaryGamble(P.space, rng.uniform(low, high, size=(d,) * horizon))


def _fmt(P, s) -> str:
    return P.space.format(s) or "□"


def _max_gamble_horizon(P) -> int:
    return 3 if P.space.size <= 3 else 2


# coherence


def check_coherence_suite(credal_sets: dict, samples: int = 20, seed: int = 0, fault: str | None = None,
                          tol: float = TOL, config: dict | None = None) -> PropertyReport:
    """C1-C3 on every named credal set, over random and separating test gambles."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("coherence", seed=seed, config=config or {})
    scalars = [0.0, 0.5, 1.0, 2.0, 3.7]
    for name in sorted(credal_sets):
        K = credal_sets[name]
        gambles = [rng.uniform(-1.0, 1.0, size=K.dim) for _ in range(samples)]
        gambles += [np.eye(K.dim)[i] for i in range(K.dim)]
        sub = check_coherence(local_upper(K, fault), gambles, scalars, tol)
        rep.cases += sub.cases
        for tag, idx, lhs, rhs in sub.violations:
            rep.add(f"{tag} {name} {idx}", lhs, rhs, rhs - lhs)
    return rep


# global axioms


def check_global_axioms(P: ImpreciseTree, samples: int = 200, seed: int = 0, evaluator=None,
                        tol: float = TOL, config: dict | None = None, limit_every: int = 20) -> PropertyReport:
    """P1-P5 on random instances. P3 is checked as an equality.

    P5 runs on every ``limit_every``-th sample, on three sequence families:
    ``g + 2^-n h`` (finitary limit), a reach indicator plus an alternating
    ``2^-n`` term (monotone-limit target), and a convergent product sequence
    whose limit has no independent evaluator (counted as untestable).
    """
    ev = evaluator or GameEvaluator()
    rng = np.random.default_rng(seed)
    rep = PropertyReport("axioms", seed=seed, config=config or {})
    space = P.space
    d = space.size
    H = _max_gamble_horizon(P)

    for i in range(samples):
        s = _random_situation(rng, P, 2)
        k = len(s)
        tag = f"#{i:04d} s={_fmt(P, s)}"

        # P1: one-step gambles reproduce the local envelope
        loc = rng.uniform(-1.0, 1.0, size=d)
        lhs = ev.upper(P, FinitaryGamble.one_step(space, k, loc), s)
        rhs = upper_envelope(P.local_model_at(s), loc)
        rep.cases += 1
        if abs(lhs - rhs) > tol:
            rep.add(f"P1 {tag}", lhs, rhs, rhs - lhs)

        # P2: only the part of f on Γ(s) matters
        f = _random_gamble(rng, P, int(rng.integers(0, H + 1)))
        lhs, rhs = ev.upper(P, f, s), ev.upper(P, f.times_indicator(s), s)
        rep.cases += 1
        if abs(lhs - rhs) > tol:
            rep.add(f"P2 {tag}", lhs, rhs, rhs - lhs)

        # P3: iterated values, asserted with equality
        n = int(rng.integers(k + 1, k + H)) if H > 1 else k + 1
        n = min(n, k + H)
        f = _random_gamble(rng, P, n)
        inner = FinitaryGamble.from_function(space, k + 1, lambda t: ev.upper(P, f, t))
        lhs, rhs = ev.upper(P, f, s), ev.upper(P, inner, s)
        rep.cases += 1
        if abs(lhs - rhs) > tol:
            rep.add(f"P3 {tag}", lhs, rhs, rhs - lhs)

        # P4: monotonicity on ordered pairs
        f = _random_gamble(rng, P, int(rng.integers(0, H + 1)))
        g = f + _random_gamble(rng, P, int(rng.integers(0, H + 1)), 0.0, 1.0)
        lhs, rhs = ev.upper(P, f, s), ev.upper(P, g, s)
        rep.cases += 1
        if lhs > rhs + tol:
            rep.add(f"P4 {tag}", lhs, rhs, rhs - lhs)

        if limit_every and i % limit_every == 0:
            _p5(P, s, rng, ev, rep, tag, tol)
    return rep


def _p5(P, s, rng, ev, rep, tag, tol, N: int = 40) -> None:
    space = P.space
    k = len(s)
    # limsup E(f_n) >= E(f); the tail max stands in for the limsup
    g = _random_gamble(rng, P, k + 1)
    h = _random_gamble(rng, P, k + 1)
    tail = max(ev.upper(P, g + 2.0 ** -n * h, s) for n in (N - 2, N - 1, N))
    target = ev.upper(P, g, s)
    rep.cases += 1
    if tail < target - tol:
        rep.add(f"P5 finitary {tag}", tail, target, tail - target)

    A = [int(rng.integers(0, space.size))]
    hit = hitting_variable(space, A, "indicator").anchored(k)
    lim = ev.limit(P, hit, s, raise_on_failure=False)
    M = max(N, lim.horizon_used)
    seq = [hit.at(n).affine(1.0, (-1.0) ** n * 2.0 ** -n) for n in (M - 2, M - 1, M)]
    tail = max(ev.upper(P, f, s) for f in seq)
    rep.cases += 1
    if lim.converged and tail < lim.estimate - tol:
        rep.add(f"P5 reach {tag}", tail, lim.estimate, tail - lim.estimate)
    elif not lim.converged:
        rep.untestable += 1

    # product sequence: converges pointwise, limit not independently computable
    r = rng.uniform(-1.0, 1.0, size=(3, space.size))
    for n in range(1, 4):
        vals = np.ones((space.size,) * (k + n))
        for j in range(n):
            shape = [1] * (k + n)
            shape[k + j] = space.size
            vals = vals * (1.0 + r[j].reshape(shape) * 2.0 ** -(j + 1))
        ev.upper(P, FinitaryGamble(space, vals), s)
    rep.untestable += 1


# capacity


def check_capacity(P: ImpreciseTree, s: Situation = (), samples: int = 50, seed: int = 0, evaluator=None,
                   tol: float = TOL, config: dict | None = None, N: int = 40) -> PropertyReport:
    """CA1-CA3 for non-negative variables.

    CA2 follows ``(1 - 2^-n) g`` and ``g ∧ n`` up to ``g`` with ``max g = 1``,
    and reach indicators (whose trace must settle). CA3 follows the upper
    semicontinuous decomposition of a table with ``min g = 0`` and
    ``g + 2^-n h`` with ``h >= 1``.
    """
    ev = evaluator or GameEvaluator()
    rng = np.random.default_rng(seed)
    rep = PropertyReport("capacity", seed=seed, config=config or {})
    space = P.space
    s = tuple(s)
    k = len(s)
    H = _max_gamble_horizon(P)

    def trace_ok(vals, increasing):
        sign = 1.0 if increasing else -1.0
        return all(sign * (b - a) >= -tol for a, b in zip(vals, vals[1:]))

    for i in range(samples):
        tag = f"#{i:04d} s={_fmt(P, s)}"
        n_g = int(rng.integers(1, H + 1)) + k if k < H else k + 1

        # CA1
        f = _random_gamble(rng, P, int(rng.integers(0, H + 1)), 0.0, 1.0)
        g = f + _random_gamble(rng, P, int(rng.integers(0, H + 1)), 0.0, 1.0)
        lhs, rhs = ev.upper(P, f, s), ev.upper(P, g, s)
        rep.cases += 1
        if lhs > rhs + tol:
            rep.add(f"CA1 {tag}", lhs, rhs, rhs - lhs)

        # CA2 on finitary limits with max exactly 1
        g = _random_gamble(rng, P, n_g, 0.0, 1.0)
        g = FinitaryGamble(space, g.values / g.hi)
        target = ev.upper(P, g, s)
        for label, gen in (("scaled", lambda n: (1.0 - 2.0 ** -n) * g),
                           ("cut", lambda n: cut_upper(g, float(n) / 4.0))):
            vals = [ev.upper(P, gen(n), s) for n in range(1, N + 1)]
            rep.cases += 1
            if not trace_ok(vals, True):
                rep.add(f"CA2 {label} monotone {tag}", min(np.diff(vals)), 0.0, min(np.diff(vals)))
            if abs(vals[-1] - target) > tol:
                rep.add(f"CA2 {label} {tag}", vals[-1], target, vals[-1] - target)

        # CA3 on usc targets with min exactly 0
        g = _random_gamble(rng, P, n_g, 0.0, 1.0)
        g = FinitaryGamble(space, g.values - g.lo)
        h = _random_gamble(rng, P, n_g, 1.0, 2.0)
        target = ev.upper(P, g, s)
        usc = usc_from_table(g)
        for label, gen in (("usc", usc.at), ("perturbed", lambda n: g + 2.0 ** -n * h)):
            vals = [ev.upper(P, gen(n), s) for n in range(1, N + 1)]
            rep.cases += 1
            if not trace_ok(vals, False):
                rep.add(f"CA3 {label} monotone {tag}", max(np.diff(vals)), 0.0, -max(np.diff(vals)))
            if abs(vals[-1] - target) > tol:
                rep.add(f"CA3 {label} {tag}", vals[-1], target, target - vals[-1])

    # reach indicators: non-decreasing, non-negative, geometric traces
    for a in range(space.size):
        hit = hitting_variable(space, [a], "indicator")
        res = ev.limit(P, hit, s, raise_on_failure=False)
        vals = [v for _, v in res.trace]
        rep.cases += 1
        tag = f"reach[{space.labels[a]}] s={_fmt(P, s)}"
        if not trace_ok(vals, True):
            rep.add(f"CA2 monotone {tag}", min(np.diff(vals)), 0.0, min(np.diff(vals)))
        if not res.converged:
            rep.untestable += 1
    return rep


# equivalence


def equivalence_report(P: ImpreciseTree, variables: dict, situations, config: RunConfig | None = None,
                       seed: int = 0) -> PropertyReport:
    """Game route against measure route, upper and lower, per variable and situation.

    Exact oracle results must match within ``tol``. Inexact ones are lower
    bounds on the upper value (upper bounds on the lower value) and are only
    checked on that side.
    """
    config = config or RunConfig()
    controls = config.controls()
    rep = PropertyReport("equivalence", seed=seed, config=config.echo())
    game = GameEvaluator()
    oracle = OracleEvaluator(config.budget, seed)
    tol = config.tol
    for name in sorted(variables):
        v = variables[name]
        for s in situations:
            s = tuple(s)
            case = f"{name} s={_fmt(P, s)}"
            row = {"case": case}
            for side, sign in (("upper", 1.0), ("lower", -1.0)):
                target = v if sign > 0 else -v
                if isinstance(v, MonotoneVariable):
                    gv = game.limit(P, target, s, controls, raise_on_failure=False)
                    ov = oracle.limit(P, target, s, controls, raise_on_failure=False)
                    g_val, o_val = sign * gv.estimate, sign * ov.estimate
                    settled = gv.converged and ov.converged
                else:
                    g_val, o_val = sign * game.upper(P, target, s), sign * oracle.upper(P, target, s)
                    settled = True
                exact = oracle.last_exact
                delta = o_val - g_val
                row[f"{side}_game"] = g_val
                row[f"{side}_oracle"] = o_val
                row[f"{side}_exact"] = exact
                rep.cases += 1
                if not settled:
                    rep.untestable += 1
                    rep.add(f"unsettled {side} {case}", o_val, g_val, delta)
                elif exact and abs(delta) > tol:
                    rep.add(f"mismatch {side} {case}", o_val, g_val, delta)
                elif not exact and sign * delta > tol:
                    rep.add(f"bound {side} {case}", o_val, g_val, delta)
            row["max_delta"] = max(abs(row["upper_oracle"] - row["upper_game"]),
                                   abs(row["lower_oracle"] - row["lower_game"]))
            rep.rows.append(row)
    return rep


def run_fault(fault: str, P: ImpreciseTree, credal_sets: dict, seed: int = 0, samples: int = 60) -> PropertyReport:
    """Run the suite that is meant to catch ``fault`` with the fault switched on."""
    suite, _ = FAULTS[fault]
    if suite == "coherence":
        return check_coherence_suite(credal_sets, seed=seed, fault=fault)
    ev = FaultyEvaluator(fault)
    if suite == "axioms":
        return check_global_axioms(P, samples, seed, ev, limit_every=0)
    return check_capacity(P, (), max(1, samples // 10), seed, ev)
