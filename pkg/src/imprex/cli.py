"""Command-line entry point: ``imprex <command> ...``.

Global flags ``--tol``, ``--seed``, ``--max-horizon`` and ``--budget`` may also
be set through ``IMPREX_TOL``, ``IMPREX_SEED``, ``IMPREX_MAX_HORIZON`` and
``IMPREX_BUDGET``; flags win over the environment. Every command prints a JSON
document followed by a table and exits with status 1 when it found a
violation, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import corpus
from .core import ImprexError, NotConverged
from .formats import dump, load_supermartingale, load_tree, load_variable, supermartingale_document
from .game import game_upper, hedging_check, is_supermartingale
from .harness import (FAULTS, GameEvaluator, OracleEvaluator, PropertyReport, RunConfig,
                      check_capacity, check_coherence_suite, check_global_axioms, equivalence_report,
                      run_fault)
from .limits import MonotoneVariable
from .oracle import DEFAULT_BUDGET
from .trees import ImpreciseTree, PreciseTree

GLOBALS = {
    "tol": (float, 1e-9),
    "seed": (int, 0),
    "max_horizon": (int, 64),
    "budget": (int, DEFAULT_BUDGET),
}


def _global_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    for name, (kind, _) in GLOBALS.items():
        p.add_argument("--" + name.replace("_", "-"), type=kind, default=argparse.SUPPRESS)
    p.add_argument("--format", choices=("json", "table", "both"), default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    g = _global_parser()
    parser = argparse.ArgumentParser(prog="imprex", parents=[g],
                                     description="Upper and lower expectations on imprecise probability trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p, var=True, situation=True):
        p.add_argument("--tree", required=True, help="tree JSON file or corpus tree name")
        if var:
            p.add_argument("--var", required=True, help="variable JSON file or corpus variable name")
        if situation:
            p.add_argument("--situation", default="", help="conditioning situation, e.g. 'ab' (default: root)")

    p = sub.add_parser("eval", parents=[g], help="upper and lower value of a variable")
    model_args(p)
    p.add_argument("--route", choices=("game", "oracle", "both"), default="both")

    p = sub.add_parser("oracle", parents=[g], help="measure-theoretic envelope only")
    model_args(p)

    p = sub.add_parser("check", parents=[g], help="run a property suite")
    p.add_argument("suite", choices=("coherence", "axioms", "capacity", "equivalence", "faults"))
    p.add_argument("--tree", action="append", help="restrict to these trees (default: corpus)")
    p.add_argument("--var", action="append", help="equivalence: restrict to these variables")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--depth", type=int, default=1, help="equivalence: condition on situations up to this length")

    p = sub.add_parser("converge", parents=[g], help="trace the truncations of a monotone variable")
    model_args(p)
    p.add_argument("--route", choices=("game", "oracle"), default="game")
    p.add_argument("--trace", action="store_true", help="include the horizon/value pairs")
    p.add_argument("--table", action="store_true", help="print the trace as a two-column table")

    p = sub.add_parser("supermartingale", parents=[g], help="export or verify a witness supermartingale")
    model_args(p, var=False)
    p.add_argument("--var", help="variable the supermartingale should hedge")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--export", metavar="M.json")
    mode.add_argument("--verify", metavar="M.json")
    p.add_argument("--paths", type=int, default=4096)
    return parser


def _settings(args) -> dict:
    out = {}
    for name, (kind, default) in GLOBALS.items():
        if hasattr(args, name):
            out[name] = getattr(args, name)
        elif f"IMPREX_{name.upper()}" in os.environ:
            out[name] = kind(os.environ[f"IMPREX_{name.upper()}"])
        else:
            out[name] = default
    out["format"] = getattr(args, "format", os.environ.get("IMPREX_FORMAT", "both"))
    return out


def _tree(ref: str):
    T = load_tree(ref) if os.path.exists(ref) else corpus.load_corpus_tree(ref)
    return ImpreciseTree.from_precise(T) if isinstance(T, PreciseTree) else T


def _variable(ref: str, space):
    if os.path.exists(ref):
        return load_variable(ref, space)
    available = corpus.corpus_variables(space)
    if ref not in available:
        raise ImprexError(f"no variable {ref!r}; corpus variables for this tree: {sorted(available)}")
    return available[ref]


def _emit(doc: dict, table: str, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt in ("json", "both"):
        out.write(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    if fmt in ("table", "both"):
        out.write(table)


def _report_out(report: PropertyReport, fmt: str) -> int:
    _emit(report.to_dict(), report.to_table(), fmt)
    return 0 if report.ok else 1


def _value_pair(ev, P, v, s, controls) -> dict:
    if isinstance(v, MonotoneVariable):
        up = ev.limit(P, v, s, controls)
        up_exact = getattr(ev, "last_exact", True)
        lo = ev.limit(P, -v, s, controls)
        out = {"upper": up.estimate, "lower": -lo.estimate,
               "converged": up.converged and lo.converged, "horizon": max(up.horizon_used, lo.horizon_used)}
    else:
        out = {"upper": ev.upper(P, v, s)}
        up_exact = getattr(ev, "last_exact", True)
        out["lower"] = ev.lower(P, v, s)
    if isinstance(ev, OracleEvaluator):
        out["exact"] = bool(up_exact and ev.last_exact)
    return out


def cmd_eval(args, cfg, routes) -> int:
    P = _tree(args.tree)
    v = _variable(args.var, P.space)
    s = P.space.parse(args.situation)
    controls = RunConfig(tol=cfg["tol"], max_horizon=cfg["max_horizon"]).controls()
    doc = {"tree": args.tree, "var": args.var, "situation": P.space.format(s) or "□"}
    evaluators = {"game": GameEvaluator(), "oracle": OracleEvaluator(cfg["budget"], cfg["seed"])}
    for r in routes:
        doc[r] = _value_pair(evaluators[r], P, v, s, controls)
    status = 0
    if len(routes) == 2:
        g, o = doc["game"], doc["oracle"]
        delta = max(abs(g["upper"] - o["upper"]), abs(g["lower"] - o["lower"]))
        doc["max_delta"] = delta
        if o.get("exact"):
            doc["agree"] = delta <= cfg["tol"]
        else:
            doc["agree"] = o["upper"] <= g["upper"] + cfg["tol"] and o["lower"] >= g["lower"] - cfg["tol"]
        status = 0 if doc["agree"] else 1
    lines = [f"{doc['var']} on {doc['tree']} given {doc['situation']}"]
    for r in routes:
        extra = "" if "exact" not in doc[r] else f"  exact {doc[r]['exact']}"
        lines.append(f"  {r:<7} upper {doc[r]['upper']:.12g}  lower {doc[r]['lower']:.12g}{extra}")
    if "agree" in doc:
        lines.append(f"  max |delta| {doc['max_delta']:.3g}  agree {doc['agree']}")
    _emit(doc, "\n".join(lines) + "\n", cfg["format"])
    return status


def _check_trees(args) -> dict:
    if args.tree:
        return {ref: _tree(ref) for ref in args.tree}
    return corpus.load_corpus_trees()


def cmd_check(args, cfg) -> int:
    config = RunConfig(tol=cfg["tol"], budget=cfg["budget"], max_horizon=cfg["max_horizon"],
                       seeds=(cfg["seed"],))
    seed = cfg["seed"]
    trees = _check_trees(args)
    report = PropertyReport(args.suite, seed=seed, config=config.echo())
    if args.suite == "coherence":
        sets = corpus.corpus_credal_sets() if not args.tree else {
            f"{name}/{i}": K for name, T in trees.items()
            for i, K in enumerate([T.models] if T.rule == "uniform" else T.models.values())}
        report.merge(check_coherence_suite(sets, args.samples or 20, seed, tol=cfg["tol"]))
    elif args.suite == "axioms":
        for name, P in trees.items():
            report.merge(check_global_axioms(P, args.samples or 200, seed, tol=cfg["tol"]), f"[{name}]")
    elif args.suite == "capacity":
        for name, P in trees.items():
            report.merge(check_capacity(P, (), args.samples or 50, seed, tol=cfg["tol"]), f"[{name}]")
    elif args.suite == "equivalence":
        for name, P in trees.items():
            vs = corpus.corpus_variables(P.space)
            if args.var:
                vs = {ref: _variable(ref, P.space) for ref in args.var}
            sits = [t for L in range(args.depth + 1) for t in P.space.situations(L)]
            sub = equivalence_report(P, vs, sits, config, seed)
            for row in sub.rows:
                row["case"] = f"{name}: {row['case']}"
            report.merge(sub, f"[{name}]")
    else:
        P = trees.get("binary_two_vertex") or next(iter(trees.values()))
        sets = corpus.corpus_credal_sets()
        for fault, (suite, tag) in sorted(FAULTS.items()):
            sub = run_fault(fault, P, sets, seed)
            caught = tag in sub.tags()
            report.cases += 1
            report.rows.append({"case": fault, "suite": suite, "expected": tag,
                                "tripped": ",".join(sorted(sub.tags())) or "-", "caught": caught})
            if not caught:
                report.add(f"uncaught {fault}", 0.0, 1.0, -1.0)
    return _report_out(report, cfg["format"])


def cmd_converge(args, cfg) -> int:
    P = _tree(args.tree)
    v = _variable(args.var, P.space)
    if not isinstance(v, MonotoneVariable):
        raise ImprexError("converge needs a monotone variable, not a finitary table")
    s = P.space.parse(args.situation)
    controls = RunConfig(tol=cfg["tol"], max_horizon=cfg["max_horizon"]).controls()
    ev = GameEvaluator() if args.route == "game" else OracleEvaluator(cfg["budget"], cfg["seed"])
    status = 0
    try:
        res = ev.limit(P, v, s, controls)
    except NotConverged as err:
        res, status = err.result, 1
    doc = {"tree": args.tree, "var": args.var, "situation": P.space.format(s) or "□", "route": args.route,
           "estimate": res.estimate, "bound_direction": res.bound_direction, "converged": res.converged,
           "diverged": res.diverged, "horizon_used": res.horizon_used}
    if args.route == "oracle":
        doc["exact"] = res.exact
    if args.trace or args.table:
        doc["trace"] = [[n, val] for n, val in res.trace]
    lines = [f"{args.var} given {doc['situation']}: {res.estimate:.12g} ({res.bound_direction}, "
             f"converged {res.converged}, horizon {res.horizon_used})"]
    if args.table:
        lines = ["horizon\tvalue"] + [f"{n}\t{val:.17g}" for n, val in res.trace]
    _emit(doc, "\n".join(lines) + "\n", cfg["format"])
    return status


def cmd_supermartingale(args, cfg) -> int:
    P = _tree(args.tree)
    s = P.space.parse(args.situation)
    if args.export:
        if not args.var:
            raise ImprexError("--export needs --var")
        v = _variable(args.var, P.space)
        if isinstance(v, MonotoneVariable):
            raise ImprexError("witnesses are exported for finitary variables only")
        res = game_upper(P, v, s)
        doc = supermartingale_document(res.witness)
        dump(doc, args.export)
        out = {"exported": args.export, "value": res.value, "entries": len(doc["values"])}
        _emit(out, f"wrote {len(doc['values'])} entries to {args.export}; value {res.value:.12g}\n", cfg["format"])
        return 0
    M = load_supermartingale(args.verify)
    if M.space != P.space:
        raise ImprexError("supermartingale and tree use different state spaces")
    rep = is_supermartingale(M, P, tol=cfg["tol"])
    doc = {"verified": args.verify, "checked": rep.checked,
           "violations": [[P.space.format(t) or "□", slack] for t, slack in rep.violations],
           "below_bound": [[P.space.format(t) or "□", val] for t, val in rep.below_bound]}
    ok = rep.ok
    if args.var:
        v = _variable(args.var, P.space)
        horizon = v.horizon if not isinstance(v, MonotoneVariable) else M.depth
        verdict = hedging_check(M, v, s, horizon, args.paths, cfg["seed"], cfg["tol"])
        doc["hedging"] = {"ok": verdict.ok, "paths_checked": verdict.paths_checked,
                          "exhaustive": verdict.exhaustive,
                          "counterexample": None if verdict.counterexample is None
                          else P.space.format(verdict.counterexample)}
        doc["start"] = M(s)
        ok = ok and verdict.ok
    doc["ok"] = ok
    table = f"supermartingale {args.verify}: {rep.checked} situations checked, " \
            f"{len(rep.violations)} violations, ok {ok}\n"
    _emit(doc, table, cfg["format"])
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _settings(args)
    try:
        if args.command == "eval":
            routes = ("game", "oracle") if args.route == "both" else (args.route,)
            return cmd_eval(args, cfg, routes)
        if args.command == "oracle":
            return cmd_eval(args, cfg, ("oracle",))
        if args.command == "check":
            return cmd_check(args, cfg)
        if args.command == "converge":
            return cmd_converge(args, cfg)
        return cmd_supermartingale(args, cfg)
    except (ImprexError, ValueError, OSError) as err:
        print(f"imprex: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
