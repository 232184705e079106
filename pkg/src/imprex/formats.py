"""Loading and saving trees, variables and supermartingales as JSON documents.

Tree document::

    {"states": ["a", "b"], "kind": "imprecise", "rule": "uniform",
     "credal_sets": {"K": [[0.4, 0.6], [0.7, 0.3]]},
     "assignments": {"*": "K"}}

Stationary assignments map ``"□"`` (the root) and every state label to a
credal-set label. Explicit assignments map every situation shorter than
``depth`` to a label. Precise trees use one vector per label.

Variable documents carry a ``kind`` (see :data:`VARIABLE_KINDS`) and fields
specific to it; tables are either nested lists of shape ``(|X|,) * horizon``
or a mapping from situation strings to values.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import FinitaryGamble, InvalidModel, StateSpace
from .game import Supermartingale, TAIL_RULES
from .local import CredalSet, MassFunction
from .trees import ImpreciseTree, PreciseTree, RULES

SIMPLEX_TOL = 1e-12
ROOT = "□"
VARIABLE_KINDS = ("finitary_table", "hitting_indicator", "hitting_time", "truncated_average",
                  "usc_from_table", "lsc_from_table")


def _read(source) -> dict:
    if isinstance(source, dict):
        return source
    text = Path(source).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidModel(f"{source}: not valid JSON ({err})") from None


def _require(doc: dict, *fields):
    missing = [f for f in fields if f not in doc]
    if missing:
        raise InvalidModel(f"missing field(s): {', '.join(missing)}")


def _check_vector(label: str, vec, d: int) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape != (d,):
        raise InvalidModel(f"credal set {label!r}: vector {vec} does not have {d} entries")
    if not np.all(np.isfinite(v)) or v.min() < -SIMPLEX_TOL or abs(v.sum() - 1.0) > SIMPLEX_TOL:
        raise InvalidModel(f"credal set {label!r}: vector {vec} is not a probability vector")
    return np.clip(v, 0.0, None)


def _situation_key(space: StateSpace, text: str):
    return () if text in ("", "-", ROOT) else space.parse(text)


def load_tree(source):
    """Validate a tree document and build the tree it describes."""
    doc = _read(source)
    _require(doc, "states", "kind", "rule", "credal_sets", "assignments")
    space = StateSpace(doc["states"])
    kind, rule = doc["kind"], doc["rule"]
    if kind not in ("precise", "imprecise"):
        raise InvalidModel(f"kind must be 'precise' or 'imprecise', not {kind!r}")
    if rule not in RULES:
        raise InvalidModel(f"rule must be one of {RULES}, not {rule!r}")

    models = {}
    for label, vecs in doc["credal_sets"].items():
        if not vecs:
            raise InvalidModel(f"credal set {label!r} is empty")
        rows = [_check_vector(label, v, space.size) for v in vecs]
        if kind == "precise":
            if len(rows) != 1:
                raise InvalidModel(f"precise tree: {label!r} must hold exactly one vector")
            models[label] = MassFunction(rows[0])
        else:
            models[label] = CredalSet(rows)

    def lookup(label):
        if label not in models:
            raise InvalidModel(f"assignment refers to unknown credal set {label!r}")
        return models[label]

    assignments = doc["assignments"]
    cls = PreciseTree if kind == "precise" else ImpreciseTree
    if rule == "uniform":
        label = assignments if isinstance(assignments, str) else assignments.get("*")
        if label is None:
            raise InvalidModel("uniform rule needs an assignment for '*'")
        return cls(space, "uniform", lookup(label))
    if rule == "stationary":
        by_key = {}
        for key, label in assignments.items():
            by_key[None if key in ("", "-", ROOT) else space.index(key)] = lookup(label)
        return cls(space, "stationary", by_key)
    _require(doc, "depth")
    depth = int(doc["depth"])
    by_sit = {_situation_key(space, k): lookup(v) for k, v in assignments.items()}
    return cls(space, "explicit", by_sit, depth)


def tree_document(T) -> dict:
    """Inverse of :func:`load_tree` for rule-form trees."""
    space = T.space
    precise = isinstance(T, PreciseTree)
    if T.rule not in RULES:
        raise InvalidModel(f"{T.rule} trees have no document form")

    def rows(m):
        return [m.probs.tolist()] if precise else m.vertices.tolist()

    credal, names = {}, {}

    def name_of(m):
        key = json.dumps(rows(m))
        if key not in names:
            names[key] = f"K{len(names)}"
            credal[names[key]] = rows(m)
        return names[key]

    doc = {"states": list(space.labels), "kind": "precise" if precise else "imprecise", "rule": T.rule}
    if T.rule == "uniform":
        assignments = {"*": name_of(T.models)}
    elif T.rule == "stationary":
        assignments = {(ROOT if k is None else space.labels[k]): name_of(m)
                       for k, m in sorted(T.models.items(), key=lambda kv: -1 if kv[0] is None else kv[0])}
    else:
        assignments = {(space.format(k) or ROOT): name_of(m) for k, m in sorted(T.models.items(),
                                                                                  key=lambda kv: (len(kv[0]), kv[0]))}
        doc["depth"] = T.depth
    doc["credal_sets"] = credal
    doc["assignments"] = assignments
    return doc


def _table(space: StateSpace, doc: dict) -> FinitaryGamble:
    if "values" in doc:
        vals = np.asarray(doc["values"], dtype=float)
        if vals.ndim == 0:
            return FinitaryGamble.constant(space, float(vals))
        return FinitaryGamble(space, vals)
    _require(doc, "table")
    table = {_situation_key(space, k): float(v) for k, v in doc["table"].items()}
    lengths = {len(k) for k in table}
    if len(lengths) != 1:
        raise InvalidModel("table entries must all have the same length")
    n = lengths.pop()
    missing = [space.format(t) for t in space.situations(n) if t not in table]
    if missing:
        raise InvalidModel(f"table is missing situations {missing[:5]}")
    return FinitaryGamble.from_function(space, n, lambda t: table[t])


def load_variable(source, space: StateSpace):
    """Build the finitary gamble or monotone variable a document describes."""
    from .limits import hitting_variable, lsc_from_table, truncated_average, usc_from_table

    doc = _read(source)
    _require(doc, "kind")
    kind = doc["kind"]
    if kind not in VARIABLE_KINDS:
        raise InvalidModel(f"unknown variable kind {kind!r}")
    if kind == "finitary_table":
        return _table(space, doc)
    if kind == "usc_from_table":
        return usc_from_table(_table(space, doc))
    if kind == "lsc_from_table":
        return lsc_from_table(_table(space, doc))
    _require(doc, "targets")
    history = bool(doc.get("include_history", False))
    if kind == "truncated_average":
        _require(doc, "window")
        return truncated_average(space, doc["targets"], int(doc["window"]), history)
    mode = "indicator" if kind == "hitting_indicator" else "time"
    return hitting_variable(space, doc["targets"], mode, doc.get("cap"), history)


def _finite(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def supermartingale_document(M: Supermartingale) -> dict:
    space = M.space
    table = M.table()
    pairs = [[space.format(t) or ROOT, float(v)] for t, v in sorted(table.items(), key=lambda kv: (len(kv[0]), kv[0]))]
    return {"states": list(space.labels), "tail_rule": M.tail_rule,
            "lower_bound": _finite(M.lower_bound), "depth": M.depth, "values": pairs}


def load_supermartingale(source) -> Supermartingale:
    doc = _read(source)
    _require(doc, "states", "tail_rule", "lower_bound", "values")
    space = StateSpace(doc["states"])
    if doc["tail_rule"] not in TAIL_RULES:
        raise InvalidModel(f"unknown tail rule {doc['tail_rule']!r}")
    values = {}
    for text, v in doc["values"]:
        t = _situation_key(space, text)
        if t in values:
            raise InvalidModel(f"situation {text!r} listed twice")
        values[t] = float(v)
    if () not in values:
        raise InvalidModel("supermartingale has no value at the root")
    return Supermartingale(space, values, tail_rule=doc["tail_rule"], lower_bound=float(doc["lower_bound"]),
                           depth=doc.get("depth"))


def dump(doc: dict, path=None) -> str:
    """Deterministic JSON text; written to ``path`` when given."""
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
