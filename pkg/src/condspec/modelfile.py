"""Model specification files.

A model file is a YAML mapping.  Recognised keys::

    family: poisson-power        # required, one of models.FAMILIES
    q: 1.5                       # poisson-power and custom-table only
    A: 1.0                       # poisson-power only
    lambda:                      # poisson-power only, default constant 1
      kind: constant             # or log-power: value * log(e + j)^power
      value: 1.0
      power: 1.0
    horizon: 400                 # unlabelled forests only
    tau: 1e-12                   # truncation tolerance
    tilt: 1.0                    # multiply P[Z_j = i] by tilt^(j i)
    beyond: zero                 # custom-table: zero or error
    table:                       # custom-table rows [j, s, probability]
      - [1, 0, 0.5]
      - [1, 1, 0.5]

Errors cite the line of the offending node.  Scalars are read as plain
strings and converted here, so ``1e-12`` is a number even though YAML 1.1
would keep it a string.
"""

from __future__ import annotations

from collections import defaultdict

import yaml

from .dist import DEFAULT_TAU
from .errors import CondSpecError, SpecParseError
from .models import DEFAULT_HORIZON, FAMILIES, FOREST_Q, LambdaFn, ModelSpec

KEYS = {
    "poisson-power": {"family", "q", "A", "lambda", "tau", "tilt"},
    "custom-table": {"family", "q", "table", "beyond", "tau", "tilt"},
}
for _f in FOREST_Q:
    KEYS[_f] = {"family", "horizon", "tau", "tilt"} if "unlabelled" in _f else {"family", "tau", "tilt"}


def _line(node) -> int:
    return node.start_mark.line + 1


class _Reader:
    def __init__(self, source):
        self.source = source

    def fail(self, msg, node=None):
        raise SpecParseError(msg, None if node is None else _line(node), self.source)

    def mapping(self, node, what) -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(f"{what} must be a mapping", node)
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                self.fail("mapping keys must be plain names", k)
            if k.value in out:
                self.fail(f"duplicate key {k.value!r}", k)
            out[k.value] = (k, v)
        return out

    def scalar(self, node, what) -> str:
        if not isinstance(node, yaml.ScalarNode):
            self.fail(f"{what} must be a single value", node)
        return node.value

    def number(self, node, what, positive=False) -> float:
        s = self.scalar(node, what)
        try:
            v = float(s)
        except ValueError:
            self.fail(f"{what} must be a number, got {s!r}", node)
        if positive and not v > 0:
            self.fail(f"{what} must be positive, got {s}", node)
        return v

    def integer(self, node, what, minimum=None) -> int:
        s = self.scalar(node, what)
        try:
            v = int(s)
        except ValueError:
            self.fail(f"{what} must be an integer, got {s!r}", node)
        if minimum is not None and v < minimum:
            self.fail(f"{what} must be >= {minimum}, got {v}", node)
        return v


def parse_model(text: str, source: str = "<string>") -> ModelSpec:
    """Build a :class:`ModelSpec` from the YAML text of a model file."""
    rd = _Reader(source)
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecParseError(f"not valid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source)
    if root is None:
        rd.fail("empty model file")
    top = rd.mapping(root, "model file")
    if "family" not in top:
        rd.fail("missing required key 'family'", root)
    fk, fv = top["family"]
    family = rd.scalar(fv, "family")
    if family not in FAMILIES:
        rd.fail(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}", fv)
    for key, (kn, _) in top.items():
        if key not in KEYS[family]:
            rd.fail(f"key {key!r} not allowed for family {family}", kn)

    def get(key):
        return top[key][1] if key in top else None

    tau = rd.number(get("tau"), "tau", positive=True) if get("tau") is not None else DEFAULT_TAU
    tilt = rd.number(get("tilt"), "tilt", positive=True) if get("tilt") is not None else 1.0
    try:
        if family == "poisson-power":
            q = rd.number(get("q"), "q", positive=True) if get("q") is not None else 1.5
            A = rd.number(get("A"), "A", positive=True) if get("A") is not None else 1.0
            lam = _parse_lambda(rd, get("lambda")) if get("lambda") is not None else None
            return ModelSpec.poisson_power(A=A, q=q, lam=lam, tau=tau, tilt=tilt)
        if family in FOREST_Q:
            hz = rd.integer(get("horizon"), "horizon", 1) if get("horizon") is not None else DEFAULT_HORIZON
            return ModelSpec.forest(family, horizon=hz, tau=tau, tilt=tilt)
        q = rd.number(get("q"), "q", positive=True) if get("q") is not None else 1.5
        beyond = rd.scalar(get("beyond"), "beyond") if get("beyond") is not None else "zero"
        if beyond not in ("zero", "error"):
            rd.fail(f"beyond must be 'zero' or 'error', got {beyond!r}", get("beyond"))
        if get("table") is None:
            rd.fail("custom-table needs a 'table' of [j, s, probability] rows", root)
        table, first = _parse_table(rd, get("table"))
        spec = ModelSpec.custom(table, q=q, beyond=beyond, tau=tau)
        if tilt != 1:
            spec = spec.tilted(tilt)
        for j in sorted(table):
            # validate each row's mass now rather than at first use
            try:
                spec.species_pmf(j)
            except CondSpecError as exc:
                rd.fail(f"row j={j}: {exc}", first[j])
        return spec
    except SpecParseError:
        raise
    except CondSpecError as exc:
        # semantic failure of a well-formed file: blame the family line
        raise SpecParseError(str(exc), _line(fk), source) from exc


def _parse_lambda(rd: _Reader, node) -> LambdaFn:
    m = rd.mapping(node, "lambda")
    for key, (kn, _) in m.items():
        if key not in ("kind", "value", "power"):
            rd.fail(f"unknown lambda key {key!r}", kn)
    kind = rd.scalar(m["kind"][1], "lambda kind") if "kind" in m else "constant"
    value = rd.number(m["value"][1], "lambda value", positive=True) if "value" in m else 1.0
    if kind == "constant":
        if "power" in m:
            rd.fail("a constant lambda takes no power", m["power"][0])
        return LambdaFn.constant(value)
    if kind == "log-power":
        power = rd.number(m["power"][1], "lambda power") if "power" in m else 1.0
        return LambdaFn.log_power(value, power)
    rd.fail(f"unknown lambda kind {kind!r}; expected constant or log-power", m["kind"][1])


def _parse_table(rd: _Reader, node) -> dict:
    if not isinstance(node, yaml.SequenceNode):
        rd.fail("table must be a list of [j, s, probability] rows", node)
    cells = defaultdict(dict)
    first = {}
    for row in node.value:
        if not isinstance(row, yaml.SequenceNode) or len(row.value) != 3:
            rd.fail("each table row must be [j, s, probability]", row)
        jn, sn, pn = row.value
        j = rd.integer(jn, "j", 1)
        s = rd.integer(sn, "s", 0)
        p = rd.number(pn, "probability")
        if not 0 <= p <= 1:
            rd.fail(f"probability must lie in [0, 1], got {p}", pn)
        if s in cells[j]:
            rd.fail(f"duplicate row for j={j}, s={s}", row)
        cells[j][s] = p
        first.setdefault(j, row)
    if not cells:
        rd.fail("table has no rows", node)
    table = {}
    for j, col in cells.items():
        probs = [0.0] * (max(col) + 1)
        for s, p in col.items():
            probs[s] = p
        table[j] = probs
    return table, first


def load_model(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_model(text, str(path))


def dump_model(spec: ModelSpec) -> str:
    """YAML text that :func:`parse_model` maps back to an equal fingerprint."""
    d = {"family": spec.family}
    if spec.family in ("poisson-power", "custom-table"):
        d["q"] = spec.q
    if spec.family == "poisson-power":
        d["A"] = spec.params.get("A", 1.0)
        d["lambda"] = dict(spec.lam.descriptor)
    if spec.family.startswith("forest-unlabelled"):
        d["horizon"] = spec.horizon
    if spec.family == "custom-table":
        d["beyond"] = spec.params["beyond"]
        d["table"] = [[j, s, p] for j, row in sorted(spec.params["table"].items()) for s, p in enumerate(row)]
    d["tau"] = spec.tau
    if spec.tilt != 1:
        d["tilt"] = spec.tilt
    return yaml.safe_dump(d, sort_keys=False)
