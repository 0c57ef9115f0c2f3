"""Compile netlist documents into validated circuits; execute and serialize them."""

from __future__ import annotations

import heapq
import json
import math
import weakref
from dataclasses import dataclass
from typing import Iterator, Mapping

from .. import elements as elements_mod
from ..elements import (
    BeamSplitter,
    Delay,
    Element,
    HalfWavePlate,
    NoiseChannel,
    PhaseShifter,
    PolarizingBeamSplitter,
    Symbol,
)
from ..errors import CircuitError, DomainError, SimulationError, UnboundSymbolError
from ..state import Label, MultiPhotonState
from .parser import (
    DetectStmt,
    ElementStmt,
    NetlistDocument,
    RailDecl,
    format_statement,
    parse,
)

CANONICAL_FORMAT = "timebinsim.circuit/1"

# kind -> (element class, {param: (required, allowed value types)})
_REAL = (int, float)
_NUM = (int, float, complex)
_SPECS = {
    "bs": (BeamSplitter, {}),
    "pbs": (PolarizingBeamSplitter, {}),
    "pbs_merge": (PolarizingBeamSplitter, {}),
    "hwp": (HalfWavePlate, {}),
    "delay": (Delay, {"ticks": (True, (int,))}),
    "phase": (PhaseShifter, {"phi": (True, _REAL + (Symbol,))}),
    "noise": (
        NoiseChannel,
        {
            "theta": (False, _REAL + (Symbol,)),
            "gamma": (False, _NUM + (Symbol,)),
            "eta": (False, _NUM + (Symbol,)),
        },
    ),
}
# netlist parameter name -> element field name
_FIELD = {"phi": "phase"}


@dataclass(frozen=True)
class Circuit:
    """A validated, topologically ordered application plan over named rails."""

    name: str
    sources: tuple
    plan: tuple
    terminals: tuple
    symbols: frozenset = frozenset()

    @property
    def rails(self) -> tuple:
        out = list(self.sources)
        for el in self.plan:
            out.extend(el.outputs)
        return tuple(out)

    def element(self, label: str) -> Element:
        for el in self.plan:
            if el.label == label:
                return el
        raise KeyError(label)


def _stmt_name(stmt) -> str:
    return format_statement(stmt).split(" ->")[0]


def _err(msg, stmt) -> CircuitError:
    return CircuitError(msg, stmt.span.line if stmt.span else 0, stmt.span.column if stmt.span else 0)


def _where(stmt) -> str:
    return f"line {stmt.span.line}" if stmt.span else "?"


def _make_element(stmt: ElementStmt) -> Element:
    cls, allowed = _SPECS[stmt.kind]
    kwargs = {}
    seen = set()
    for name, val in stmt.params:
        if name in seen:
            raise _err(f"parameter {name!r} given twice", stmt)
        seen.add(name)
        if name not in allowed:
            raise _err(f"{stmt.kind} does not take parameter {name!r}", stmt)
        types = allowed[name][1]
        if isinstance(val, bool) or not isinstance(val, types):
            raise _err(f"parameter {name!r} of {stmt.kind} has invalid value {val!r}", stmt)
        kwargs[_FIELD.get(name, name)] = val
    for name, (required, _) in allowed.items():
        if required and name not in seen:
            raise _err(f"{stmt.kind} requires parameter {name!r}", stmt)
    inputs = list(stmt.inputs)
    if stmt.kind in ("bs", "pbs") and len(inputs) == 1:
        inputs.append(None)
    if stmt.kind == "pbs_merge" and len(inputs) != 2:
        raise _err("pbs_merge takes exactly two input rails (inH, inV)", stmt)
    if stmt.kind not in ("bs", "pbs", "pbs_merge") and None in inputs:
        raise _err(f"{stmt.kind} cannot take a vacuum port", stmt)
    try:
        return cls(tuple(inputs), tuple(stmt.outputs), label=stmt.label, **kwargs)
    except SimulationError as exc:
        raise _err(str(exc), stmt) from None


def compile(doc: NetlistDocument) -> Circuit:  # noqa: A001 - mirrors the DSL verb
    """Validate ``doc`` and order its elements topologically.

    Each rail must be produced exactly once (declaration or element output)
    and consumed at most once.  Ties in the topological order are broken by
    document order.
    """
    producer: dict[str, object] = {}
    consumer: dict[str, object] = {}
    sources: list[str] = []
    elements: list[tuple[ElementStmt, Element]] = []
    detects: list[DetectStmt] = []
    labels: dict[str, ElementStmt] = {}

    def produce(rail, stmt):
        if rail in producer:
            prev = producer[rail]
            raise _err(f"rail {rail!r} is produced twice ({_where(prev)} and {_where(stmt)})", stmt)
        producer[rail] = stmt

    for stmt in doc.statements:
        if isinstance(stmt, RailDecl):
            for r in stmt.names:
                produce(r, stmt)
                sources.append(r)
        elif isinstance(stmt, DetectStmt):
            detects.append(stmt)
        else:
            el = _make_element(stmt)
            if stmt.label:
                if stmt.label in labels:
                    raise _err(f"duplicate element label {stmt.label!r}", stmt)
                labels[stmt.label] = stmt
            for r in el.outputs:
                produce(r, stmt)
            for r in el.inputs:
                if r is None:
                    continue
                if r in consumer:
                    prev = consumer[r]
                    raise _err(
                        f"rail {r!r} is consumed twice: '{_stmt_name(prev)}' ({_where(prev)}) "
                        f"and '{_stmt_name(stmt)}' ({_where(stmt)})",
                        stmt,
                    )
                consumer[r] = stmt
            elements.append((stmt, el))

    for stmt, el in elements:
        for r in el.inputs:
            if r is not None and r not in producer:
                raise _err(f"rail {r!r} is never produced", stmt)

    # Kahn's algorithm, document order as tie-break
    index = {id(stmt): i for i, (stmt, _) in enumerate(elements)}
    deps: dict[int, set[int]] = {}
    users: dict[int, list[int]] = {i: [] for i in range(len(elements))}
    for i, (stmt, el) in enumerate(elements):
        d = set()
        for r in el.inputs:
            if r is None:
                continue
            p = producer[r]
            if isinstance(p, ElementStmt):
                d.add(index[id(p)])
        deps[i] = d
        for j in d:
            users[j].append(i)
    ready = [i for i, d in deps.items() if not d]
    heapq.heapify(ready)
    remaining = {i: len(d) for i, d in deps.items()}
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for u in users[i]:
            remaining[u] -= 1
            if remaining[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != len(elements):
        stuck = min(i for i in range(len(elements)) if i not in set(order))
        raise _err("cyclic dependency between elements", elements[stuck][0])

    unconsumed = [r for r in producer if r not in consumer]
    # production order: declared sources, then outputs in plan order
    prod_order = list(sources) + [r for i in order for r in elements[i][1].outputs]
    terminals = tuple(r for r in prod_order if r not in consumer)
    if detects:
        listed: list[str] = []
        for d in detects:
            for r in d.rails:
                if r not in producer:
                    raise _err(f"unknown rail {r!r} in detect", d)
                if r in consumer:
                    raise _err(f"detected rail {r!r} is consumed by '{_stmt_name(consumer[r])}'", d)
                if r in listed:
                    raise _err(f"rail {r!r} detected twice", d)
                listed.append(r)
        missing = [r for r in terminals if r not in listed]
        if missing:
            raise _err(f"terminal rail {missing[0]!r} is not detected", detects[-1])
        terminals = tuple(listed)
    assert set(terminals) == set(unconsumed)

    plan = tuple(elements[i][1] for i in order)
    symbols = frozenset(s for el in plan for s in el.symbols())
    return Circuit(doc.name, tuple(sources), plan, terminals, symbols)


def compile_text(text: str) -> Circuit:
    return compile(parse(text))


def _bound_plan(circuit: Circuit, bindings: Mapping | None) -> list[Element]:
    bindings = dict(bindings or {})
    missing = set(circuit.symbols) - set(bindings)
    if missing:
        raise UnboundSymbolError(missing)
    return [el.resolve(bindings) for el in circuit.plan]


def _check_input(circuit: Circuit, state: MultiPhotonState):
    src = set(circuit.sources)
    for key in state:
        for lab in key:
            if lab.rail not in src:
                raise DomainError(f"input term on rail {lab.rail!r}, which is not a source rail")


def iter_execute(
    circuit: Circuit, state: MultiPhotonState, bindings: Mapping | None = None
) -> Iterator[tuple[Element, MultiPhotonState]]:
    """Yield ``(element, state_after)`` for each element of the plan."""
    plan = _bound_plan(circuit, bindings)
    _check_input(circuit, state)
    for el in plan:
        state = el.apply(state)
        yield el, state


def execute(
    circuit: Circuit,
    state: MultiPhotonState,
    bindings: Mapping | None = None,
    *,
    until: str | None = None,
) -> MultiPhotonState:
    """Apply the plan to ``state``.  With ``until`` stop after the element
    carrying that label."""
    plan = _bound_plan(circuit, bindings)
    _check_input(circuit, state)
    if until is not None and until not in {el.label for el in plan}:
        raise DomainError(f"no element labelled {until!r}")
    for el in plan:
        state = el.apply(state)
        if until is not None and el.label == until:
            break
    return state


class Propagator:
    """Single-photon transfer map of a bound circuit, cached per input label.

    Photons never share an element's action, so an ``n``-photon evolution is
    the tensor product of single-photon evolutions of each slot; this is
    what makes large ``n`` tractable.  Each rail is consumed at most once,
    so a label's future depends on its rail alone.  Futures that cross no
    symbolic element are shared between all propagators of one circuit.
    """

    def __init__(self, circuit: Circuit, bindings: Mapping | None = None):
        self.circuit = circuit
        self.plan = _bound_plan(circuit, bindings)
        self._consumer, static = _rail_structure(circuit)
        self._static = static
        per_circuit = _SHARED.setdefault(circuit, {})
        self._shared = per_circuit.setdefault(elements_mod._reflection, {})
        self._local: dict[Label, dict] = {}
        self._cache: dict[Label, MultiPhotonState] = {}

    def _future(self, lab: Label) -> dict:
        memo = self._shared if self._static[lab.rail] else self._local
        out = memo.get(lab)
        if out is not None:
            return out
        idx = self._consumer.get(lab.rail)
        if idx is None:
            out = {lab: 1.0 + 0j}
        else:
            out = {}
            for new, c in self.plan[idx].action(lab):
                for fin, a in self._future(new).items():
                    out[fin] = out.get(fin, 0j) + c * a
        memo[lab] = out
        return out

    def __call__(self, label: Label) -> MultiPhotonState:
        out = self._cache.get(label)
        if out is None:
            if label.rail not in self.circuit.sources:
                raise DomainError(f"input on rail {label.rail!r}, which is not a source rail")
            out = MultiPhotonState({(lab,): a for lab, a in self._future(label).items()}, n=1)
            self._cache[label] = out
        return out


_SHARED: "weakref.WeakKeyDictionary[Circuit, dict]" = weakref.WeakKeyDictionary()
_STRUCTURE: "weakref.WeakKeyDictionary[Circuit, tuple]" = weakref.WeakKeyDictionary()


def _rail_structure(circuit: Circuit) -> tuple[dict, dict]:
    """Consumer element index per rail, and whether everything downstream of
    a rail is free of symbols."""
    got = _STRUCTURE.get(circuit)
    if got is None:
        consumer = {}
        for i, el in enumerate(circuit.plan):
            for r in el.inputs:
                if r is not None:
                    consumer[r] = i
        static = {}
        for el in reversed(circuit.plan):
            ok = not el.symbols() and all(static.get(o, True) for o in el.outputs)
            for r in el.inputs:
                if r is not None:
                    static[r] = ok
        for r in circuit.rails:
            static.setdefault(r, True)
        got = _STRUCTURE[circuit] = (consumer, static)
    return got


# ---------------------------------------------------------------- serialization


def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("non-finite parameter cannot be serialized")
    return format(x, ".17g")


def _encode_param(v):
    if isinstance(v, Symbol):
        return {"symbol": v.name}
    if isinstance(v, bool):
        raise DomainError("boolean parameter")
    if isinstance(v, int):
        return {"int": v}
    if isinstance(v, float):
        return {"real": v}
    z = complex(v)
    return {"re": z.real, "im": z.imag}


def _decode_param(d):
    if "symbol" in d:
        return Symbol(d["symbol"])
    if "int" in d:
        return int(d["int"])
    if "real" in d:
        return float(d["real"])
    return complex(float(d["re"]), float(d["im"]))


def _dump(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(k)}: {_dump(obj[k], indent + 1)}' for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(_dump(x) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + "  " + _dump(x, indent + 1) for x in obj) + "\n" + pad + "]"
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _num(obj)
    raise TypeError(type(obj))


def circuit_to_dict(circuit: Circuit) -> dict:
    plan = []
    for el in circuit.plan:
        entry = {"op": el.kind, "inputs": list(el.inputs), "outputs": list(el.outputs)}
        if el.label is not None:
            entry["label"] = el.label
        params = {k: _encode_param(v) for k, v in el.params.items()}
        if params:
            entry["params"] = params
        plan.append(entry)
    return {
        "format": CANONICAL_FORMAT,
        "name": circuit.name,
        "sources": list(circuit.sources),
        "terminals": list(circuit.terminals),
        "symbols": sorted(circuit.symbols),
        "plan": plan,
    }


def emit_canonical(circuit: Circuit) -> str:
    """Deterministic JSON: sorted keys, two-space indent, floats at 17 significant digits."""
    return _dump(circuit_to_dict(circuit)) + "\n"


def load_canonical(text: str) -> Circuit:
    from ..elements import ELEMENT_KINDS

    data = json.loads(text)
    if data.get("format") != CANONICAL_FORMAT:
        raise DomainError(f"unsupported circuit format {data.get('format')!r}")
    plan = []
    for entry in data["plan"]:
        cls = ELEMENT_KINDS[entry["op"]]
        params = {k: _decode_param(v) for k, v in entry.get("params", {}).items()}
        plan.append(
            cls(tuple(entry["inputs"]), tuple(entry["outputs"]), label=entry.get("label"), **params)
        )
    return Circuit(
        data["name"],
        tuple(data["sources"]),
        tuple(plan),
        tuple(data["terminals"]),
        frozenset(data["symbols"]),
    )


def to_document(circuit: Circuit) -> NetlistDocument:
    """Netlist document whose compilation reproduces ``circuit``."""
    inv_field = {v: k for k, v in _FIELD.items()}
    stmts: list = []
    if circuit.sources:
        stmts.append(RailDecl(tuple(circuit.sources)))
    for el in circuit.plan:
        kind = el.kind
        inputs = el.inputs
        if kind == "pbs" and inputs[1] is None:
            inputs = inputs[:1]
        params = tuple((inv_field.get(k, k), v) for k, v in el.params.items())
        stmts.append(ElementStmt(kind, tuple(inputs), tuple(el.outputs), params, el.label))
    if circuit.terminals:
        stmts.append(DetectStmt(tuple(circuit.terminals)))
    return NetlistDocument(circuit.name, tuple(stmts))


def to_netlist(circuit: Circuit) -> str:
    from .parser import pretty_print

    return pretty_print(to_document(circuit))
