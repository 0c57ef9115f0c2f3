"""Random valid netlists for round-trip and oracle checks."""

from __future__ import annotations

import math

import numpy as np

from ..elements import Symbol
from .parser import DetectStmt, ElementStmt, NetlistDocument, RailDecl

_ARITY = {"bs": 2, "pbs": 2, "pbs_merge": 2, "hwp": 1, "delay": 1, "phase": 1, "noise": None}


def _noise_params(rng, symbolic: bool, tag: str) -> tuple:
    if symbolic:
        return (("theta", Symbol(f"t{tag}")), ("gamma", Symbol(f"g{tag}")), ("eta", Symbol(f"e{tag}")))
    chi, phi, theta = rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi)
    params = [("theta", float(theta)), ("gamma", float(math.cos(chi)))]
    eta = complex(math.sin(chi) * math.cos(phi), math.sin(chi) * math.sin(phi))
    params.append(("eta", eta))
    return tuple(params)


def random_document(
    rng: np.random.Generator,
    *,
    max_sources: int = 3,
    max_elements: int = 8,
    symbols: bool = True,
    shuffle: bool = False,
) -> NetlistDocument:
    """A random document that compiles.

    With ``shuffle`` the element statements are emitted in random order, so
    the compiler's topological sort has real work to do.
    """
    n_src = int(rng.integers(1, max_sources + 1))
    sources = [f"s{i}" for i in range(n_src)]
    live = list(sources)
    stmts = []
    counter = 0
    for e in range(int(rng.integers(0, max_elements + 1))):
        kinds = [k for k, a in _ARITY.items() if a is None or a <= 2]
        kind = kinds[int(rng.integers(len(kinds)))]
        arity = _ARITY[kind]
        if kind == "noise":
            arity = int(rng.integers(1, min(2, len(live)) + 1))
        take = min(arity, len(live))
        picks = [live.pop(int(rng.integers(len(live)))) for _ in range(take)]
        ins = list(picks)
        if arity == 2 and take == 1:
            ins.insert(int(rng.integers(2)), None)
        elif arity == 2 and rng.random() < 0.1 and kind != "noise":
            ins[int(rng.integers(2))] = None
            live.append(picks[0] if ins[0] is None else picks[1])
        outs = []
        for _ in ins:
            counter += 1
            outs.append(f"r{counter}" if rng.random() < 0.8 else f"r{counter}.x'")
        live.extend(outs)
        if kind == "delay":
            params = (("ticks", int(rng.integers(0, 4))),)
        elif kind == "phase":
            if symbols and rng.random() < 0.3:
                val = Symbol(f"phi{e}")
            elif rng.random() < 0.3:
                val = int(rng.integers(-3, 4))
            else:
                val = float(rng.uniform(-math.pi, math.pi))
            params = (("phi", val),)
        elif kind == "noise":
            params = _noise_params(rng, symbols and rng.random() < 0.3, str(e))
        else:
            params = ()
        label = f"E{e}" if rng.random() < 0.5 else None
        stmts.append(ElementStmt(kind, tuple(ins), tuple(outs), params, label))
    if shuffle:
        order = rng.permutation(len(stmts))
        stmts = [stmts[i] for i in order]
    head = [RailDecl(tuple(sources))] if rng.random() < 0.5 else [RailDecl((s,)) for s in sources]
    tail = []
    if rng.random() < 0.5:
        produced = set(sources) | {o for s in stmts for o in s.outputs}
        consumed = {r for s in stmts for r in s.inputs if r is not None}
        term = sorted(produced - consumed)
        rng.shuffle(term)
        tail = [DetectStmt(tuple(term))]
    return NetlistDocument(f"rand{int(rng.integers(1 << 16))}", tuple(head + stmts + tail))


def random_bindings(symbols, rng: np.random.Generator) -> dict:
    """Valid values for the symbols a generated document uses."""
    out = {}
    for name in sorted(symbols):
        out[name] = float(rng.uniform(-math.pi, math.pi))
    for name in sorted(symbols):
        if name.startswith("g") and "e" + name[1:] in symbols:
            chi, phi = rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)
            out[name] = math.cos(chi)
            out["e" + name[1:]] = complex(math.sin(chi) * math.cos(phi), math.sin(chi) * math.sin(phi))
    return out
