"""Dense-matrix reference executor.

Every element is rebuilt as an explicit matrix from its parameters alone
(the sparse ``action`` methods are never called), over an enumerated basis
of rails x {H, V} x time bins ``0..T``.  An element maps its input block
to its output block with a local unitary ``U``; on the full basis it acts
as ``[[0, U^dagger], [U, 0]]`` on (inputs, outputs) and as the identity
elsewhere, which is unitary and agrees with ``U`` on every state the
linear rail discipline can produce.  Delays are cyclic shifts on the time
window; the window is the exact horizon of the circuit, so no amplitude
ever wraps.
"""

from __future__ import annotations

import cmath
import math
from typing import Mapping

import numpy as np

from ..errors import DomainError, ResourceError
from ..netlist.compiler import Circuit, _bound_plan, _check_input
from ..state import PRUNE_THRESHOLD, Label, MultiPhotonState, Pol

DEFAULT_DENSE_LIMIT = 4096
_POLS = (Pol.H, Pol.V)


def _port_pol_matrix(el) -> np.ndarray:
    """Matrix over (port, pol) pairs, index ``2 * port + pol``; rows are outputs."""
    kind = el.kind
    p = len(el.inputs)
    if kind == "bs":
        s = 1 / math.sqrt(2)
        return np.kron(np.array([[s, 1j * s], [1j * s, s]]), np.eye(2))
    if kind == "pbs":
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = 1  # in1 H -> out1 H
        m[3, 1] = 1  # in1 V -> out2 V
        m[2, 2] = 1  # in2 H -> out2 H
        m[1, 3] = 1  # in2 V -> out1 V
        return m
    if kind == "hwp":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "delay":
        return np.eye(2, dtype=complex)
    if kind == "phase":
        return cmath.exp(1j * float(el.phase)) * np.eye(2)
    if kind == "noise":
        g, e = complex(el.gamma), complex(el.eta)
        ch = cmath.exp(1j * float(complex(el.theta).real)) * np.array([[g, -e.conjugate()], [e, g.conjugate()]])
        return np.kron(np.eye(p), ch)
    raise DomainError(f"no dense model for element kind {kind!r}")


def _time_matrix(el, window: int) -> np.ndarray:
    if el.kind != "delay":
        return np.eye(window)
    return np.roll(np.eye(window), el.ticks, axis=0)


def element_matrix(el, window: int = 7) -> np.ndarray:
    """Local matrix of ``el`` on (input ports) x {H, V} x ``window`` time bins."""
    return np.kron(_port_pol_matrix(el), _time_matrix(el, window))


def embedded_matrix(el, window: int = 7) -> np.ndarray:
    """``[[0, U^dagger], [U, 0]]`` on (inputs, outputs): the element's action on
    the full basis restricted to its support."""
    u = element_matrix(el, window)
    z = np.zeros_like(u)
    return np.block([[z, u.conj().T], [u, z]])


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def horizon(circuit: Circuit, state: MultiPhotonState) -> int:
    """Latest time bin any amplitude can reach."""
    latest = {r: 0 for r in circuit.sources}
    for key in state:
        for lab in key:
            latest[lab.rail] = max(latest[lab.rail], lab.time)
    for el in circuit.plan:
        t = max(latest[r] for r in el.inputs if r is not None)
        t += el.ticks if el.kind == "delay" else 0
        for r in el.outputs:
            latest[r] = t
    return max(latest.values(), default=0)


def _components(circuit: Circuit) -> dict:
    parent = {r: r for r in circuit.rails}

    def find(r):
        while parent[r] != r:
            parent[r] = parent[parent[r]]
            r = parent[r]
        return r

    for el in circuit.plan:
        rails = [r for r in el.inputs if r is not None] + list(el.outputs)
        for r in rails[1:]:
            parent[find(r)] = find(rails[0])
    return {r: find(r) for r in circuit.rails}


class _Basis:
    def __init__(self, rails: list, window: int):
        self.rails = rails
        self.window = window
        self.pos = {r: i for i, r in enumerate(rails)}

    def __len__(self):
        return len(self.rails) * 2 * self.window

    def index(self, rail, pol: Pol, t: int) -> int:
        return (self.pos[rail] * 2 + _POLS.index(pol)) * self.window + t

    def block(self, rails) -> list:
        w = self.window
        return [(self.pos[r] * 2 + q) * w + t for r in rails for q in range(2) for t in range(w)]


def dense_oracle_execute(
    circuit: Circuit,
    state: MultiPhotonState,
    bindings: Mapping | None = None,
    *,
    limit: int = DEFAULT_DENSE_LIMIT,
) -> MultiPhotonState:
    """Execute ``circuit`` with explicit per-element matrices.

    Each photon gets a tensor axis over the rails of the circuit components
    it occupies (plus one phantom rail per vacuum port).  Raises
    :class:`ResourceError` if any axis exceeds ``limit`` basis vectors.
    """
    plan = _bound_plan(circuit, bindings)
    _check_input(circuit, state)
    n = state.n
    window = horizon(circuit, state) + 1
    comp = _components(circuit)

    phantoms = {}
    for i, el in enumerate(plan):
        for p, r in enumerate(el.inputs):
            if r is None:
                phantoms[(i, p)] = f"<vac {i}.{p}>"

    bases = []
    for j in range(n):
        roots = {comp[key[j].rail] for key in state}
        rails = [r for r in circuit.rails if comp[r] in roots]
        for (i, p), name in phantoms.items():
            el = plan[i]
            if any(comp[r] in roots for r in el.outputs):
                rails.append(name)
        b = _Basis(rails, window)
        if len(b) > limit:
            raise ResourceError(
                f"dense basis of photon {j + 1} has {len(b)} vectors (limit {limit}); use the sparse executor"
            )
        bases.append(b)

    psi = np.zeros(tuple(len(b) for b in bases), dtype=complex)
    for key, amp in state.items():
        psi[tuple(bases[j].index(lab.rail, lab.pol, lab.time) for j, lab in enumerate(key))] += amp

    for i, el in enumerate(plan):
        u = element_matrix(el, window)
        ins = [phantoms[(i, p)] if r is None else r for p, r in enumerate(el.inputs)]
        for j, b in enumerate(bases):
            if el.outputs[0] not in b.pos:
                continue
            view = np.moveaxis(psi, j, 0)
            ii, oo = b.block(ins), b.block(el.outputs)
            x_in, x_out = view[ii].copy(), view[oo].copy()
            view[oo] = np.tensordot(u, x_in, axes=1)
            view[ii] = np.tensordot(u.conj().T, x_out, axes=1)

    terms = {}
    names = [dict(enumerate(b.rails)) for b in bases]
    for idx in zip(*np.nonzero(np.abs(psi) ** 2 >= PRUNE_THRESHOLD)):
        key = []
        for j, flat in enumerate(idx):
            w = bases[j].window
            rail = names[j][flat // (2 * w)]
            if rail.startswith("<vac"):
                raise DomainError("amplitude reached a vacuum port; circuit is not rail-linear")
            key.append(Label(rail, _POLS[(flat // w) % 2], int(flat % w)))
        terms[tuple(key)] = complex(psi[idx])
    return MultiPhotonState(terms, n=n)
