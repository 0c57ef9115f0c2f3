"""Outcome tables: per-port probability, correction and corrected fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

import numpy as np

from ..elements import NoiseParams
from ..errors import DomainError
from ..netlist.compiler import Propagator
from ..state import Label, MultiPhotonState, fidelity, norm_squared, renormalize
from .postselect import postselect
from .timing import arrival_class, decode_arrival

SELECTED_CLASS = "middle/SL/LS"


@dataclass(frozen=True)
class OutcomeRow:
    ports: tuple
    probability: float
    correction: object
    fidelity: float

    @property
    def port_label(self) -> str:
        return port_label(self.ports)

    @property
    def pol_class(self) -> str:
        return "".join(p.pol_port for p in self.ports)


@dataclass
class OutcomeTable:
    n: int
    k: int
    rows: list
    discard: float
    discarded: dict = field(default_factory=dict)
    total_norm: float = 1.0
    spatial_marginal: float | None = None
    pol_marginal: float | None = None

    @property
    def success(self) -> float:
        return math.fsum(r.probability for r in self.rows)

    @property
    def min_fidelity(self) -> float | None:
        return min((r.fidelity for r in self.rows), default=None)


@dataclass(frozen=True)
class Summary:
    total: float
    discard: float
    worst_fidelity: float | None
    per_port: dict
    pol_classes: dict
    spatial_marginal: float | None = None


def port_label(ports) -> str:
    return "|".join(str(p) for p in ports)


def _bindings(protocol, noise, bindings):
    if bindings is not None:
        return dict(bindings)
    if noise is None or isinstance(noise, NoiseParams):
        return protocol.noise_bindings(noise)
    if isinstance(noise, Mapping) and all(isinstance(k, str) for k in noise):
        return dict(noise)
    return protocol.noise_bindings(noise)


def _split_photon(out: MultiPhotonState, rule, rails):
    """Selected amplitudes per port and the full output split by arrival class."""
    selected: dict = {}
    classes: dict = {}
    for (lab,), amp in out.items():
        cls = arrival_class(lab.time, rule.k)
        classes.setdefault(cls, {})[lab] = amp
        if lab.time == rule.target_time:
            port, logical = rule.classify(lab)
            d = selected.setdefault(port, {})
            key = Label(logical, lab.pol, 0)
            d[key] = d.get(key, 0j) + amp
    return selected, classes


def _gram(vectors: list, labels_in: list) -> np.ndarray:
    m = len(labels_in)
    g = np.zeros((m, m), dtype=complex)
    for i in range(m):
        for j in range(i, m):
            vi, vj = vectors[i], vectors[j]
            small, large = (vi, vj) if len(vi) <= len(vj) else (vj, vi)
            s = sum(vi[k].conjugate() * vj[k] for k in small if k in large)
            g[i, j] = s
            g[j, i] = np.conj(s)
    return g


def run_protocol(protocol, noise=None, *, bindings=None, state: MultiPhotonState | None = None) -> OutcomeTable:
    """Execute ``protocol`` photon by photon and build its outcome table.

    The evolution factorizes over photons, so each distinct input label is
    propagated once and the selected ``n``-photon states are assembled by
    tensoring per-photon selected amplitudes.  Discarded and total
    probabilities come from per-photon Gram matrices, so they are exact
    without materializing the full output state.
    """
    from ..protocols import apply_correction, correction_for

    psi = protocol.input_state() if state is None else state
    if psi.n != protocol.n:
        raise DomainError("input state photon count does not match the protocol")
    prop = Propagator(protocol.circuit, _bindings(protocol, noise, bindings))
    rule = protocol.rule()
    n = protocol.n
    terms = list(psi.items())

    per_slot_labels = [sorted({key[j] for key, _ in terms}) for j in range(n)]
    sel = []  # per slot: label -> {port: {logical label: amp}}
    cls = []  # per slot: label -> {class: {label: amp}}
    for j in range(n):
        s_j, c_j = {}, {}
        for lab in per_slot_labels[j]:
            s_j[lab], c_j[lab] = _split_photon(prop(lab), rule, protocol.input_rails[j])
        sel.append(s_j)
        cls.append(c_j)

    # selected states per port tuple
    groups: dict = {}
    for key, amp in terms:
        options = [list(sel[j][key[j]].items()) for j in range(n)]
        for combo in product(*options):
            ports = tuple(p for p, _ in combo)
            g = groups.setdefault(ports, {})
            parts = [list(vec.items()) for _, vec in combo]
            for labs in product(*parts):
                new_key = tuple(l for l, _ in labs)
                a = amp
                for _, c in labs:
                    a *= c
                g[new_key] = g.get(new_key, 0j) + a

    rows = []
    for ports in sorted(groups):
        sub = MultiPhotonState(groups[ports], n=n)
        p = norm_squared(sub)
        if p < 1e-30:
            continue
        corr = correction_for(protocol, ports)
        fid = fidelity(apply_correction(renormalize(sub), corr), psi)
        rows.append(OutcomeRow(ports, p, corr, fid))

    # class probabilities via per-photon Gram matrices
    amps = np.array([a for _, a in terms])
    idx = [[per_slot_labels[j].index(key[j]) for key, _ in terms] for j in range(n)]
    class_names = sorted({c for j in range(n) for lab in cls[j] for c in cls[j][lab]})
    grams = []
    for j in range(n):
        gj = {}
        for c in class_names:
            vecs = [cls[j][lab].get(c, {}) for lab in per_slot_labels[j]]
            gj[c] = _gram(vecs, per_slot_labels[j])[np.ix_(idx[j], idx[j])]
        grams.append(gj)
    joint: dict = {}
    for combo in product(class_names, repeat=n):
        m = np.ones((len(terms), len(terms)), dtype=complex)
        for j, c in enumerate(combo):
            m = m * grams[j][c]
        pr = float(np.real(amps.conj() @ m @ amps))
        if pr > 1e-30:
            joint[combo] = pr
    total = math.fsum(joint.values())
    discarded = {"|".join(c): p for c, p in sorted(joint.items()) if any(x != SELECTED_CLASS for x in c)}

    spatial = pol = None
    if all(decode_arrival(t, rule.k) is not None for t in range(0, 3 + 2 * rule.k)):
        spatial = math.fsum(p for c, p in joint.items() if all(x.startswith("middle/") for x in c))
        pol = math.fsum(p for c, p in joint.items() if all(x.endswith("/SL/LS") for x in c))

    return OutcomeTable(
        n=n,
        k=rule.k,
        rows=rows,
        discard=math.fsum(discarded.values()),
        discarded=discarded,
        total_norm=total,
        spatial_marginal=spatial,
        pol_marginal=pol,
    )


def outcome_table_from_state(protocol, output: MultiPhotonState, reference: MultiPhotonState | None = None) -> OutcomeTable:
    """Outcome table from an explicitly executed terminal state."""
    from ..protocols import apply_correction, correction_for

    ref = protocol.input_state() if reference is None else reference
    ps = postselect(output, protocol.rule())
    rows = []
    for ports, st in ps.selected.items():
        corr = correction_for(protocol, ports)
        rows.append(OutcomeRow(ports, ps.probabilities[ports], corr, fidelity(apply_correction(st, corr), ref)))
    rows.sort(key=lambda r: r.ports)
    return OutcomeTable(
        n=protocol.n,
        k=protocol.k,
        rows=rows,
        discard=ps.discard,
        discarded=ps.discarded,
        total_norm=norm_squared(output),
    )


def summarize(table: OutcomeTable) -> Summary:
    per_port = {r.port_label: r.probability for r in table.rows}
    classes: dict = {}
    for r in table.rows:
        classes[r.pol_class] = classes.get(r.pol_class, 0.0) + r.probability
    return Summary(
        total=table.success,
        discard=table.discard,
        worst_fidelity=table.min_fidelity,
        per_port=per_port,
        pol_classes=dict(sorted(classes.items())),
        spatial_marginal=table.spatial_marginal,
    )
