"""Builders for the single-photon, photon-pair and n-photon transmission networks.

Every photon gets its own copy of the apparatus:

* encoder: ``b`` is delayed by one tick, BS1 mixes ``a``/``b`` into arms A
  and B (the spatial qubit now lives in time bins 0 and 1 of each arm);
  in each arm an unbalanced polarizing interferometer (PBS1, HWP on the
  long path, ``k``-tick delay, BS2) turns polarization into a time bin
  carried by H light and splits the arm into channels 1 and 2;
* channel: collective noise with its own (θ, γ, η) symbols;
* decoder: BS3 with HWP and ``k``-tick delay on the reflected path, a
  two-port PBS2 with outputs a' and b', then BS4 with a one-tick delay on
  the reflected output so that the spatial modes realign.

Each (arm, channel, a'/b') terminal port consists of two rails carrying the
logical spatial modes ``a`` and ``b``.  Keeping only photons that arrive at
``1 + k`` ticks rejects every noise-corrupted component.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from .analysis.postselect import PostSelectionRule
from .elements import (
    BeamSplitter,
    Delay,
    HalfWavePlate,
    NoiseChannel,
    NoiseParams,
    PolarizingBeamSplitter,
    Symbol,
)
from .errors import DomainError, NormalizationError, ResourceError
from .netlist.compiler import Circuit, Propagator
from .state import Label, MultiPhotonState, Pol, make_product_state

ARMS = ("A", "B")
CHANNELS = (1, 2)
OUTPUTS = ("a'", "b'")
POL_PORT_NAMES = {(1, "a'"): "p", (1, "b'"): "q", (2, "a'"): "k", (2, "b'"): "l"}
DEFAULT_MAX_PHOTONS = 4


@dataclass(frozen=True)
class ProtocolSpec:
    """Input coefficients: polarization ``alpha|H> + beta|V>`` and spatial
    ``alpha_p|a> + beta_p|b>`` (GHZ form over all photons when ``n > 1``)."""

    alpha: complex = 1.0
    beta: complex = 0.0
    alpha_p: complex = 1.0
    beta_p: complex = 0.0
    n: int = 1
    k: int = 3
    max_photons: int = DEFAULT_MAX_PHOTONS

    def __post_init__(self):
        for a, b, what in ((self.alpha, self.beta, "polarization"), (self.alpha_p, self.beta_p, "spatial")):
            nrm = abs(complex(a)) ** 2 + abs(complex(b)) ** 2
            if abs(nrm - 1.0) > 1e-9:
                raise NormalizationError(f"{what} coefficients have squared norm {nrm!r}, expected 1")
        if self.n < 1:
            raise DomainError(f"photon count must be >= 1, got {self.n}")
        if self.n > self.max_photons:
            raise ResourceError(
                f"{self.n} photons exceed the configured maximum of {self.max_photons} "
                f"(the selected state alone grows as 8^n port tuples)"
            )
        if self.k < 2:
            raise DomainError(f"the UPI delay must be at least 2 ticks, got k={self.k}")


@dataclass(frozen=True, order=True)
class TerminalPort:
    photon: int  # 0-based slot index
    arm: str
    channel: int
    output: str

    @property
    def pol_port(self) -> str:
        """Decoder class p, q (channel 1) or k, l (channel 2)."""
        return POL_PORT_NAMES[(self.channel, self.output)]

    def __str__(self):
        return f"{self.arm}{self.channel}{self.output}"


@dataclass(frozen=True, order=True)
class ChannelKey:
    photon: int
    arm: str
    channel: int

    def __str__(self):
        return f"p{self.photon + 1}.{self.arm}{self.channel}"


@dataclass(frozen=True)
class LocalCorrection:
    """Per-photon Pauli-frame fix: optional flips, then phases on ``b``/``V``."""

    rails: tuple  # (logical a rail, logical b rail)
    spatial_flip: bool = False
    spatial_phase: float = 0.0
    pol_flip: bool = False
    pol_phase: float = 0.0
    phase: float = 0.0

    def describe(self) -> str:
        ops = []
        if self.pol_flip:
            ops.append("pol bit-flip")
        if self.pol_phase:
            ops.append("pol sign-flip" if _is_pi(self.pol_phase) else f"pol phase {self.pol_phase:.6g}")
        if self.spatial_flip:
            ops.append("spatial swap")
        if self.spatial_phase:
            ops.append(
                "spatial sign-flip" if _is_pi(self.spatial_phase) else f"spatial phase {self.spatial_phase:.6g}"
            )
        return " + ".join(ops) or "identity"


@dataclass(frozen=True)
class Correction:
    photons: tuple  # LocalCorrection per photon

    @property
    def global_phase(self) -> float:
        return _wrap(sum(lc.phase for lc in self.photons))

    def describe(self) -> str:
        return "; ".join(lc.describe() for lc in self.photons)


def _is_pi(x: float) -> bool:
    return abs(abs(x) - math.pi) < 1e-12


def _wrap(x: float) -> float:
    """Phase in (-pi, pi], snapped to multiples of pi/2 within 1e-9."""
    y = math.remainder(x, 2 * math.pi)
    if y <= -math.pi:
        y += 2 * math.pi
    q = round(y / (math.pi / 2))
    if abs(y - q * math.pi / 2) < 1e-9:
        y = q * math.pi / 2
        if y <= -math.pi:
            y += 2 * math.pi
    return y


@dataclass(frozen=True)
class Protocol:
    """A built network together with everything needed to analyse it."""

    spec: ProtocolSpec
    circuit: Circuit
    input_rails: tuple  # per photon (a rail, b rail)
    terminal_map: Mapping = field(hash=False)  # rail -> (TerminalPort, logical rail)
    channels: Mapping = field(hash=False)  # ChannelKey -> (theta, gamma, eta) symbol names
    corrections: Mapping = field(hash=False)  # (photon, arm, channel, output) -> LocalCorrection

    @property
    def n(self) -> int:
        return len(self.input_rails)

    @property
    def k(self) -> int:
        return self.spec.k

    def ports(self, photon: int = 0) -> tuple:
        return tuple(
            TerminalPort(photon, arm, ch, out) for arm in ARMS for ch in CHANNELS for out in OUTPUTS
        )

    def rule(self) -> PostSelectionRule:
        return PostSelectionRule(1, self.k, self.terminal_map)

    def input_state(self) -> MultiPhotonState:
        s = self.spec
        return self.state_for(s.alpha, s.beta, s.alpha_p, s.beta_p)

    def state_for(self, alpha, beta, alpha_p, beta_p) -> MultiPhotonState:
        """The protocol's input form with other coefficients."""
        spatial = [{a: alpha_p, b: beta_p} for a, b in self.input_rails]
        pol = [{Pol.H: alpha, Pol.V: beta} for _ in self.input_rails]
        return make_product_state(spatial, pol, correlated=self.n > 1)

    def noise_bindings(self, noise=None) -> dict:
        """Bindings for every channel symbol.

        ``noise`` may be one :class:`NoiseParams` shared by all channels, a
        mapping ``ChannelKey -> NoiseParams`` (missing channels noiseless),
        or ``None`` for a noiseless run.
        """
        out = {}
        for key, names in self.channels.items():
            if noise is None:
                p = NoiseParams()
            elif isinstance(noise, NoiseParams):
                p = noise
            else:
                p = noise.get(key, NoiseParams())
            out.update(p.bindings(*names))
        return out

    def netlist(self) -> str:
        from .netlist.compiler import to_netlist

        return to_netlist(self.circuit)


# ---------------------------------------------------------------- construction


class _Builder:
    def __init__(self, k: int):
        self.k = k
        self.sources: list[str] = []
        self.plan: list = []
        self.terminals: list[str] = []
        self.terminal_map: dict = {}
        self.channels: dict = {}

    def add(self, el):
        self.plan.append(el)

    def photon(self, j: int, n: int):
        pf = f"p{j + 1}." if n > 1 else ""
        k = self.k
        a, b = pf + "a", pf + "b"
        self.sources += [a, b]
        self.add(Delay((b,), (pf + "b.d",), 1, label=pf + "DL0"))
        self.add(BeamSplitter((a, pf + "b.d"), (pf + "A", pf + "B"), label=pf + "BS1"))
        for arm in ARMS:
            x = pf + arm
            # encoder UPI: H -> short path S, V -> long path L (flipped to H, delayed k)
            self.add(PolarizingBeamSplitter((x, None), (x + ".S", x + ".L"), label=f"{pf}PBS1.{arm}"))
            self.add(HalfWavePlate((x + ".L",), (x + ".Lh",), label=f"{pf}HWP1.{arm}"))
            self.add(Delay((x + ".Lh",), (x + ".Ld",), k, label=f"{pf}DL1.{arm}"))
            self.add(BeamSplitter((x + ".S", x + ".Ld"), (x + "1", x + "2"), label=f"{pf}BS2.{arm}"))
            for ch in CHANNELS:
                c = f"{x}{ch}"
                names = tuple(f"{pf}{v}.{arm}{ch}" for v in ("theta", "gamma", "eta"))
                self.channels[ChannelKey(j, arm, ch)] = names
                self.add(
                    NoiseChannel(
                        (c,), (c + ".n",), *(Symbol(s) for s in names), label=f"{pf}N.{arm}{ch}"
                    )
                )
                # decoder UPI: reflected path flipped and delayed k, recombined on PBS2
                self.add(BeamSplitter((c + ".n", None), (c + ".S", c + ".L"), label=f"{pf}BS3.{arm}{ch}"))
                self.add(HalfWavePlate((c + ".L",), (c + ".Lh",), label=f"{pf}HWP2.{arm}{ch}"))
                self.add(Delay((c + ".Lh",), (c + ".Ld",), k, label=f"{pf}DL2.{arm}{ch}"))
                self.add(
                    PolarizingBeamSplitter(
                        (c + ".S", c + ".Ld"), (c + ".a'", c + ".b'"), label=f"{pf}PBS2.{arm}{ch}"
                    )
                )
                for out in OUTPUTS:
                    o = f"{c}.{out}"
                    tag = f"{arm}{ch}{out}"
                    self.add(BeamSplitter((o, None), (o + ".b", o + ".r"), label=f"{pf}BS4.{tag}"))
                    self.add(Delay((o + ".r",), (o + ".a",), 1, label=f"{pf}DL3.{tag}"))
                    port = TerminalPort(j, arm, ch, out)
                    self.terminals += [o + ".a", o + ".b"]
                    self.terminal_map[o + ".a"] = (port, a)
                    self.terminal_map[o + ".b"] = (port, b)
        return a, b


_NAMES = {1: "single_photon", 2: "photon_pair"}


def _build(spec: ProtocolSpec) -> Protocol:
    bld = _Builder(spec.k)
    rails = tuple(bld.photon(j, spec.n) for j in range(spec.n))
    symbols = frozenset(s for names in bld.channels.values() for s in names)
    circuit = Circuit(
        _NAMES.get(spec.n, f"photons_{spec.n}"),
        tuple(bld.sources),
        tuple(bld.plan),
        tuple(bld.terminals),
        symbols,
    )
    proto = Protocol(spec, circuit, rails, bld.terminal_map, bld.channels, {})
    return replace(proto, corrections=_derive_corrections(proto))


def build_single_photon_circuit(spec: ProtocolSpec) -> Protocol:
    """The one-photon network; ``spec.n`` is ignored."""
    return _build(replace(spec, n=1))


def build_two_photon_circuit(spec: ProtocolSpec) -> Protocol:
    """Two apparatus copies fed by the hyperentangled pair; ``spec.n`` is ignored."""
    return _build(replace(spec, n=2))


def build_n_photon_circuit(spec: ProtocolSpec) -> Protocol:
    return _build(spec)


def build(spec: ProtocolSpec) -> Protocol:
    return _build(spec)


# ---------------------------------------------------------------- corrections

# generic reference channel: both noise branches populated
_REFERENCE_NOISE = NoiseParams(0.0, math.sqrt(0.5), math.sqrt(0.5))


def _solve_local(columns: dict, rails: tuple, tol: float = 1e-9) -> LocalCorrection:
    """Fit ``out = c (X^fs D(φs)) ⊗ (X^fp D(φp)) in`` to a 4x4 port map.

    ``columns[(s, p)]`` is the selected output (dict keyed by ``(s', p')``,
    with s in {0, 1} for logical a/b and p in {0, 1} for H/V) for basis input
    ``(s, p)``.
    """
    def entry(col, s, p):
        return columns[col].get((s, p), 0j)

    def nonzero(col):
        return [sp for sp, v in columns[col].items() if abs(v) > tol]

    hits = nonzero((0, 0))
    if len(hits) != 1:
        raise DomainError(f"port map is not a monomial: {columns}")
    fs, fp = hits[0]
    c = entry((0, 0), fs, fp)
    ds = entry((1, 0), 1 - fs, fp) / c
    dp = entry((0, 1), fs, 1 - fp) / c
    expect = {
        (0, 0): {(fs, fp): c},
        (1, 0): {(1 - fs, fp): c * ds},
        (0, 1): {(fs, 1 - fp): c * dp},
        (1, 1): {(1 - fs, 1 - fp): c * ds * dp},
    }
    for col, want in expect.items():
        got = columns[col]
        for sp in set(got) | set(want):
            if abs(got.get(sp, 0j) - want.get(sp, 0j)) > tol * max(1.0, abs(c)):
                raise DomainError("port map is not a local Pauli frame")
    if abs(abs(ds) - 1) > tol or abs(abs(dp) - 1) > tol:
        raise DomainError("port map is not unitary up to scale")
    return LocalCorrection(
        rails,
        spatial_flip=bool(fs),
        spatial_phase=_wrap(-cmath.phase(ds)),
        pol_flip=bool(fp),
        pol_phase=_wrap(-cmath.phase(dp)),
        phase=_wrap(-cmath.phase(c)),
    )


def _derive_corrections(proto: Protocol) -> dict:
    """Propagate the four logical basis states of each photon through the
    circuit (reference noise on every channel) and fit each port's frame."""
    prop = Propagator(proto.circuit, proto.noise_bindings(_REFERENCE_NOISE))
    rule = proto.rule()
    table = {}
    for j, (a, b) in enumerate(proto.input_rails):
        per_port: dict = {}
        for s, rail in enumerate((a, b)):
            for p, pol in enumerate((Pol.H, Pol.V)):
                out = prop(Label(rail, pol, 0))
                sel = _select_unnormalized(out, rule, (a, b))
                for port, vec in sel.items():
                    per_port.setdefault(port, {})[(s, p)] = vec
        for port in proto.ports(j):
            cols = per_port.get(port, {})
            columns = {(s, p): cols.get((s, p), {}) for s in (0, 1) for p in (0, 1)}
            table[(j, port.arm, port.channel, port.output)] = _solve_local(columns, (a, b))
    return table


def _select_unnormalized(out: MultiPhotonState, rule: PostSelectionRule, rails: tuple) -> dict:
    """Selected single-photon amplitudes per port, keyed by logical (s, p)."""
    res: dict = {}
    for (lab,), amp in out.items():
        if lab.time != rule.target_time:
            continue
        port, logical = rule.terminals[lab.rail]
        s = rails.index(logical)
        p = 0 if lab.pol is Pol.H else 1
        d = res.setdefault(port, {})
        d[(s, p)] = d.get((s, p), 0j) + amp
    return res


def correction_for(proto: Protocol, ports) -> Correction:
    """Correction restoring the input state at the given terminal port tuple."""
    if isinstance(ports, TerminalPort):
        ports = (ports,)
    ports = tuple(ports)
    if len(ports) != proto.n:
        raise DomainError(f"expected {proto.n} ports, got {len(ports)}")
    locs = []
    for j, port in enumerate(ports):
        key = (j, port.arm, port.channel, port.output)
        if not isinstance(port, TerminalPort) or port.photon != j or key not in proto.corrections:
            raise DomainError(f"unknown terminal port {port!r} for photon {j}")
        locs.append(proto.corrections[key])
    return Correction(tuple(locs))


def apply_correction(state: MultiPhotonState, correction: Correction) -> MultiPhotonState:
    """Apply a correction to a logical (post-selected, relabelled) state."""
    if state.n != len(correction.photons):
        raise DomainError("correction and state disagree on photon count")
    g = cmath.exp(1j * correction.global_phase)

    def step(key, amp):
        new = []
        for lab, lc in zip(key, correction.photons):
            s = lc.rails.index(lab.rail)
            if lc.spatial_flip:
                s = 1 - s
            pol = lab.pol.flipped() if lc.pol_flip else lab.pol
            if s == 1:
                amp *= cmath.exp(1j * lc.spatial_phase)
            if pol is Pol.V:
                amp *= cmath.exp(1j * lc.pol_phase)
            new.append(Label(lc.rails[s], pol, lab.time))
        return [(tuple(new), amp * g)]

    return state.map_terms(step)
