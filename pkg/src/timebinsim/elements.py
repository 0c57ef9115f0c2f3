"""Linear-optical elements and their action on sparse states.

Every element consumes its input rails and produces fresh output rails
(each rail is written once and read once).  An input port given as ``None``
is an unused port fed by vacuum.

Phase conventions:

* beam splitter: transmission ``1/sqrt(2)``, reflection ``i/sqrt(2)``;
  input 1 -> (out1 + i out2)/sqrt(2), input 2 -> (out2 + i out1)/sqrt(2);
* polarizing beam splitter: H transmitted, V reflected, no phase;
* half-wave plate: H <-> V, no phase;
* noise: ``H -> e^{iθ}(γH + ηV)``, ``V -> e^{iθ}(-η* H + γ* V)``.
"""

from __future__ import annotations

import cmath
import contextlib
import math
from dataclasses import dataclass, field, fields, replace
from typing import ClassVar, Mapping, Union

from .errors import DomainError, UnboundSymbolError, ValidationError
from .state import Label, MultiPhotonState, Pol

SQRT1_2 = 1.0 / math.sqrt(2.0)

_reflection = 1j


@contextlib.contextmanager
def reflection_phase_override(phase: complex):
    """Temporarily replace the beam-splitter reflection factor ``i``.

    Only meant for mutation checks of the verification suite.
    """
    global _reflection
    saved = _reflection
    _reflection = complex(phase)
    try:
        yield
    finally:
        _reflection = saved


@dataclass(frozen=True)
class Symbol:
    """A named parameter bound at execution time."""

    name: str

    def __str__(self):
        return "?" + self.name


Param = Union[float, complex, int, Symbol]


def _resolve(value: Param, bindings: Mapping[str, complex]):
    if isinstance(value, Symbol):
        if value.name not in bindings:
            raise UnboundSymbolError([value.name])
        return bindings[value.name]
    return value


@dataclass(frozen=True)
class Element:
    """Base class; subclasses define :meth:`action` on one photon label."""

    inputs: tuple
    outputs: tuple
    label: str | None = field(default=None, kw_only=True)

    kind: ClassVar[str] = "element"
    n_inputs: ClassVar[int | None] = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.n_inputs is not None and len(self.inputs) != self.n_inputs:
            raise DomainError(f"{self.kind} takes {self.n_inputs} input rails, got {len(self.inputs)}")
        if len(self.inputs) != len(self.outputs):
            raise DomainError(f"{self.kind} needs as many outputs as inputs")
        used = [r for r in self.inputs if r is not None]
        if not used:
            raise DomainError(f"{self.kind} needs at least one connected input rail")
        if len(set(used)) != len(used) or len(set(self.outputs)) != len(self.outputs):
            raise DomainError(f"{self.kind} lists a rail twice")
        if any(not r for r in self.outputs):
            raise DomainError(f"{self.kind} output rails must be named")

    @property
    def params(self) -> dict:
        skip = {"inputs", "outputs", "label"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}

    def symbols(self) -> set[str]:
        return {v.name for v in self.params.values() if isinstance(v, Symbol)}

    def resolve(self, bindings: Mapping[str, complex]) -> "Element":
        if not self.symbols():
            return self
        missing = self.symbols() - set(bindings)
        if missing:
            raise UnboundSymbolError(missing)
        return replace(self, **{k: _resolve(v, bindings) for k, v in self.params.items()})

    def action(self, lab: Label) -> list[tuple[Label, complex]]:
        raise NotImplementedError

    def apply(self, state: MultiPhotonState) -> MultiPhotonState:
        if self.symbols():
            raise UnboundSymbolError(self.symbols())
        ins = {r for r in self.inputs if r is not None}
        act = self.action

        def step(key, amp):
            hits = [i for i, lab in enumerate(key) if lab.rail in ins]
            if not hits:
                return [(key, amp)]
            branches = [(key, amp)]
            for i in hits:
                branches = [
                    (k[:i] + (new,) + k[i + 1:], a * c)
                    for k, a in branches
                    for new, c in act(k[i])
                ]
            return branches

        return state.map_terms(step)


@dataclass(frozen=True)
class BeamSplitter(Element):
    kind: ClassVar[str] = "bs"
    n_inputs: ClassVar[int] = 2

    def action(self, lab):
        port = self.inputs.index(lab.rail)
        same, other = self.outputs[port], self.outputs[1 - port]
        return [
            (lab.moved(rail=same), SQRT1_2),
            (lab.moved(rail=other), _reflection * SQRT1_2),
        ]


@dataclass(frozen=True)
class PolarizingBeamSplitter(Element):
    """Two-port PBS.  H on input 1 and V on input 2 leave through output 1;
    V on input 1 and H on input 2 leave through output 2.

    The split form ``(in, None) -> (outH, outV)`` and the merge form
    ``(inH, inV) -> (out, reject)`` are both this element.
    """

    kind: ClassVar[str] = "pbs"
    n_inputs: ClassVar[int] = 2

    def action(self, lab):
        port = self.inputs.index(lab.rail)
        straight = (port == 0) == (lab.pol is Pol.H)
        return [(lab.moved(rail=self.outputs[0 if straight else 1]), 1.0)]


@dataclass(frozen=True)
class HalfWavePlate(Element):
    kind: ClassVar[str] = "hwp"
    n_inputs: ClassVar[int] = 1

    def action(self, lab):
        return [(Label(self.outputs[0], lab.pol.flipped(), lab.time), 1.0)]


@dataclass(frozen=True)
class Delay(Element):
    ticks: int = 0

    kind: ClassVar[str] = "delay"
    n_inputs: ClassVar[int] = 1

    def __post_init__(self):
        super().__post_init__()
        if isinstance(self.ticks, Symbol):
            raise DomainError("delay ticks must be a literal integer")
        if isinstance(self.ticks, bool) or int(self.ticks) != self.ticks:
            raise DomainError(f"delay ticks must be an integer, got {self.ticks!r}")
        if self.ticks < 0:
            raise DomainError(f"delay ticks must be >= 0, got {self.ticks}")
        object.__setattr__(self, "ticks", int(self.ticks))

    def action(self, lab):
        return [(lab.moved(rail=self.outputs[0], dt=self.ticks), 1.0)]


@dataclass(frozen=True)
class PhaseShifter(Element):
    phase: Param = 0.0

    kind: ClassVar[str] = "phase"
    n_inputs: ClassVar[int] = 1

    def action(self, lab):
        return [(lab.moved(rail=self.outputs[0]), cmath.exp(1j * float(self.phase)))]


@dataclass(frozen=True)
class NoiseParams:
    """Collective channel noise: global phase ``theta`` and SU(2) column (gamma, eta)."""

    theta: float = 0.0
    gamma: complex = 1.0
    eta: complex = 0.0

    def __post_init__(self):
        check_noise(self.theta, self.gamma, self.eta)

    @classmethod
    def from_angles(cls, theta: float, chi: float, phi: float) -> "NoiseParams":
        return cls(theta, math.cos(chi), math.sin(chi) * cmath.exp(1j * phi))

    def bindings(self, theta: str, gamma: str, eta: str) -> dict:
        return {theta: self.theta, gamma: self.gamma, eta: self.eta}


def check_noise(theta, gamma, eta):
    for name, v in (("theta", theta), ("gamma", gamma), ("eta", eta)):
        z = complex(v)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValidationError(f"noise {name} must be finite")
    if complex(theta).imag != 0:
        raise ValidationError("noise theta must be real")
    n2 = abs(complex(gamma)) ** 2 + abs(complex(eta)) ** 2
    if abs(n2 - 1.0) > 1e-12:
        raise ValidationError(f"noise is not unitary: |gamma|^2 + |eta|^2 = {n2!r}")


@dataclass(frozen=True)
class NoiseChannel(Element):
    """The same (θ, γ, η) disturbance applied to every rail in ``inputs``."""

    theta: Param = 0.0
    gamma: Param = 1.0
    eta: Param = 0.0

    kind: ClassVar[str] = "noise"

    def __post_init__(self):
        super().__post_init__()
        if None in self.inputs:
            raise DomainError("noise channel inputs must be connected rails")
        if not self.symbols():
            check_noise(self.theta, self.gamma, self.eta)

    def action(self, lab):
        out = self.outputs[self.inputs.index(lab.rail)]
        ph = cmath.exp(1j * float(complex(self.theta).real))
        g, e = complex(self.gamma), complex(self.eta)
        if lab.pol is Pol.H:
            return [(Label(out, Pol.H, lab.time), ph * g), (Label(out, Pol.V, lab.time), ph * e)]
        return [
            (Label(out, Pol.H, lab.time), -ph * e.conjugate()),
            (Label(out, Pol.V, lab.time), ph * g.conjugate()),
        ]


ELEMENT_KINDS = {
    cls.kind: cls
    for cls in (BeamSplitter, PolarizingBeamSplitter, HalfWavePlate, Delay, PhaseShifter, NoiseChannel)
}


def _expect(el, cls):
    if not isinstance(el, cls):
        raise DomainError(f"expected {cls.__name__}, got {type(el).__name__}")
    return el.apply


def apply_beam_splitter(state: MultiPhotonState, bs: BeamSplitter) -> MultiPhotonState:
    return _expect(bs, BeamSplitter)(state)


def apply_pbs(state: MultiPhotonState, pbs: PolarizingBeamSplitter) -> MultiPhotonState:
    return _expect(pbs, PolarizingBeamSplitter)(state)


def apply_hwp(state: MultiPhotonState, hwp: HalfWavePlate) -> MultiPhotonState:
    return _expect(hwp, HalfWavePlate)(state)


def apply_delay(state: MultiPhotonState, d: Delay) -> MultiPhotonState:
    return _expect(d, Delay)(state)


def apply_noise(state: MultiPhotonState, ch: NoiseChannel) -> MultiPhotonState:
    return _expect(ch, NoiseChannel)(state)


def apply_phase(state: MultiPhotonState, p: PhaseShifter) -> MultiPhotonState:
    return _expect(p, PhaseShifter)(state)
