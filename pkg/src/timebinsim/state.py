"""Sparse complex-amplitude states over (rail, polarization, time-bin) labels.

A photon's classical configuration is a :class:`Label`.  An ``n``-photon
state maps ``n``-tuples of labels (one per photon, each photon living on its
own rails) to complex amplitudes.  Time is counted in integer ticks of the
base delay, so delays add exactly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, NormalizationError

# |amplitude|^2 below this is treated as an exact zero and dropped
PRUNE_THRESHOLD = 1e-24


class Pol(str, Enum):
    H = "H"
    V = "V"

    def flipped(self) -> "Pol":
        return Pol.V if self is Pol.H else Pol.H


@dataclass(frozen=True, order=True)
class Label:
    """One photon on ``rail`` with polarization ``pol`` arriving at ``time`` ticks."""

    rail: str
    pol: Pol
    time: int = 0

    def __post_init__(self):
        if not self.rail:
            raise DomainError("rail name must be non-empty")
        if not isinstance(self.pol, Pol):
            object.__setattr__(self, "pol", Pol(self.pol))
        if isinstance(self.time, bool) or int(self.time) != self.time:
            raise DomainError(f"time bin must be an integer, got {self.time!r}")
        object.__setattr__(self, "time", int(self.time))

    def moved(self, rail=None, pol=None, dt: int = 0) -> "Label":
        return Label(
            self.rail if rail is None else rail,
            self.pol if pol is None else pol,
            self.time + dt,
        )

    def __str__(self):
        return f"{self.rail}:{self.pol.value}@{self.time}"


Key = tuple  # tuple[Label, ...]


def _check_amplitude(value) -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"amplitude must be finite, got {value!r}")
    return z


class MultiPhotonState:
    """Immutable sparse state of ``n`` distinguishable photons.

    Terms are stored as ``{(label_1, ..., label_n): amplitude}``.  Every
    operation returns a new state; amplitudes whose squared modulus falls
    under :data:`PRUNE_THRESHOLD` are never stored.
    """

    __slots__ = ("_terms", "_n")

    def __init__(self, terms: Mapping[Key, complex] | Iterable = (), n: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Key, complex] = {}
        for key, amp in items:
            if isinstance(key, Label):
                key = (key,)
            key = tuple(key)
            if n is None:
                n = len(key)
            if len(key) != n:
                raise DomainError(f"term {key} has {len(key)} photons, expected {n}")
            if not all(isinstance(lab, Label) for lab in key):
                raise DomainError(f"term key must be a tuple of Label, got {key!r}")
            acc[key] = acc.get(key, 0j) + _check_amplitude(amp)
        if n is None:
            raise DomainError("photon count of an empty state must be given explicitly")
        if n < 1:
            raise DomainError("photon count must be >= 1")
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_terms", {k: a for k, a in acc.items() if abs(a) ** 2 >= PRUNE_THRESHOLD})

    @classmethod
    def _trusted(cls, terms: dict, n: int) -> "MultiPhotonState":
        obj = cls.__new__(cls)
        object.__setattr__(obj, "_n", n)
        object.__setattr__(obj, "_terms", {k: a for k, a in terms.items() if abs(a) ** 2 >= PRUNE_THRESHOLD})
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("MultiPhotonState is immutable")

    @classmethod
    def basis(cls, *labels: Label, amplitude: complex = 1.0) -> "MultiPhotonState":
        return cls({tuple(labels): amplitude})

    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __contains__(self, key):
        if isinstance(key, Label):
            key = (key,)
        return tuple(key) in self._terms

    def amplitude(self, *labels: Label) -> complex:
        return self._terms.get(tuple(labels), 0j)

    def rails(self, photon: int | None = None) -> set[str]:
        if photon is None:
            return {lab.rail for key in self._terms for lab in key}
        return {key[photon].rail for key in self._terms}

    def map_terms(self, fn) -> "MultiPhotonState":
        """Return the state obtained by sending each term ``(key, amp)`` through
        ``fn``, which yields ``(new_key, new_amp)`` pairs; results are summed."""
        acc: dict = {}
        for key, amp in self._terms.items():
            for new_key, new_amp in fn(key, amp):
                acc[new_key] = acc.get(new_key, 0j) + new_amp
        return MultiPhotonState._trusted(acc, self._n)

    def __add__(self, other: "MultiPhotonState") -> "MultiPhotonState":
        if not isinstance(other, MultiPhotonState):
            return NotImplemented
        if other.n != self.n:
            raise DomainError("cannot add states with different photon counts")
        acc = dict(self._terms)
        for k, a in other._terms.items():
            acc[k] = acc.get(k, 0j) + a
        return MultiPhotonState._trusted(acc, self._n)

    def __mul__(self, factor) -> "MultiPhotonState":
        f = _check_amplitude(factor)
        return MultiPhotonState._trusted({k: a * f for k, a in self._terms.items()}, self._n)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1) * other

    def max_abs_diff(self, other: "MultiPhotonState") -> float:
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.amplitude(*k) - other.amplitude(*k)) for k in keys), default=0.0)

    def __eq__(self, other):
        if not isinstance(other, MultiPhotonState):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    __hash__ = None

    def __repr__(self):
        body = ", ".join(
            f"{'⊗'.join(str(l) for l in k)}: {a:.6g}" for k, a in sorted(self._terms.items())
        )
        return f"MultiPhotonState(n={self._n}, {{{body}}})"


def PhotonState(terms: Mapping[Label, complex]) -> MultiPhotonState:
    """Single-photon state from ``{Label: amplitude}``."""
    return MultiPhotonState({(lab,): amp for lab, amp in terms.items()}, n=1)


def norm_squared(state: MultiPhotonState) -> float:
    return math.fsum(abs(a) ** 2 for a in state._terms.values())


def scale(state: MultiPhotonState, phase: complex) -> MultiPhotonState:
    return state * phase


def renormalize(state: MultiPhotonState) -> MultiPhotonState:
    nrm = norm_squared(state)
    if nrm == 0.0:
        raise DomainError("cannot renormalize the zero state")
    return state * (1.0 / math.sqrt(nrm))


def canonical_times(state: MultiPhotonState) -> MultiPhotonState:
    """Shift each photon's time bins so that its earliest occupied bin is 0."""
    if not state._terms:
        return state
    offsets = [min(key[i].time for key in state._terms) for i in range(state.n)]
    return state.map_terms(
        lambda key, amp: [(tuple(lab.moved(dt=-off) for lab, off in zip(key, offsets)), amp)]
    )


def inner(bra: MultiPhotonState, ket: MultiPhotonState) -> complex:
    """``<bra|ket>`` on identical labels (no time canonicalization)."""
    small, large = (bra, ket) if len(bra) <= len(ket) else (ket, bra)
    total = 0j
    for key in small._terms:
        if key in large._terms:
            total += bra._terms[key].conjugate() * ket._terms[key]
    return total


def fidelity(state: MultiPhotonState, reference: MultiPhotonState) -> float:
    """Global-phase-invariant overlap ``|<ref|state>|^2 / (|state|^2 |ref|^2)``.

    Both states are first shifted so each photon's earliest time bin is 0;
    a post-selected state differs from the input only by a fixed arrival
    delay, which carries no information.
    """
    if state.n != reference.n:
        raise DomainError(f"photon counts differ: {state.n} vs {reference.n}")
    ns, nr = norm_squared(state), norm_squared(reference)
    if ns == 0.0 or nr == 0.0:
        raise DomainError("fidelity is undefined for a zero-norm state")
    ov = inner(canonical_times(reference), canonical_times(state))
    return min(1.0, abs(ov) ** 2 / (ns * nr))


def _amplitude_vector(vec: Mapping, what: str) -> list[tuple[object, complex]]:
    items = [(k, _check_amplitude(v)) for k, v in vec.items()]
    if not items:
        raise DomainError(f"empty {what} amplitude vector")
    nrm = math.fsum(abs(a) ** 2 for _, a in items)
    if abs(nrm - 1.0) > 1e-9:
        raise NormalizationError(f"{what} amplitudes have squared norm {nrm!r}, expected 1")
    return items


def make_product_state(
    spatial: Mapping[str, complex] | Sequence[Mapping[str, complex]],
    pol: Mapping[Pol, complex] | Sequence[Mapping[Pol, complex]],
    correlated: bool = False,
) -> MultiPhotonState:
    """Build a spatial-polarization input state.

    ``spatial`` and ``pol`` give one amplitude mapping per photon (a bare
    mapping means a single photon).  Without ``correlated`` the result is
    the full tensor product.  With ``correlated`` it is the GHZ form
    ``(sum_j c_j |r_j ... r_j>) ⊗ (sum_s d_s |s ... s>)`` where the j-th
    spatial term pairs the j-th rail of every photon; all photons must then
    list the same coefficients in the same order.

    >>> s = make_product_state({"a": 1, "b": 0}, {Pol.H: 1, Pol.V: 0})
    >>> s.amplitude(Label("a", Pol.H, 0))
    (1+0j)
    """
    if isinstance(spatial, Mapping):
        spatial = [spatial]
    if isinstance(pol, Mapping):
        pol = [pol]
    if len(spatial) != len(pol):
        raise DomainError("spatial and polarization vectors disagree on photon count")
    n = len(spatial)
    if n == 0:
        raise DomainError("at least one photon is required")
    sp = [_amplitude_vector(v, "spatial") for v in spatial]
    pl = [[(Pol(k), a) for k, a in _amplitude_vector(v, "polarization")] for v in pol]
    for i in range(n):
        rails = [r for r, _ in sp[i]]
        if len(set(rails)) != len(rails):
            raise DomainError(f"photon {i} lists a rail twice")
    seen: set[str] = set()
    for i in range(n):
        mine = {r for r, _ in sp[i]}
        if mine & seen:
            raise DomainError("photons must occupy disjoint rails")
        seen |= mine

    terms: dict = {}
    if correlated:
        for i in range(1, n):
            if len(sp[i]) != len(sp[0]) or len(pl[i]) != len(pl[0]):
                raise DomainError("correlated form needs equal-length vectors for all photons")
            for (_, a), (_, b) in zip(sp[i] + pl[i], sp[0] + pl[0]):
                if abs(a - b) > 1e-12:
                    raise DomainError("correlated form needs identical coefficients for all photons")
        for j, (_, cs) in enumerate(sp[0]):
            for s, (p, cp) in enumerate(pl[0]):
                key = tuple(Label(sp[i][j][0], pl[i][s][0], 0) for i in range(n))
                terms[key] = terms.get(key, 0j) + cs * cp
        return MultiPhotonState(terms, n=n)

    keys: list[tuple[tuple, complex]] = [((), 1 + 0j)]
    for i in range(n):
        nxt = []
        for key, amp in keys:
            for rail, cs in sp[i]:
                for p, cp in pl[i]:
                    nxt.append((key + (Label(rail, p, 0),), amp * cs * cp))
        keys = nxt
    return MultiPhotonState(keys, n=n)


def random_unit_vector(rng, size: int) -> "list[complex]":
    """Haar-random complex unit vector of ``size`` entries (numpy Generator)."""
    z = rng.normal(size=size) + 1j * rng.normal(size=size)
    z = z / math.sqrt(float((abs(z) ** 2).sum()))
    return [complex(x) for x in z]


def global_phase(theta: float) -> complex:
    return cmath.exp(1j * theta)
