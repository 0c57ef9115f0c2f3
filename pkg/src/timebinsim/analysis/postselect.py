"""Post-selection of terminal states by arrival time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import DomainError
from ..state import Label, MultiPhotonState, norm_squared, renormalize
from .timing import arrival_class


@dataclass(frozen=True)
class PostSelectionRule:
    """Keep photons arriving at ``spatial_bin + pol_bin`` ticks.

    ``terminals`` classifies every terminal rail as ``(port, logical_rail)``:
    the port the rail belongs to and the input rail its amplitude encodes.
    """

    spatial_bin: int = 1
    pol_bin: int = 3
    terminals: Mapping = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not 0 < self.spatial_bin < 2:
            raise DomainError("the selected spatial bin must lie strictly between 0 and 2 ticks")
        if self.pol_bin < 1:
            raise DomainError("the selected polarization bin (the UPI delay k) must be >= 1")

    @property
    def k(self) -> int:
        return self.pol_bin

    @property
    def target_time(self) -> int:
        return self.spatial_bin + self.pol_bin

    def classify(self, lab: Label):
        try:
            return self.terminals[lab.rail]
        except KeyError:
            raise DomainError(f"rail {lab.rail!r} is not a classified terminal rail") from None


@dataclass
class PostSelection:
    selected: dict  # port tuple -> renormalized logical state
    probabilities: dict  # port tuple -> probability
    discard: float
    discarded: dict  # arrival-class string -> probability

    @property
    def success(self) -> float:
        return sum(self.probabilities.values())


def postselect(state: MultiPhotonState, rule: PostSelectionRule) -> PostSelection:
    """Split ``state`` into per-port-tuple selected states and discarded mass.

    Selected terms are relabelled onto their logical rails at time 0.  The
    selected probabilities plus ``discard`` equal the norm of ``state``.
    """
    target = rule.target_time
    groups: dict[tuple, dict] = {}
    discarded: dict[str, float] = {}
    for key, amp in state.items():
        info = [rule.classify(lab) for lab in key]
        if all(lab.time == target for lab in key):
            ports = tuple(port for port, _ in info)
            new_key = tuple(Label(logical, lab.pol, 0) for lab, (_, logical) in zip(key, info))
            g = groups.setdefault(ports, {})
            g[new_key] = g.get(new_key, 0j) + amp
        else:
            cls = "|".join(arrival_class(lab.time, rule.k) for lab in key)
            discarded[cls] = discarded.get(cls, 0.0) + abs(amp) ** 2
    selected, probs = {}, {}
    for ports in sorted(groups, key=lambda p: tuple(map(str, p))):
        sub = MultiPhotonState(groups[ports], n=state.n)
        p = norm_squared(sub)
        if p == 0.0:
            continue
        probs[ports] = p
        selected[ports] = renormalize(sub)
    discarded = dict(sorted(discarded.items()))
    return PostSelection(selected, probs, sum(discarded.values()), discarded)
