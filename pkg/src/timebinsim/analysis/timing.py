"""Arrival-time bookkeeping for the spatial (0, 1, 2 ticks) x polarization (0, k, 2k) grid."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from ..errors import DomainError

SPATIAL_OFFSETS = (0, 1, 2)
SPATIAL_NAMES = {0: "early", 1: "middle", 2: "late"}
POL_NAMES = ("SS", "SL/LS", "LL")


@dataclass(frozen=True)
class DecoderReport:
    k: int
    unique: bool
    collisions: tuple  # ((spatial, pol_ticks), (spatial, pol_ticks)) pairs sharing a total time

    def __str__(self):
        if self.unique:
            return f"k={self.k}: unique"
        wit = "; ".join(f"(spatial {a[0]}, pol {a[1]}) vs (spatial {b[0]}, pol {b[1]})" for a, b in self.collisions)
        return f"k={self.k}: ambiguous [{wit}]"


def arrival_time_decoder(spatial_bins=SPATIAL_OFFSETS, pol_bins=(0, 1, 2), k: int = 3) -> DecoderReport:
    """Check whether total arrival time determines both offsets.

    ``pol_bins`` are multiples of the UPI delay ``k``; every pair of
    (spatial, polarization) offsets is enumerated and collisions listed.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    combos = sorted(product(sorted(spatial_bins), sorted(m * k for m in pol_bins)))
    by_time: dict[int, list] = {}
    for s, p in combos:
        by_time.setdefault(s + p, []).append((s, p))
    collisions = []
    for t in sorted(by_time):
        group = sorted(by_time[t], key=lambda sp: (-sp[0], sp[1]))
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                collisions.append((group[i], group[j]))
    return DecoderReport(k, not collisions, tuple(collisions))


def decode_arrival(t: int, k: int):
    """``(spatial_offset, pol_offset)`` for a total time, or ``None`` if ambiguous/impossible."""
    hits = [(s, m * k) for s in SPATIAL_OFFSETS for m in range(3) if s + m * k == t]
    return hits[0] if len(hits) == 1 else None


def arrival_class(t: int, k: int) -> str:
    sp = decode_arrival(t, k)
    if sp is None:
        return f"t={t}"
    return f"{SPATIAL_NAMES[sp[0]]}/{POL_NAMES[sp[1] // k]}"
