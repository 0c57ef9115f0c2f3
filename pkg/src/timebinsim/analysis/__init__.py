"""Post-selection, outcome accounting, timing checks, dense oracle and sweeps."""

from .postselect import PostSelection, PostSelectionRule, postselect
from .timing import DecoderReport, arrival_time_decoder

__all__ = [
    "DecoderReport",
    "PostSelection",
    "PostSelectionRule",
    "arrival_time_decoder",
    "postselect",
]
