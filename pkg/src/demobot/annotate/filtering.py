"""Annotation filtering: keep items that parse and whose safety status
matches the chunk's hand-present flag; everything else is dropped and
counted by reason."""

from dataclasses import dataclass, field

from ..errors import MissingField, UnknownSafetyStatus
from .schema import SAFETY_STOP, parse_annotation


@dataclass
class FilterReport:
    total: int = 0
    kept: int = 0
    drops: dict = field(default_factory=dict)   # reason -> count

    @property
    def keep_rate(self) -> float:
        return self.kept / self.total if self.total else 0.0

    def as_dict(self):
        return {"total": self.total, "kept": self.kept,
                "keep_rate": self.keep_rate,
                "drops": dict(sorted(self.drops.items()))}


def filter_annotations(batch, chunk_hand_flags):
    """Filter raw annotation texts against their chunks' hand flags.

    Returns (kept Annotations, FilterReport).  Drop reasons:
    missing_field, unknown_safety_status, safety_mismatch.
    """
    if len(batch) != len(chunk_hand_flags):
        raise ValueError("batch and hand flags must have equal length")
    report = FilterReport(total=len(batch))
    kept = []
    for raw, hand in zip(batch, chunk_hand_flags):
        try:
            ann = parse_annotation(raw)
        except MissingField:
            report.drops["missing_field"] = report.drops.get("missing_field", 0) + 1
            continue
        except UnknownSafetyStatus:
            report.drops["unknown_safety_status"] = \
                report.drops.get("unknown_safety_status", 0) + 1
            continue
        if (ann.safety_status == SAFETY_STOP) != bool(hand):
            report.drops["safety_mismatch"] = \
                report.drops.get("safety_mismatch", 0) + 1
            continue
        kept.append(ann)
    report.kept = len(kept)
    return kept, report
