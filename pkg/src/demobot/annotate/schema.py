"""Structured annotation type and its text serialization.

The serialized layout is the exact six-line box the decoder is trained to
emit, so model output can be validated with the same parser:

    [Stage] ...
    [Action] ...
    [Safety Status] Normal | Stop - Human detected
    Learning Focus: ...
    Connection to learning goal: ...
    Next: ...
"""

import re
from dataclasses import dataclass

from ..errors import MissingField, UnknownSafetyStatus

SAFETY_NORMAL = "Normal"
SAFETY_STOP = "Stop_HumanDetected"

_STOP_TEXT = "Stop - Human detected"

_FIELDS = [
    ("stage", r"\[Stage\]"),
    ("action_desc", r"\[Action\]"),
    ("safety_text", r"\[Safety Status\]"),
    ("learning_focus", r"Learning Focus:"),
    ("connection", r"Connection to learning goal:"),
    ("next_step", r"Next:"),
]


@dataclass(frozen=True)
class Annotation:
    stage: str
    action_desc: str
    safety_status: str          # SAFETY_NORMAL or SAFETY_STOP
    learning_focus: str
    connection: str
    next_step: str

    def __post_init__(self):
        for name in ("stage", "action_desc", "learning_focus",
                     "connection", "next_step"):
            if not getattr(self, name).strip():
                raise MissingField(name)
        if self.safety_status not in (SAFETY_NORMAL, SAFETY_STOP):
            raise UnknownSafetyStatus(self.safety_status)

    def serialize(self) -> str:
        safety = SAFETY_NORMAL if self.safety_status == SAFETY_NORMAL else _STOP_TEXT
        return (f"[Stage] {self.stage}\n"
                f"[Action] {self.action_desc}\n"
                f"[Safety Status] {safety}\n"
                f"Learning Focus: {self.learning_focus}\n"
                f"Connection to learning goal: {self.connection}\n"
                f"Next: {self.next_step}")


def serialize_annotation(ann: Annotation) -> str:
    return ann.serialize()


def _parse_safety(text: str) -> str:
    text = text.strip()
    if text == SAFETY_NORMAL:
        return SAFETY_NORMAL
    if text.startswith(_STOP_TEXT):
        return SAFETY_STOP
    raise UnknownSafetyStatus(text)


def parse_annotation(raw: str) -> Annotation:
    """Extract the six labelled fields, tolerating surrounding whitespace.

    Raises MissingField / UnknownSafetyStatus on malformed input.
    """
    values = {}
    for name, label in _FIELDS:
        pattern = rf"^\s*{label}\s*(.*?)\s*$"
        m = re.search(pattern, raw, flags=re.MULTILINE)
        if m is None or not m.group(1).strip():
            raise MissingField(name if name != "safety_text" else "safety_status")
        values[name] = m.group(1).strip()
    return Annotation(
        stage=values["stage"],
        action_desc=values["action_desc"],
        safety_status=_parse_safety(values["safety_text"]),
        learning_focus=values["learning_focus"],
        connection=values["connection"],
        next_step=values["next_step"])
