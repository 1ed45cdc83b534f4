"""Few-shot prompt construction for remote annotators.

A prompt is a deterministic concatenation of task context, exemplars
(at least one each for idle, active-manipulation, and safety-intervention
situations), the chunk summary, and the output-format instruction.
"""

from dataclasses import dataclass, field

REQUIRED_SITUATIONS = ("idle", "active", "safety")

FORMAT_HEADER = """\
Respond in exactly this format:
[Stage] Current demonstration phase
[Action] Robot's current action description
[Safety Status] Normal / Stop - Human detected
Learning Focus: Key concept being demonstrated
Connection to learning goal: How this step relates to learning objectives
Next: Upcoming action or instruction"""


@dataclass
class PromptSpec:
    task_context: str
    exemplars: list = field(default_factory=list)  # (situation, annotation text)
    chunk_summary: str = ""

    def validate(self):
        kinds = {situation for situation, _ in self.exemplars}
        missing = [k for k in REQUIRED_SITUATIONS if k not in kinds]
        if missing:
            raise ValueError(f"prompt spec missing exemplar kinds: {missing}")
        if not self.task_context.strip():
            raise ValueError("empty task context")
        return self


def chunk_summary(stage_name: str, hand_present: bool, progress: float) -> str:
    hand = "a human hand is in the workspace" if hand_present else "no hand present"
    return (f"Current chunk: stage={stage_name}, {hand}, "
            f"stage progress={progress:.2f}")


def build_prompt(spec: PromptSpec) -> str:
    spec.validate()
    parts = ["Task context:", spec.task_context.strip(), "", "Examples:"]
    for situation, text in spec.exemplars:
        parts += [f"--- {situation} ---", text.strip()]
    parts += ["", spec.chunk_summary.strip(), "", FORMAT_HEADER]
    return "\n".join(parts)
