"""Twelve-code pedagogical codebook and the offline lexicon classifier.

Each code belongs to one of six parent categories.  Classification is
multi-label: a code fires when any of its lexicon phrases appears in the
text (case-insensitive).  `code_spans` additionally reports the matched
character spans so analyses can weight by span length.
"""

import re
from dataclasses import dataclass

CATEGORIES = ("Conceptual", "Procedural", "Inquiry", "Affective",
              "Safety", "Technical")

# code -> (category, definition, lexicon phrases)
CODEBOOK = {
    "EXP-GOAL": ("Conceptual", "States the goal or purpose of the experiment", (
        "goal of", "purpose of", "aim of", "we will demonstrate",
        "demonstration", "this experiment shows", "sets up the",
        "completing the protocol", "demonstrates")),
    "OBS-CONCEPT": ("Conceptual", "Explains the scientific concept behind an observation", (
        "magnetic flux", "induced current", "induced voltage", "electrons",
        "emit light", "emission color", "carbon dioxide", "ferment",
        "calcium carbonate", "growth medium", "energy", "principle",
        "the concept", "because the", "metabolism", "metabolic",
        "living cells", "organisms", "gels as it cools")),
    "PROC-GUIDE": ("Procedural", "Guides the learner through procedure steps", (
        "next:", "next step", "first,", "then,", "dip the", "hold the",
        "move the", "return the", "place the", "add the", "pour the",
        "seal the", "carry the", "repeat the", "record", "rinse",
        "store the", "let the", "watch the", "note the", "apply a drop",
        "draw acid", "sort the", "pick the next")),
    "EQUIP-OP": ("Procedural", "Describes operating a piece of equipment", (
        "burner", "dropper", "scoop", "wire loop", "petri dish", "meter",
        "flask with its cap", "the stand", "turn on", "switch off",
        "equipment is", "using the same scoop")),
    "PRECAUTION": ("Safety", "Warns about a specific hazard before it occurs", (
        "caution", "may be hot", "too hot", "hazard", "spatter", "splash",
        "avoid", "careful", "with care", "keep hands clear", "do not touch",
        "by accident", "acid contact", "would kill")),
    "HYPOTHESIS": ("Inquiry", "Invites or states a testable prediction", (
        "predict", "hypothesis", "what do you expect", "if the rock contains",
        "will fizz", "expect to see", "points to a", "what happens if")),
    "VAR-CTRL": ("Inquiry", "Identifies controlled or independent variables", (
        "independent variable", "fair test", "keeps that factor constant",
        "controlling the", "control group", "same amount", "consistent measures",
        "measured amounts", "keeps every measured amount consistent",
        "isolates its effect", "temperature control")),
    "RESULT-OBS": ("Inquiry", "Reports what is being observed as a result", (
        "watch the meter", "the meter swings", "meter returns to zero",
        "bubbles", "fizzing", "fizz", "gas buildup", "more gas over time",
        "flame color", "observed", "observations", "visible sign")),
    "RESULT-INT": ("Inquiry", "Interprets what a result means", (
        "means carbonate", "means the yeast", "identifies the metal",
        "interpreting the reaction", "this tells us", "result decides",
        "links motion speed", "links sugar concentration", "turns observation into",
        "classification by", "confirms that", "shows that", "evidence")),
    "AFF-SUPPORT": ("Affective", "Encourages or reassures the learner", (
        "well done", "great job", "you can", "nice work", "don't worry",
        "keep going", "good work", "you are doing")),
    "SAFETY-MGT": ("Safety", "Emphasizes safety management to prevent accidents", (
        "safe distance", "safety", "safely", "stay safe", "keep clear",
        "stay back", "halts immediately", "clear workspace",
        "human hand in workspace", "human intervention", "prevent injury",
        "keeps the bench safe", "racked safely", "stand so nobody",
        "keeps the acid test safe", "test safe", "lab practice",
        "aseptic", "sterile")),
    "TECH-CAP": ("Technical", "Describes the robot's technical execution only", (
        "the robot is", "the robot halts", "robot arm", "gripper",
        "grasping the", "sliding the", "lifting the", "dispensing",
        "pouring", "holding position", "placing the", "moving the magnet",
        "moving the tested rock", "adding", "sealing the", "monitoring the",
        "filling the", "applying", "rinsing the", "pausing operation")),
}

assert len(CODEBOOK) == 12
assert {cat for cat, _, _ in CODEBOOK.values()} == set(CATEGORIES)


@dataclass(frozen=True)
class CodeLabel:
    code: str
    category: str

    def __post_init__(self):
        if self.code not in CODEBOOK:
            raise ValueError(f"unknown code {self.code!r}")
        if CODEBOOK[self.code][0] != self.category:
            raise ValueError(f"{self.code} does not belong to {self.category}")


def label(code: str) -> CodeLabel:
    return CodeLabel(code, CODEBOOK[code][0])


def code_category(code: str) -> str:
    return CODEBOOK[code][0]


def code_spans(text: str):
    """All (code, start, end) lexicon matches in the text."""
    spans = []
    low = text.lower()
    for code, (_, _, phrases) in CODEBOOK.items():
        for phrase in phrases:
            for m in re.finditer(re.escape(phrase), low):
                spans.append((code, m.start(), m.end()))
    return sorted(spans, key=lambda s: (s[1], s[2], s[0]))


def classify_codes(text: str):
    """Multi-label classification; empty/unmatched text gives an empty set."""
    return {label(code) for code, _, _ in code_spans(text)}


def category_char_weights(text: str):
    """Characters covered by each category's matched spans (overlaps allowed)."""
    weights = {cat: 0 for cat in CATEGORIES}
    for code, start, end in code_spans(text):
        weights[code_category(code)] += end - start
    return weights
