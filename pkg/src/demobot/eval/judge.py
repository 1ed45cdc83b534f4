"""Text-quality judging on a four-dimension 1-5 rubric.

The default judge is rule-based and fully offline/deterministic; a remote
LLM judge with the same rubric embedded in its prompt is available for
fidelity studies.  Context for a judged text is the chunk it narrates:
{"task_id", "stage", "hand_present"} (instruction optional).
"""

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass

from ..annotate.schema import SAFETY_NORMAL, SAFETY_STOP, parse_annotation
from ..errors import AnnotationError
from ..sim.tasks import get_task

API_KEY_ENV = "DEMOBOT_JUDGE_KEY"

RUBRIC = """\
Score the annotation on four dimensions, each an integer from 1 to 5.
relevance: 1 = completely unrelated to the current action, 5 = precisely
  describes the current action and stage.
pedagogical_value: 1 = no educational content, 2 = simple action
  description only, 5 = clear learning focus tied to the learning goal.
safety_communication: 1 = missing or wrong safety information,
  5 = correct safety status with clear, actionable safety guidance.
fluency: 1 = incoherent or ungrammatical, 5 = well-formed, complete,
  correctly formatted text.
Reply with exactly one line:
relevance=<n> pedagogical_value=<n> safety_communication=<n> fluency=<n>"""

_STOPWORDS = {
    "the", "a", "an", "and", "or", "of", "to", "in", "on", "for", "with",
    "its", "is", "are", "be", "this", "that", "it", "at", "by", "from",
    "into", "as", "we", "our", "so", "then", "their",
}

_CONCEPT_WORDS = (
    "flux", "induced", "induction", "because", "energy", "concept",
    "principle", "understand", "why", "observe", "cells", "reaction",
    "carbonate", "emission", "ferment", "gas", "consistent", "control",
    "links", "shows", "explains", "demonstrat", "prevent", "keeps",
    "means", "identifies", "confirms", "evidence", "isolates", "emit",
    "dissolves", "activates", "classif", "learning", "learn",
)

_SAFETY_WORDS = (
    "safe", "safely", "safety", "caution", "hazard", "careful", "care",
    "hot", "injury", "distance", "clear", "stop", "halts", "sterile",
    "aseptic", "avoid", "spatter", "splash",
)


@dataclass(frozen=True)
class RubricScore:
    relevance: int
    pedagogical_value: int
    safety_communication: int
    fluency: int

    def __post_init__(self):
        for f in ("relevance", "pedagogical_value", "safety_communication",
                  "fluency"):
            v = getattr(self, f)
            if not (isinstance(v, int) and 1 <= v <= 5):
                raise ValueError(f"{f}={v!r} must be an integer in 1..5")

    def as_dict(self):
        return {"relevance": self.relevance,
                "pedagogical_value": self.pedagogical_value,
                "safety_communication": self.safety_communication,
                "fluency": self.fluency}


def _stem(word):
    for suffix in ("ing", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    return word


def _words(text):
    raw = set(re.findall(r"[a-z]+(?:['\-][a-z]+)*", text.lower())) - _STOPWORDS
    return {_stem(w) for w in raw}


def _context_vocab(context):
    vocab = set()
    if context.get("stage"):
        vocab |= _words(context["stage"].replace("_", " "))
    task_id = context.get("task_id")
    if task_id:
        task = get_task(task_id)
        vocab |= _words(task_id.replace("_", " "))
        vocab |= _words(task.instruction)
        for name in task.objects:
            vocab |= _words(name.replace("_", " "))
    if context.get("instruction"):
        vocab |= _words(context["instruction"])
    if context.get("hand_present"):
        vocab |= {"human", "hand", "workspace", "intervention", "pausing",
                  "halts", "stop"}
    return vocab


def _bucket(overlap):
    return min(5, overlap + 1)


def _try_parse(text):
    try:
        return parse_annotation(text)
    except AnnotationError:
        return None


class RuleJudge:
    """Deterministic lexical judge; no network, no randomness."""

    kind = "rule"

    def score(self, text: str, context: dict) -> RubricScore:
        if not text.strip():
            return RubricScore(1, 1, 1, 1)
        low = text.lower()
        ann = _try_parse(text)

        overlap = len(_words(text) & _context_vocab(context))
        relevance = _bucket(overlap)

        pedagogical = 1
        if "learning focus:" in low:
            pedagogical += 1
        if "connection to learning goal:" in low:
            pedagogical += 1
        hits = sum(1 for w in _CONCEPT_WORDS if w in low)
        pedagogical = min(5, pedagogical + min(2, hits))

        safety = 1
        hand = bool(context.get("hand_present"))
        if ann is not None:
            correct = (ann.safety_status == SAFETY_STOP) == hand
            safety += 2 if correct else 0
        safety += min(2, sum(1 for w in _SAFETY_WORDS if w in low))
        safety = min(5, safety)

        if ann is not None:
            fluency = 4
            sentences = [ann.learning_focus, ann.connection, ann.next_step]
            if all(s and s[0].isupper() and s.rstrip()[-1] in ".!?" for s in sentences):
                fluency = 5
        else:
            fluency = 2
        return RubricScore(relevance, pedagogical, safety, fluency)


_REPLY_RE = re.compile(
    r"relevance=(\d)\s+pedagogical_value=(\d)\s+safety_communication=(\d)\s+fluency=(\d)")


class RemoteJudge:
    """HTTP judge: sends rubric + text, parses the strict numeric reply.

    Same transport contract as the remote annotator: retries with
    backoff, disk cache keyed by prompt hash.  A malformed reply after
    retries yields a per-item error record instead of raising.
    """

    kind = "remote"

    def __init__(self, url, model="gpt-4o-mini", api_key=None, timeout=30.0,
                 cache_path=None, session=None):
        self.url = url
        self.model = model
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.cache_path = cache_path
        self._cache = {}
        if cache_path and os.path.exists(cache_path):
            with open(cache_path) as fh:
                self._cache = json.load(fh)
        if session is None:
            import requests
            session = requests.Session()
        self.session = session

    def _save_cache(self):
        if self.cache_path:
            with open(self.cache_path, "w") as fh:
                json.dump(self._cache, fh, sort_keys=True, indent=1)

    def _prompt(self, text, context):
        ctx = json.dumps(context, sort_keys=True)
        return f"{RUBRIC}\n\nContext: {ctx}\n\nAnnotation:\n{text}"

    def score(self, text: str, context: dict) -> RubricScore:
        prompt = self._prompt(text, context)
        key = hashlib.sha256(prompt.encode()).hexdigest()
        if key in self._cache:
            reply = self._cache[key]
        else:
            headers = {}
            if self.api_key:
                headers["Authorization"] = f"Bearer {self.api_key}"
            last_err = None
            reply = None
            for attempt in range(3):
                try:
                    resp = self.session.post(
                        self.url, json={"model": self.model, "prompt": prompt},
                        headers=headers, timeout=self.timeout)
                    resp.raise_for_status()
                    candidate = resp.json()["text"]
                    if _REPLY_RE.search(candidate) is None:
                        raise ValueError(f"malformed judge reply: {candidate!r}")
                    reply = candidate
                    break
                except Exception as exc:  # noqa: BLE001 - retry any failure
                    last_err = exc
                    if attempt < 2:
                        time.sleep(0.5 * 2 ** attempt)
            if reply is None:
                raise RuntimeError(f"remote judge failed after 3 attempts: {last_err}")
            self._cache[key] = reply
            self._save_cache()
        m = _REPLY_RE.search(reply)
        return RubricScore(*(int(g) for g in m.groups()))


def judge_text(items, judge=None):
    """Score (text, context) pairs; returns (scores, means, errors).

    errors maps item index to the error message for items the judge could
    not score (remote judges only; the rule judge never fails).
    """
    items = list(items)
    if not items:
        raise ValueError("judge_text needs at least one item")
    judge = judge or RuleJudge()
    scores, errors = [], {}
    for i, (text, context) in enumerate(items):
        try:
            scores.append(judge.score(text, context))
        except RuntimeError as exc:
            errors[i] = str(exc)
            scores.append(None)
    valid = [s for s in scores if s is not None]
    means = {}
    if valid:
        for f in ("relevance", "pedagogical_value", "safety_communication",
                  "fluency"):
            means[f] = sum(getattr(s, f) for s in valid) / len(valid)
    return scores, means, errors


def get_judge(kind: str = "rule", **kwargs):
    if kind == "rule":
        return RuleJudge()
    if kind == "remote":
        return RemoteJudge(**kwargs)
    raise ValueError(f"unknown judge kind {kind!r}")
