"""Annotator clients: deterministic template oracle (default) and a remote
HTTP endpoint with timeout, retry-with-backoff, and a response cache."""

import hashlib
import json
import os
import re
import time

from ..data.episode import chunk_stage_info
from ..sim.tasks import get_task
from . import oracle
from .prompts import PromptSpec, build_prompt, chunk_summary
from .schema import parse_annotation

API_KEY_ENV = "DEMOBOT_ANNOTATOR_KEY"

_SUMMARY_RE = re.compile(
    r"stage=(\S+), (a human hand is in the workspace|no hand present), "
    r"stage progress=([0-9.]+)")


class TemplateAnnotator:
    """Offline deterministic annotator backed by the template tables."""

    kind = "template"

    def annotate(self, prompt: str, task_id: str = None) -> str:
        """Answer a built prompt by reading its chunk-summary line."""
        m = _SUMMARY_RE.search(prompt)
        if m is None:
            raise ValueError("prompt has no parseable chunk summary")
        if task_id is None:
            tm = re.search(r"task_id=(\S+)", prompt)
            if tm is None:
                raise ValueError("prompt does not identify the task")
            task_id = tm.group(1)
        stage, hand_text, progress = m.group(1), m.group(2), float(m.group(3))
        ann = oracle.template_annotate(task_id, stage, hand_text.startswith("a human"),
                                       progress)
        return ann.serialize()

    def annotate_episode(self, ep, chunk_size: int = 50) -> dict:
        return oracle.annotate_episode(ep, chunk_size)


def exemplars_for(task_id: str):
    """One idle, one active, one safety exemplar drawn from the oracle."""
    task = get_task(task_id)
    first, mid = task.stage_list[0], task.stage_list[len(task.stage_list) // 2]
    return [
        ("idle", oracle.template_annotate(task_id, first, False, 0.0).serialize()),
        ("active", oracle.template_annotate(task_id, mid, False, 0.5).serialize()),
        ("safety", oracle.template_annotate(task_id, first, True, 0.0).serialize()),
    ]


def episode_prompt_spec(ep, stage: str, hand: bool, progress: float) -> PromptSpec:
    context = (f"You are narrating a robot science demonstration for students.\n"
               f"task_id={ep.task_id}\nInstruction: {ep.instruction}")
    return PromptSpec(task_context=context, exemplars=exemplars_for(ep.task_id),
                      chunk_summary=chunk_summary(stage, hand, progress))


class RemoteAnnotator:
    """Single-endpoint text-in/text-out HTTP annotator.

    POSTs {"model": ..., "prompt": ...} and expects {"text": ...}.  Retries
    up to 3 times with exponential backoff; responses are cached on disk
    keyed by prompt hash so reruns are reproducible and offline.
    """

    kind = "remote"

    def __init__(self, url, model="gpt-4o", api_key=None, timeout=30.0,
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

    def annotate(self, prompt: str) -> str:
        key = hashlib.sha256(prompt.encode()).hexdigest()
        if key in self._cache:
            return self._cache[key]
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err = None
        for attempt in range(3):
            try:
                resp = self.session.post(
                    self.url, json={"model": self.model, "prompt": prompt},
                    headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                text = resp.json()["text"]
                self._cache[key] = text
                self._save_cache()
                return text
            except Exception as exc:  # noqa: BLE001 - retry any transport error
                last_err = exc
                if attempt < 2:
                    time.sleep(0.5 * 2 ** attempt)
        raise RuntimeError(f"remote annotator failed after 3 attempts: {last_err}")

    def annotate_episode(self, ep, chunk_size: int = 50) -> dict:
        out = {}
        for k, (stage, hand, progress) in enumerate(chunk_stage_info(ep, chunk_size)):
            spec = episode_prompt_spec(ep, stage, hand, progress)
            raw = self.annotate(build_prompt(spec))
            # canonicalize through the parser so stored text always validates
            out[k] = parse_annotation(raw).serialize()
        return out


def get_annotator(kind: str = "template", **kwargs):
    if kind == "template":
        return TemplateAnnotator()
    if kind == "remote":
        return RemoteAnnotator(**kwargs)
    raise ValueError(f"unknown annotator kind {kind!r}")
