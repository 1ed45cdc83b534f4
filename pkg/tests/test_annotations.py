import pytest

from demobot.annotate.client import TemplateAnnotator, RemoteAnnotator, get_annotator
from demobot.annotate.filtering import filter_annotations
from demobot.annotate.oracle import TEMPLATES, annotate_episode, template_annotate
from demobot.annotate.prompts import PromptSpec, build_prompt, chunk_summary
from demobot.annotate.schema import (SAFETY_NORMAL, SAFETY_STOP, Annotation,
                                     parse_annotation)
from demobot.errors import MissingField, UnknownSafetyStatus


def all_template_annotations():
    out = []
    for task_id, table in TEMPLATES.items():
        for stage in table:
            for hand in (False, True):
                for progress in (0.0, 0.49, 0.51, 0.99):
                    out.append(template_annotate(task_id, stage, hand, progress))
    return out


def test_parse_serialize_identity():
    for ann in all_template_annotations():
        assert parse_annotation(ann.serialize()) == ann


def test_serialize_format_shape():
    ann = template_annotate("em_induction", "oscillate_slow", False, 0.0)
    text = ann.serialize()
    assert text.startswith("[Stage] ")
    assert "[Safety Status] Normal" in text
    assert "Learning Focus: " in text
    assert "Connection to learning goal: " in text
    assert "Next: " in text
    stop = template_annotate("em_induction", "oscillate_slow", True, 0.0)
    assert "[Safety Status] Stop - Human detected" in stop.serialize()


def test_progress_selects_variant():
    early = template_annotate("em_induction", "oscillate_slow", False, 0.0)
    late = template_annotate("em_induction", "oscillate_slow", False, 0.99)
    assert early.learning_focus != late.learning_focus


def test_parse_errors():
    good = template_annotate("em_induction", "oscillate_slow", False, 0.0).serialize()
    with pytest.raises(MissingField):
        parse_annotation(good.replace("Learning Focus:", "Focus:"))
    with pytest.raises(UnknownSafetyStatus):
        parse_annotation(good.replace("[Safety Status] Normal",
                                      "[Safety Status] Maybe"))


def test_annotation_validation():
    with pytest.raises(MissingField):
        Annotation(stage="", action_desc="a", safety_status=SAFETY_NORMAL,
                   learning_focus="b", connection="c", next_step="d")
    with pytest.raises(UnknownSafetyStatus):
        Annotation(stage="s", action_desc="a", safety_status="Odd",
                   learning_focus="b", connection="c", next_step="d")


def test_annotate_episode_marks_intrusion_chunks(intrusion_episode):
    anns = annotate_episode(intrusion_episode)
    assert set(anns) == set(range(intrusion_episode.num_chunks()))
    statuses = {k: parse_annotation(t).safety_status for k, t in anns.items()}
    assert SAFETY_STOP in statuses.values()
    assert SAFETY_NORMAL in statuses.values()


def test_filtering_keeps_oracle_output(em_episode):
    anns = annotate_episode(em_episode)
    flags = [False] * len(anns)
    kept, report = filter_annotations(list(anns.values()), flags)
    assert report.keep_rate == 1.0
    assert len(kept) == len(anns)


def test_filtering_drop_reasons():
    good = template_annotate("em_induction", "oscillate_slow", False, 0.0).serialize()
    stop = template_annotate("em_induction", "oscillate_slow", True, 0.0).serialize()
    batch = [good, good.replace("Next:", "After:"), stop]
    kept, report = filter_annotations(batch, [False, False, False])
    assert len(kept) == 1
    assert report.drops == {"missing_field": 1, "safety_mismatch": 1}
    assert report.keep_rate == pytest.approx(1 / 3)


def test_prompt_round_trips_through_template_annotator():
    spec = PromptSpec(
        task_context="You are narrating a robot science demonstration.\n"
                     "task_id=flame_test",
        exemplars=[
            ("idle", template_annotate("flame_test", "pickup_wire", False, 0.0).serialize()),
            ("active", template_annotate("flame_test", "heat_in_flame", False, 0.5).serialize()),
            ("safety", template_annotate("flame_test", "pickup_wire", True, 0.0).serialize()),
        ],
        chunk_summary=chunk_summary("heat_in_flame", False, 0.7))
    prompt = build_prompt(spec)
    out = TemplateAnnotator().annotate(prompt)
    expected = template_annotate("flame_test", "heat_in_flame", False, 0.7)
    assert parse_annotation(out) == expected


def test_prompt_spec_requires_safety_exemplar():
    spec = PromptSpec(task_context="task_id=flame_test",
                      exemplars=[("idle", "x"), ("active", "y")],
                      chunk_summary=chunk_summary("pickup_wire", False, 0.0))
    with pytest.raises(ValueError):
        spec.validate()


class _FakeResponse:
    def __init__(self, payload):
        self._payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self._payload


class _FakeSession:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls += 1
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return _FakeResponse(reply)


def test_remote_annotator_retries_and_caches(tmp_path):
    text = template_annotate("em_induction", "oscillate_slow", False, 0.0).serialize()
    session = _FakeSession([RuntimeError("boom"), {"text": text}])
    client = RemoteAnnotator("http://annotator.test", session=session,
                             cache_path=str(tmp_path / "cache.json"))
    assert client.annotate("prompt-1") == text
    assert session.calls == 2
    # cache hit: no further network use
    assert client.annotate("prompt-1") == text
    assert session.calls == 2


def test_get_annotator_kinds():
    assert get_annotator("template").kind == "template"
    with pytest.raises(ValueError):
        get_annotator("oracle9000")
