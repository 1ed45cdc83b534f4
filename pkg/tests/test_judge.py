import pytest

from demobot.annotate.oracle import TEMPLATES, template_annotate
from demobot.eval.judge import (RubricScore, RuleJudge, RemoteJudge, get_judge,
                                judge_text)


@pytest.fixture(scope="module")
def judge():
    return RuleJudge()


def _ctx(task_id, stage, hand=False):
    return {"task_id": task_id, "stage": stage, "hand_present": hand}


def test_rubric_score_bounds():
    with pytest.raises(ValueError):
        RubricScore(0, 3, 3, 3)
    with pytest.raises(ValueError):
        RubricScore(3, 6, 3, 3)
    s = RubricScore(5, 4, 3, 2)
    assert s.as_dict()["relevance"] == 5


def test_empty_text_floor(judge):
    s = judge.score("", _ctx("em_induction", "pickup_magnet"))
    assert s.as_dict() == {"relevance": 1, "pedagogical_value": 1,
                           "safety_communication": 1, "fluency": 1}


def test_oracle_annotations_well_scored(judge):
    for task_id, table in TEMPLATES.items():
        for stage in table:
            text = template_annotate(task_id, stage, False, 0.5).serialize()
            s = judge.score(text, _ctx(task_id, stage))
            assert s.relevance >= 4, (task_id, stage)
            assert s.pedagogical_value >= 4, (task_id, stage)
            assert s.fluency >= 4, (task_id, stage)


def test_bare_action_description_low_value(judge):
    s = judge.score("Robot is moving magnet",
                    _ctx("em_induction", "oscillate_slow"))
    assert s.pedagogical_value <= 2


def test_pedagogical_value_monotone_under_focus_append(judge):
    ctx = _ctx("em_induction", "oscillate_slow")
    base = template_annotate("em_induction", "oscillate_slow", False, 0.0).serialize()
    extra = " Learning Focus: This explains why the induced current grows."
    for text in (base, "Robot is moving magnet", ""):
        before = judge.score(text, ctx).pedagogical_value
        after = judge.score(text + extra, ctx).pedagogical_value
        assert after >= before


def test_safety_status_correctness_scored(judge):
    stop = template_annotate("em_induction", "oscillate_slow", True, 0.0).serialize()
    ok = judge.score(stop, _ctx("em_induction", "oscillate_slow", hand=True))
    wrong = judge.score(stop, _ctx("em_induction", "oscillate_slow", hand=False))
    assert ok.safety_communication > wrong.safety_communication


def test_judge_text_means(judge):
    items = [
        (template_annotate("em_induction", "oscillate_slow", False, 0.0).serialize(),
         _ctx("em_induction", "oscillate_slow")),
        ("", _ctx("em_induction", "oscillate_slow")),
    ]
    scores, means, errors = judge_text(items, judge)
    assert len(scores) == 2 and not errors
    assert means["relevance"] == pytest.approx(
        (scores[0].relevance + scores[1].relevance) / 2)
    with pytest.raises(ValueError):
        judge_text([], judge)


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


GOOD_REPLY = {"text": "relevance=4 pedagogical_value=5 safety_communication=3 fluency=4"}


def test_remote_judge_parses_and_caches(tmp_path):
    session = _FakeSession([{"text": "nonsense"}, GOOD_REPLY])
    judge = RemoteJudge("http://judge.test", session=session,
                        cache_path=str(tmp_path / "cache.json"))
    s = judge.score("some text", {"task_id": "em_induction"})
    assert s.as_dict() == {"relevance": 4, "pedagogical_value": 5,
                           "safety_communication": 3, "fluency": 4}
    assert session.calls == 2   # first reply malformed, one retry
    judge.score("some text", {"task_id": "em_induction"})
    assert session.calls == 2   # cache hit


def test_remote_judge_error_record():
    session = _FakeSession([RuntimeError("down")] * 3)
    judge = RemoteJudge("http://judge.test", session=session)
    scores, means, errors = judge_text([("text", {})], judge)
    assert scores == [None]
    assert 0 in errors
    assert means == {}


def test_get_judge_kinds():
    assert get_judge("rule").kind == "rule"
    with pytest.raises(ValueError):
        get_judge("vibes")
