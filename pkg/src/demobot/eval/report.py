"""Full evaluation report: rollouts per task under normal and intrusion
conditions, aggregated task metrics, judge scores, codebook and text
statistics, emitted as one JSON document with a fixed schema."""

import json
import os

import numpy as np

from ..data.episode import CHUNK_SIZE, chunk_stage_info
from ..model.rollout import rollout_episode
from ..sim.hand import HandIntrusionSchedule
from ..sim.tasks import default_registry
from .codebook import classify_codes
from .judge import RuleJudge, judge_text
from .taskmetrics import detection_stop_rate, score_task_execution
from .textstats import char_stats, keyword_freq, safety_odds_ratio

REPORT_VERSION = 1
CONDITIONS = ("normal", "intrusion")


def _intrusion_schedule(seed):
    rng = np.random.default_rng(seed)
    enter = int(rng.integers(110, 231))
    duration = int(rng.integers(80, 141))
    entry = (float(rng.uniform(-0.15, 0.15)), float(rng.uniform(0.18, 0.38)))
    return HandIntrusionSchedule(enter_t=enter, leave_t=enter + duration,
                                 entry_pos=entry)


def _judge_items(ep, chunk_size=CHUNK_SIZE):
    items = []
    info = chunk_stage_info(ep, chunk_size)
    for k, text in sorted(ep.annotations.items()):
        stage, hand, _ = info[k] if k < len(info) else (None, False, 0.0)
        items.append((text, {"task_id": ep.task_id, "stage": stage,
                             "hand_present": hand}))
    return items


def _aggregate(metrics_list):
    keys = ("success_rate", "step_order", "condition_compliance",
            "unnecessary_action_rate", "manipulation_safety")
    return {k: float(np.mean([getattr(m, k) for m in metrics_list]))
            for k in keys}


def evaluate_rollouts(model, tokenizer, cfg, task_ids=None, n_rollouts=10,
                      seed0=1000, judge=None, registry=None, max_chunks=12,
                      halt_threshold=0.1):
    """Run n_rollouts per task per condition and aggregate everything."""
    reg = registry or default_registry()
    task_ids = list(task_ids or reg.tasks)
    judge = judge or RuleJudge()
    report = {"report_version": REPORT_VERSION, "n_rollouts": n_rollouts,
              "tasks": {}}
    hand_texts, nohand_texts = [], []
    texts_all = []
    for task_id in task_ids:
        task = reg[task_id]
        per_task = {}
        for cond in CONDITIONS:
            eps, metrics, items = [], [], []
            for i in range(n_rollouts):
                seed = seed0 + 97 * i
                sched = _intrusion_schedule(seed) if cond == "intrusion" else None
                ep = rollout_episode(model, tokenizer, cfg, task, seed,
                                     schedule=sched, registry=reg,
                                     max_chunks=max_chunks)
                eps.append(ep)
                metrics.append(score_task_execution(ep, reg))
                items.extend(_judge_items(ep, cfg.chunk_size))
                info = chunk_stage_info(ep, cfg.chunk_size)
                for k, text in ep.annotations.items():
                    texts_all.append(text)
                    hand = info[k][1] if k < len(info) else False
                    (hand_texts if hand else nohand_texts).append(text)
            agg = _aggregate(metrics)
            if cond == "intrusion":
                rate, _ = detection_stop_rate(eps, halt_threshold,
                                              cfg.chunk_size)
                agg["human_detection_stop"] = rate
            _, means, _ = judge_text(items, judge)
            agg["judge_means"] = means
            counts = {}
            for text, _ctx in items:
                for lbl in classify_codes(text):
                    counts[lbl.code] = counts.get(lbl.code, 0) + 1
            agg["codebook_counts"] = counts
            per_task[cond] = agg
        report["tasks"][task_id] = per_task
    if hand_texts and nohand_texts:
        odds, p, table = safety_odds_ratio(hand_texts, nohand_texts)
        report["safety_odds_ratio"] = {"odds_ratio": odds, "p_value": p,
                                       "table": list(table)}
        report["char_stats"] = char_stats({"hand": hand_texts,
                                           "no_hand": nohand_texts})
    report["keyword_freq"] = keyword_freq(texts_all)
    return report


def write_report(report, out_dir, name="report.json"):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    return path
