"""Success-predicate evaluation over a simulated scene trace.

Each predicate in a TaskSpec is evaluated to (passed, first_t) where
first_t is the frame index at which it first became satisfied (None if
never).  first_t drives the protocol step-order metric.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredicateResult:
    name: str
    kind: str          # success | condition
    order: int
    passed: bool
    first_t: object    # int or None


def _resolve_target(pred, trace, key="target"):
    target = pred[key]
    obj = pred["object"]
    if target == "home":
        return np.asarray(trace[0].home_positions[obj][:2])
    if isinstance(target, str):
        return trace[-1].objects[target][:2]
    return np.asarray(target[:2], dtype=np.float64)


def _in_region(scene, pred, target_xy):
    pos = scene.objects[pred["object"]]
    if np.hypot(pos[0] - target_xy[0], pos[1] - target_xy[1]) > pred["xy_tol"]:
        return False
    if "z_min" in pred and pos[2] < pred["z_min"]:
        return False
    if "z_max" in pred and pos[2] > pred["z_max"]:
        return False
    return True


def _crossings(trace, pred):
    """Frame indices where the object's z crosses the level while the
    object stays near the reference object."""
    ref = pred["near"]
    tol = pred["near_xy_tol"]
    level = pred["level"]
    times = []
    prev_sign = None
    for scene in trace:
        pos = scene.objects[pred["object"]]
        refp = scene.objects[ref]
        if np.hypot(pos[0] - refp[0], pos[1] - refp[1]) > tol:
            prev_sign = None
            continue
        sign = 1 if pos[2] >= level else -1
        if prev_sign is not None and sign != prev_sign:
            times.append(scene.t)
        prev_sign = sign
    return times


def evaluate_predicate(pred, trace) -> PredicateResult:
    ptype = pred["type"]
    name, kind, order = pred["name"], pred["kind"], pred["order"]

    if ptype == "grasped":
        first = next((s.t for s in trace if s.attached == pred["object"]), None)
        return PredicateResult(name, kind, order, first is not None, first)

    if ptype == "flag_set":
        key = (pred["object"], pred["flag"])
        first = next((s.t for s in trace if key in s.flags), None)
        return PredicateResult(name, kind, order, first is not None, first)

    if ptype == "placed":
        target_xy = _resolve_target(pred, trace)
        was_attached = any(s.attached == pred["object"] for s in trace)
        final = trace[-1]
        pos = final.objects[pred["object"]]
        ok = (was_attached and final.attached != pred["object"]
              and np.hypot(pos[0] - target_xy[0], pos[1] - target_xy[1]) <= pred["xy_tol"])
        first = None
        if ok:
            seen_attach = False
            for s in trace:
                if s.attached == pred["object"]:
                    seen_attach = True
                elif seen_attach:
                    p = s.objects[pred["object"]]
                    if np.hypot(p[0] - target_xy[0], p[1] - target_xy[1]) <= pred["xy_tol"]:
                        first = s.t
                        break
        return PredicateResult(name, kind, order, ok, first)

    if ptype == "dwell_near":
        moving_ref = isinstance(pred["target"], str) and pred["target"] != "home"
        target_xy = _resolve_target(pred, trace)
        longest = run = 0
        first = None
        for s in trace:
            if moving_ref:
                target_xy = s.objects[pred["target"]][:2]
            if _in_region(s, pred, target_xy):
                run += 1
                if run >= pred["min_frames"] and first is None:
                    first = s.t
                longest = max(longest, run)
            else:
                run = 0
        ok = longest >= pred["min_frames"] and longest <= pred.get("max_frames", float("inf"))
        return PredicateResult(name, kind, order, ok, first)

    if ptype == "osc_cycles":
        times = _crossings(trace, pred)
        ok = len(times) >= pred["min_crossings"]
        first = times[pred["min_crossings"] - 1] if ok else None
        return PredicateResult(name, kind, order, ok, first)

    if ptype == "osc_fast":
        times = _crossings(trace, pred)
        gaps = [(b - a, b) for a, b in zip(times, times[1:])]
        fast = [t for g, t in gaps if g <= pred["max_gap"]]
        ok = len(fast) >= pred["min_crossings"]
        first = fast[pred["min_crossings"] - 1] if ok else None
        return PredicateResult(name, kind, order, ok, first)

    raise ValueError(f"unknown predicate type {ptype!r}")


def evaluate_all(task, trace):
    return [evaluate_predicate(p, trace) for p in task.success_predicates]
