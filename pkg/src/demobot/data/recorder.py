"""Record scripted demonstrations into Episodes at 30 fps, dual camera.

While a hand is inside the workspace the scripted plan is paused and the
recorded action is a hold of the current joint positions (zero velocity);
the plan resumes when the hand leaves.
"""

import math

import numpy as np

from ..sim import make_scene, render, scripted_policy, step, with_hand
from ..sim.tasks import default_registry
from .episode import Episode, Frame, MAX_EPISODE_FRAMES

# frames recorded after an intrusion that never ends
OPEN_INTRUSION_TAIL = 120


def record_episode(task, seed, schedule=None, resolution=(64, 64), registry=None):
    """Run the scripted policy through the simulator and record everything.

    Propagates UnreachableWaypointError so the caller can resample the seed.
    """
    reg = registry or default_registry()
    arm = reg.arm
    plan = list(scripted_policy(task, make_scene(task, seed, reg), seed, reg))
    scene = with_hand(make_scene(task, seed, reg), schedule)

    frames = []
    i = 0
    hold_frames = 0
    while True:
        if scene.hand_present:
            target_q = scene.q
            grip_cmd = bool(scene.gripper_closed)
            stage = plan[i][2] if i < len(plan) else plan[-1][2]
            hold_frames += 1
        else:
            if i >= len(plan):
                break
            target_q, grip_cmd, stage = plan[i]
            i += 1
            hold_frames = 0

        action = np.asarray(arm.normalize(target_q), dtype=np.float32)
        frames.append(Frame(
            t=scene.t,
            img_wrist=render(scene, "wrist", resolution, reg),
            img_top=render(scene, "top", resolution, reg),
            state=np.asarray(arm.normalize(scene.q), dtype=np.float32),
            action=action,
            stage_name=stage,
            hand_present=bool(scene.hand_present)))

        # execute exactly the float32-rounded stored action for replayability
        scene = with_hand(
            step(scene, arm.denormalize(action.astype(np.float64)), grip_cmd, reg),
            schedule)

        open_ended = schedule is not None and math.isinf(schedule.leave_t)
        if open_ended and hold_frames >= OPEN_INTRUSION_TAIL:
            break
        if len(frames) >= MAX_EPISODE_FRAMES:
            break

    ep = Episode(
        task_id=task.task_id, instruction=task.instruction, frames=frames,
        safety_intervention=any(f.hand_present for f in frames),
        seed=seed, schedule=schedule)
    return ep.validate()


def replay_trace(ep: Episode, registry=None):
    """Re-simulate an episode from its stored actions.

    Returns the full scene trace (length len(ep)+1 including the initial
    scene).  For recorder-produced episodes this reproduces the original
    trajectory exactly.
    """
    reg = registry or default_registry()
    task = reg[ep.task_id]
    scene = with_hand(make_scene(task, ep.seed, reg), ep.schedule)
    trace = [scene]
    for f in ep.frames:
        target = reg.arm.denormalize(f.action.astype(np.float64))
        grip_cmd = bool(f.action[5] > 0.0)
        scene = with_hand(step(scene, target, grip_cmd, reg), ep.schedule)
        trace.append(scene)
    return trace
