"""Scene state, scene construction and the kinematic stepper.

Stepping is pure: ``step`` returns a fresh SceneState and never mutates
its input, so identical (task, seed, action sequence) always reproduces
the identical trajectory.
"""

from dataclasses import dataclass, replace

import numpy as np

from .tasks import TaskSpec, default_registry


@dataclass(frozen=True)
class SceneState:
    task_id: str
    q: np.ndarray                  # 6 joint values, radians (gripper in [0,1])
    gripper_closed: bool
    objects: dict                  # name -> np.ndarray (x, y, z, yaw)
    attached: str                  # object name or None
    flags: frozenset               # set of (object, flag) pairs
    hand_present: bool
    hand_pos: tuple                # (x, y) or None
    t: int
    rule_counters: tuple           # ((rule_id, count), ...) dwell bookkeeping
    clamped: bool                  # this step commanded an out-of-limit target
    home_positions: dict           # name -> initial (x, y, z) after jitter

    def object_pos(self, name):
        return self.objects[name][:3]

    def has_flag(self, obj, flag):
        return (obj, flag) in self.flags

    def ee_pos(self, registry=None):
        reg = registry or default_registry()
        pos, _ = reg.arm.fk(self.q)
        return pos


def make_scene(task: TaskSpec, seed: int, registry=None) -> SceneState:
    """Initial scene: template positions plus bounded uniform jitter."""
    assert seed >= 0
    reg = registry or default_registry()
    rng = np.random.default_rng(seed)
    jitter = reg.workspace.jitter
    offsets = {}
    objects = {}
    for name, tmpl in task.objects.items():
        if tmpl.jitter_with is not None:
            off = offsets[tmpl.jitter_with]
        elif tmpl.jitter:
            off = rng.uniform(-jitter, jitter, size=2)
        else:
            off = np.zeros(2)
        offsets[name] = off
        x, y, z = tmpl.pos
        objects[name] = np.array([x + off[0], y + off[1], z, 0.0])
    home_q = reg.arm.ik(reg.home_pose, grip=0.0)
    return SceneState(
        task_id=task.task_id, q=home_q, gripper_closed=False,
        objects=objects, attached=None, flags=frozenset(),
        hand_present=False, hand_pos=None, t=0, rule_counters=(),
        clamped=False,
        home_positions={n: tuple(p[:3]) for n, p in objects.items()})


def _check_condition(cond, scene, prev_scene, ee):
    if "attached_is" in cond:
        return scene.attached == cond["attached_is"]
    if "not_attached" in cond:
        return scene.attached != cond["not_attached"]
    if "flag" in cond:
        obj, flag = cond["flag"]
        return scene.has_flag(obj, flag)
    if "hand_present" in cond:
        return scene.hand_present == cond["hand_present"]
    if "near" in cond:
        p = cond["near"]
        pos = scene.object_pos(p["object"])
        target = p["target"]
        if isinstance(target, str):
            tpos = scene.object_pos(target)
        else:
            tpos = np.array([target[0], target[1], 0.0])
        if np.hypot(pos[0] - tpos[0], pos[1] - tpos[1]) > p["xy_tol"]:
            return False
        if "z_min" in p and pos[2] < p["z_min"]:
            return False
        if "z_max" in p and pos[2] > p["z_max"]:
            return False
        return True
    if "moving" in cond:
        p = cond["moving"]
        dz = abs(scene.object_pos(p["object"])[2] - prev_scene.object_pos(p["object"])[2])
        return dz >= p["min_dz"]
    raise ValueError(f"unknown condition {cond}")


def _apply_rules(task, prev_scene, scene):
    counters = dict(scene.rule_counters)
    flags = set(scene.flags)
    for rule in task.rules:
        key = (rule["object"], rule["flag"])
        if key in flags:
            continue
        ok = all(_check_condition(c, scene, prev_scene, None) for c in rule["when"])
        if ok:
            n = counters.get(rule["id"], 0) + 1
            if n >= rule["dwell"]:
                flags.add(key)
                counters.pop(rule["id"], None)
            else:
                counters[rule["id"]] = n
        else:
            counters.pop(rule["id"], None)
    return frozenset(flags), tuple(sorted(counters.items()))


def step(scene: SceneState, target_q, grip_cmd: bool, registry=None) -> SceneState:
    """Advance one frame toward target_q with speed and limit clipping."""
    reg = registry or default_registry()
    arm = reg.arm
    task = reg[scene.task_id]
    target_q = np.asarray(target_q, dtype=np.float64)
    assert np.all(np.isfinite(target_q)), "target_q must be finite"
    clamped_target = arm.clamp(target_q)
    was_clamped = bool(np.any(np.abs(clamped_target - target_q) > 1e-12))
    delta = np.clip(clamped_target - scene.q, -arm.max_joint_delta, arm.max_joint_delta)
    new_q = arm.clamp(scene.q + delta)
    gripper_closed = bool(new_q[5] > 0.5)
    ee, ee_yaw = arm.fk(new_q)

    objects = {n: p.copy() for n, p in scene.objects.items()}
    attached = scene.attached
    if attached is not None:
        if not grip_cmd and not gripper_closed:
            # release: the object settles at its rest height
            rest_z = task.objects[attached].pos[2]
            objects[attached][2] = rest_z
            objects[attached][:2] = ee[:2]
            attached = None
        else:
            objects[attached][:3] = ee
            objects[attached][3] = ee_yaw
    elif grip_cmd and gripper_closed:
        best, best_d = None, arm.grasp_radius
        for name, tmpl in task.objects.items():
            if not tmpl.graspable:
                continue
            d = float(np.linalg.norm(objects[name][:3] - ee))
            if d <= best_d:
                best, best_d = name, d
        if best is not None:
            attached = best
            objects[best][:3] = ee
            objects[best][3] = ee_yaw

    new_scene = replace(
        scene, q=new_q, gripper_closed=gripper_closed, objects=objects,
        attached=attached, t=scene.t + 1, clamped=was_clamped)
    flags, counters = _apply_rules(task, scene, new_scene)
    return replace(new_scene, flags=flags, rule_counters=counters)


def in_forbidden_zone(scene: SceneState, registry=None):
    """Name of the forbidden zone the end effector (or carried object)
    currently violates, or None."""
    reg = registry or default_registry()
    task = reg[scene.task_id]
    ee = scene.ee_pos(reg)
    points = [ee]
    if scene.attached is not None:
        points.append(scene.object_pos(scene.attached))
    for zone in task.forbidden_zones:
        center = scene.object_pos(zone["object"])[:2]
        for p in points:
            if p[2] > zone["z_max"]:
                continue
            r = float(np.hypot(p[0] - center[0], p[1] - center[1]))
            if zone["type"] == "cylinder" and r <= zone["r"]:
                return zone["object"]
            if zone["type"] == "shell" and zone["r_in"] <= r <= zone["r_out"]:
                return zone["object"]
    if ee[2] < -0.005:
        return "table"
    return None
