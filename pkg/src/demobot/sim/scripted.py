"""Scripted expert policies, one per task.

Each policy compiles the task into a per-frame sequence of
(target_q, grip_cmd, stage_name).  Targets are interpolated in joint
space below the arm's speed cap, so executing them through ``step``
tracks the plan exactly and never triggers speed clipping.
"""

import math

import numpy as np

from .arm import UnreachableWaypointError
from .tasks import default_registry

# fraction of max_joint_delta used for normal / slow / precise motion
CRUISE = 0.7
APPROACH_Z = 0.09
CARRY_Z = 0.10


class _Executor:
    def __init__(self, registry, q0):
        self.reg = registry
        self.arm = registry.arm
        self.q = np.array(q0, dtype=np.float64)
        self.grip_closed = False
        self.frames = []

    def _emit(self, stage):
        self.frames.append((self.q.copy(), self.grip_closed, stage))

    def ee(self):
        pos, _ = self.arm.fk(self.q)
        return pos

    def joint_move(self, target_q, stage, speed=CRUISE):
        limit = speed * self.arm.max_joint_delta
        guard = 0
        while True:
            d = target_q - self.q
            if np.max(np.abs(d)) < 1e-9:
                break
            self.q = self.q + np.clip(d, -limit, limit)
            self._emit(stage)
            guard += 1
            if guard > 2000:
                raise RuntimeError("joint move failed to converge")

    def move_to(self, pos, stage, speed=CRUISE, precise=False):
        grip = 1.0 if self.grip_closed else 0.0
        if precise:
            start = self.ee()
            end = np.asarray(pos, dtype=np.float64)
            dist = float(np.linalg.norm(end - start))
            n = max(1, int(math.ceil(dist / 0.015)))
            for i in range(1, n + 1):
                sub = start + (end - start) * (i / n)
                self.joint_move(self.arm.ik(sub, grip=grip), stage, speed)
        else:
            self.joint_move(self.arm.ik(pos, grip=grip), stage, speed)

    def set_grip(self, closed, stage):
        self.grip_closed = closed
        target = self.q.copy()
        target[5] = 1.0 if closed else 0.0
        self.joint_move(target, stage, speed=1.0)

    def dwell(self, n, stage):
        for _ in range(n):
            self._emit(stage)

    def grasp(self, pos, stage, lift=CARRY_Z):
        x, y, z = pos
        self.move_to((x, y, APPROACH_Z), stage)
        self.move_to((x, y, z), stage, precise=True)
        self.set_grip(True, stage)
        self.dwell(4, stage)
        self.move_to((x, y, lift), stage, precise=True)

    def place(self, pos, stage, z=0.02, lift=CARRY_Z):
        x, y = pos[0], pos[1]
        self.move_to((x, y, lift), stage)
        self.move_to((x, y, z), stage, precise=True)
        self.set_grip(False, stage)
        self.dwell(2, stage)
        self.move_to((x, y, lift), stage, precise=True)


def _em_induction(ex, scene, rng):
    magnet = scene.object_pos("magnet")
    coil = scene.object_pos("coil")
    ex.grasp(magnet, "pickup_magnet")
    st = "insert_in_coil"
    ex.move_to((coil[0], coil[1], 0.14), st)
    ex.move_to((coil[0], coil[1], 0.055), st, precise=True)
    ex.dwell(16 + int(rng.integers(0, 4)), st)
    for _ in range(3):
        ex.move_to((coil[0], coil[1], 0.105), "oscillate_slow", speed=0.22, precise=True)
        ex.move_to((coil[0], coil[1], 0.055), "oscillate_slow", speed=0.22, precise=True)
    for _ in range(3):
        ex.move_to((coil[0], coil[1], 0.105), "oscillate_fast", speed=CRUISE, precise=True)
        ex.move_to((coil[0], coil[1], 0.055), "oscillate_fast", speed=CRUISE, precise=True)
    st = "return_magnet"
    ex.move_to((coil[0], coil[1], 0.14), st, precise=True)
    ex.move_to((magnet[0], magnet[1], 0.14), st)
    ex.place(magnet, st, z=magnet[2] + 0.004, lift=0.14)


def _flame_test(ex, scene, rng):
    wire = scene.object_pos("wire")
    dish = scene.object_pos("dish")
    burner = scene.object_pos("burner")
    beaker = scene.object_pos("beaker")
    ex.grasp(wire, "pickup_wire")
    st = "collect_sample"
    ex.move_to((dish[0], dish[1], APPROACH_Z), st)
    ex.move_to((dish[0], dish[1], 0.04), st, precise=True)
    ex.dwell(10 + int(rng.integers(0, 4)), st)
    ex.move_to((dish[0], dish[1], CARRY_Z), st, precise=True)
    st = "heat_in_flame"
    ex.move_to((burner[0], burner[1], 0.15), st)
    ex.move_to((burner[0], burner[1], 0.095), st, precise=True)
    ex.dwell(72 + int(rng.integers(0, 8)), st)
    ex.move_to((burner[0], burner[1], 0.15), st, precise=True)
    st = "clean_wire"
    ex.move_to((beaker[0], beaker[1], APPROACH_Z), st)
    ex.move_to((beaker[0], beaker[1], 0.045), st, precise=True)
    ex.dwell(30 + int(rng.integers(0, 4)), st)
    ex.move_to((beaker[0], beaker[1], CARRY_Z), st, precise=True)
    ex.place(wire, "return_wire", z=wire[2] + 0.004)


def _yeast(ex, scene, rng):
    scoop = scene.object_pos("scoop")
    sugar = scene.object_pos("sugar_dish")
    yeast = scene.object_pos("yeast_dish")
    water = scene.object_pos("water_cup")
    f1 = scene.object_pos("flask1")
    f2 = scene.object_pos("flask2")
    cap = scene.object_pos("cap")

    def dip(pos, stage):
        ex.move_to((pos[0], pos[1], APPROACH_Z), stage)
        ex.move_to((pos[0], pos[1], 0.05), stage, precise=True)
        ex.dwell(10, stage)
        ex.move_to((pos[0], pos[1], CARRY_Z), stage, precise=True)

    def deposit(pos, stage):
        ex.move_to((pos[0], pos[1], CARRY_Z), stage)
        ex.dwell(10, stage)

    ex.grasp(scoop, "pickup_scoop")
    dip(sugar, "add_sugar")
    deposit(f1, "add_sugar")
    deposit(f2, "add_sugar")
    dip(yeast, "add_yeast")
    deposit(f1, "add_yeast")
    dip(water, "add_water")
    deposit(f1, "add_water")
    st = "seal_flask"
    ex.place(scoop, st, z=scoop[2] + 0.004)
    ex.grasp(cap, st)
    ex.move_to((f1[0], f1[1], 0.13), st)
    ex.move_to((f1[0], f1[1], 0.075), st, precise=True)
    ex.set_grip(False, st)
    ex.dwell(2, st)
    ex.move_to((f1[0], f1[1], 0.13), st, precise=True)
    ex.dwell(14 + int(rng.integers(0, 4)), "observe_fermentation")


def _rock(ex, scene, rng):
    dropper = scene.object_pos("dropper")
    beaker = scene.object_pos("acid_beaker")
    rock = scene.object_pos("rock_carb")
    bin_c = scene.object_pos("bin_carb")
    ex.grasp(dropper, "pickup_dropper")
    st = "draw_acid"
    ex.move_to((beaker[0], beaker[1], APPROACH_Z), st)
    ex.move_to((beaker[0], beaker[1], 0.05), st, precise=True)
    ex.dwell(24, st)
    ex.move_to((beaker[0], beaker[1], CARRY_Z), st, precise=True)
    st = "apply_acid"
    ex.move_to((rock[0], rock[1], CARRY_Z), st)
    ex.move_to((rock[0], rock[1], 0.07), st, precise=True)
    ex.dwell(14, st)
    ex.dwell(128 + int(rng.integers(0, 12)), "observe_reaction")
    ex.move_to((rock[0], rock[1], CARRY_Z), "return_dropper", precise=True)
    ex.place(dropper, "return_dropper", z=dropper[2] + 0.004)
    st = "sort_rock"
    ex.grasp(rock, st)
    ex.place(bin_c, st, z=0.02)


def _agar(ex, scene, rng):
    lid = scene.object_pos("lid")
    dish = scene.object_pos("dish")
    flask = scene.object_pos("flask")
    aside = (-0.12, 0.14)
    st = "remove_lid"
    ex.grasp(lid, st)
    ex.place(aside, st, z=0.02)
    st = "pour_agar"
    ex.grasp(flask, st)
    ex.move_to((dish[0], dish[1], 0.13), st)
    ex.move_to((dish[0], dish[1], 0.08), st, precise=True)
    ex.dwell(26 + int(rng.integers(0, 6)), st)
    ex.move_to((dish[0], dish[1], 0.13), st, precise=True)
    ex.place(flask, st, z=flask[2] + 0.004)
    st = "replace_lid"
    ex.grasp((aside[0], aside[1], 0.02), st)
    ex.move_to((dish[0], dish[1], CARRY_Z), st)
    ex.move_to((dish[0], dish[1], 0.028), st, precise=True)
    ex.set_grip(False, st)
    ex.dwell(2, st)
    ex.move_to((dish[0], dish[1], CARRY_Z), st, precise=True)
    ex.move_to(ex.reg.home_pose, "finish")
    ex.dwell(8, "finish")


_PROGRAMS = {
    "em_induction": _em_induction,
    "flame_test": _flame_test,
    "yeast_fermentation": _yeast,
    "rock_classification": _rock,
    "agar_plate": _agar,
}

MIN_FRAMES = 150
MAX_FRAMES = 600


def scripted_policy(task, scene0, seed, registry=None):
    """Generator of (target_q, grip_cmd, stage_name) solving the task.

    Raises UnreachableWaypointError when jitter puts an object outside
    arm reach; callers resample the scene seed.
    """
    reg = registry or default_registry()
    rng = np.random.default_rng(seed + 104729)
    ex = _Executor(reg, scene0.q)
    try:
        _PROGRAMS[task.task_id](ex, scene0, rng)
    except UnreachableWaypointError:
        raise
    frames = ex.frames
    if not MIN_FRAMES <= len(frames) <= MAX_FRAMES:
        raise RuntimeError(
            f"scripted trajectory for {task.task_id} has {len(frames)} frames, "
            f"outside [{MIN_FRAMES}, {MAX_FRAMES}]")
    yield from frames
