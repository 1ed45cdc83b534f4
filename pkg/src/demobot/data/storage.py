"""On-disk episode format.

One directory per episode:

    manifest.json   task, instruction, seed, flags, stages, annotations,
                    hand schedule and array checksums
    states.npy      (N, 6) float32, normalized
    actions.npy     (N, 6) float32, normalized
    imgs_wrist.npy  (N, H, W, 3) uint8
    imgs_top.npy    (N, H, W, 3) uint8

The .npy container is little-endian with an explicit shape header, which
keeps the format portable and inspectable.
"""

import json
import math
import os

import numpy as np

from ..errors import StorageError
from ..sim.hand import HandIntrusionSchedule
from ..sim.render import from_uint8, to_uint8
from .episode import Episode, Frame

FORMAT_VERSION = 1


def _schedule_to_json(schedule):
    if schedule is None:
        return None
    return {"enter_t": schedule.enter_t,
            "leave_t": None if math.isinf(schedule.leave_t) else schedule.leave_t,
            "entry_pos": list(schedule.entry_pos)}


def _schedule_from_json(obj):
    if obj is None:
        return None
    leave = math.inf if obj["leave_t"] is None else obj["leave_t"]
    return HandIntrusionSchedule(enter_t=obj["enter_t"], leave_t=leave,
                                 entry_pos=tuple(obj["entry_pos"]))


def save_episode(ep: Episode, path):
    os.makedirs(path, exist_ok=True)
    n = len(ep.frames)
    manifest = {
        "format_version": FORMAT_VERSION,
        "task_id": ep.task_id,
        "instruction": ep.instruction,
        "seed": ep.seed,
        "safety_intervention": ep.safety_intervention,
        "num_frames": n,
        "frame_t": [f.t for f in ep.frames],
        "stage_names": [f.stage_name for f in ep.frames],
        "hand_present": [bool(f.hand_present) for f in ep.frames],
        "annotations": {str(k): v for k, v in sorted(ep.annotations.items())},
        "schedule": _schedule_to_json(ep.schedule),
    }
    np.save(os.path.join(path, "states.npy"),
            np.stack([f.state for f in ep.frames]).astype("<f4"))
    np.save(os.path.join(path, "actions.npy"),
            np.stack([f.action for f in ep.frames]).astype("<f4"))
    np.save(os.path.join(path, "imgs_wrist.npy"),
            np.stack([to_uint8(f.img_wrist) for f in ep.frames]))
    np.save(os.path.join(path, "imgs_top.npy"),
            np.stack([to_uint8(f.img_top) for f in ep.frames]))
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return path


def _load_array(path, expect_rows):
    try:
        arr = np.load(path)
    except Exception as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    if arr.shape[0] != expect_rows:
        raise StorageError(f"{path} has {arr.shape[0]} rows, manifest says {expect_rows}")
    return arr


def load_episode(path) -> Episode:
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise StorageError(f"missing manifest in {path}") from exc
    except json.JSONDecodeError as exc:
        raise StorageError(f"corrupt manifest in {path}: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise StorageError(
            f"episode format version {version!r} unsupported (expected {FORMAT_VERSION})")
    n = manifest["num_frames"]
    states = _load_array(os.path.join(path, "states.npy"), n)
    actions = _load_array(os.path.join(path, "actions.npy"), n)
    wrist = _load_array(os.path.join(path, "imgs_wrist.npy"), n)
    top = _load_array(os.path.join(path, "imgs_top.npy"), n)
    frames = [
        Frame(t=manifest["frame_t"][i],
              img_wrist=from_uint8(wrist[i]), img_top=from_uint8(top[i]),
              state=states[i].astype(np.float32), action=actions[i].astype(np.float32),
              stage_name=manifest["stage_names"][i],
              hand_present=bool(manifest["hand_present"][i]))
        for i in range(n)]
    ep = Episode(
        task_id=manifest["task_id"], instruction=manifest["instruction"],
        frames=frames, safety_intervention=manifest["safety_intervention"],
        annotations={int(k): v for k, v in manifest["annotations"].items()},
        seed=manifest["seed"], schedule=_schedule_from_json(manifest["schedule"]))
    return ep.validate()


def episodes_equal(a: Episode, b: Episode) -> bool:
    if (a.task_id, a.instruction, a.seed, a.safety_intervention,
            a.annotations, a.schedule) != \
       (b.task_id, b.instruction, b.seed, b.safety_intervention,
            b.annotations, b.schedule):
        return False
    if len(a.frames) != len(b.frames):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if (fa.t, fa.stage_name, fa.hand_present) != (fb.t, fb.stage_name, fb.hand_present):
            return False
        for x, y in ((fa.state, fb.state), (fa.action, fb.action),
                     (fa.img_wrist, fb.img_wrist), (fa.img_top, fb.img_top)):
            if not np.array_equal(x, y):
                return False
    return True
