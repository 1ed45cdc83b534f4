"""Corpus construction: many recorded episodes plus a deterministic manifest.

The full-scale plan records, per task, a number of normal episodes and a
number of safety-intervention episodes (a hand enters the workspace
mid-demonstration and leaves again, producing a zero-velocity hold).  The
desk-scale default divides every cell by 10, with a floor of 2.
"""

import hashlib
import json
import os
from collections import namedtuple

import numpy as np

from ..errors import StorageError
from ..sim.arm import UnreachableWaypointError
from ..sim.hand import HandIntrusionSchedule
from ..sim.tasks import TASK_IDS, default_registry
from .recorder import record_episode
from .storage import load_episode, save_episode

MANIFEST_VERSION = 1

PlanCell = namedtuple("PlanCell", ["n_normal", "n_safety"])

# full-scale episode counts per task: (normal, safety-intervention)
FULL_SCALE_TABLE = {
    "em_induction": PlanCell(60, 20),
    "flame_test": PlanCell(60, 20),
    "yeast_fermentation": PlanCell(100, 22),
    "rock_classification": PlanCell(100, 30),
    "agar_plate": PlanCell(130, 30),
}

MAX_SEED_ATTEMPTS = 25


def plan_from_table(scale: float = 0.1, tasks=None):
    """Episode plan scaled from the full-scale table (floor, minimum 2/cell)."""
    tasks = list(tasks) if tasks is not None else list(TASK_IDS)
    plan = {}
    for t in tasks:
        cell = FULL_SCALE_TABLE[t]
        if scale >= 1.0:
            plan[t] = cell
        else:
            plan[t] = PlanCell(max(2, int(cell.n_normal * scale)),
                               max(2, int(cell.n_safety * scale)))
    return plan


def derive_seed(root_seed: int, task: str, kind: str, index: int, attempt: int = 0) -> int:
    """Stable per-episode seed independent of build order."""
    key = f"{root_seed}/{task}/{kind}/{index}/{attempt}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def _intrusion_schedule(rng) -> HandIntrusionSchedule:
    enter = int(rng.integers(110, 230))
    duration = int(rng.integers(80, 140))
    x = float(rng.uniform(-0.15, 0.15))
    y = float(rng.uniform(0.18, 0.38))
    return HandIntrusionSchedule(enter_t=enter, leave_t=enter + duration,
                                 entry_pos=(x, y))


def _record_with_resampling(task, root_seed, kind, index, resolution, registry):
    for attempt in range(MAX_SEED_ATTEMPTS):
        seed = derive_seed(root_seed, task.task_id, kind, index, attempt)
        schedule = None
        if kind == "safety":
            schedule = _intrusion_schedule(np.random.default_rng(seed))
        try:
            return record_episode(task, seed, schedule=schedule,
                                  resolution=resolution, registry=registry)
        except UnreachableWaypointError:
            continue
    raise StorageError(
        f"could not record a valid {kind} episode for {task.task_id!r} "
        f"after {MAX_SEED_ATTEMPTS} seed attempts")


def build_corpus(plan, seed, out_dir, resolution=(64, 64), registry=None,
                 annotator=None):
    """Record every episode in the plan into out_dir and write the manifest.

    With a fixed (plan, seed) the resulting manifest is byte-identical
    across reruns.  If an annotator is given, each episode is annotated
    before being saved.
    """
    reg = registry or default_registry()
    os.makedirs(out_dir, exist_ok=True)
    entries = {}
    for task_id in sorted(plan):
        cell = plan[task_id]
        task = reg[task_id]
        dirs = []
        for kind, count in (("normal", cell.n_normal), ("safety", cell.n_safety)):
            for i in range(count):
                ep = _record_with_resampling(task, seed, kind, i, resolution, reg)
                if annotator is not None:
                    ep.annotations.update(annotator.annotate_episode(ep))
                name = f"{task_id}_{kind}_{i:03d}"
                save_episode(ep, os.path.join(out_dir, name))
                dirs.append(name)
        entries[task_id] = {
            "n_normal": cell.n_normal,
            "n_safety": cell.n_safety,
            "total": cell.n_normal + cell.n_safety,
            "episodes": dirs,
        }
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "seed": seed,
        "resolution": list(resolution),
        "tasks": entries,
        "total_episodes": sum(e["total"] for e in entries.values()),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return manifest


def load_manifest(corpus_dir):
    path = os.path.join(corpus_dir, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise StorageError(f"no corpus manifest in {corpus_dir}") from exc
    except json.JSONDecodeError as exc:
        raise StorageError(f"corrupt corpus manifest: {exc}") from exc
    version = manifest.get("manifest_version")
    if version != MANIFEST_VERSION:
        raise StorageError(
            f"corpus manifest version {version!r} unsupported (expected {MANIFEST_VERSION})")
    return manifest


def iter_episodes(corpus_dir, tasks=None):
    """Yield loaded episodes in a deterministic order."""
    manifest = load_manifest(corpus_dir)
    for task_id in sorted(manifest["tasks"]):
        if tasks is not None and task_id not in tasks:
            continue
        entry = manifest["tasks"][task_id]
        if len(entry["episodes"]) != entry["total"]:
            raise StorageError(f"manifest count mismatch for {task_id!r}")
        for name in entry["episodes"]:
            yield load_episode(os.path.join(corpus_dir, name))
