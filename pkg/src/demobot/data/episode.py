"""Episode and chunk containers plus state normalization.

States and actions are stored as float32 in normalized units
([-100, 100] per joint); the recorder also *executes* the float32-rounded
targets, so replaying an episode's actions through the simulator
reproduces the recorded trajectory bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from ..sim.tasks import default_registry

CHUNK_SIZE = 50
ACTION_DIM = 6
MIN_EPISODE_FRAMES = 150
MAX_EPISODE_FRAMES = 2000


def normalize_state(q_raw, registry=None):
    """Joint radians -> [-100, 100] per joint (rejects out-of-limit input)."""
    reg = registry or default_registry()
    return reg.arm.normalize(q_raw)


def denormalize_state(s, registry=None):
    reg = registry or default_registry()
    return reg.arm.denormalize(s)


@dataclass
class Frame:
    t: int
    img_wrist: np.ndarray       # (H, W, 3) float32 in [0, 1]
    img_top: np.ndarray
    state: np.ndarray           # (6,) float32, normalized
    action: np.ndarray          # (6,) float32, normalized joint targets
    stage_name: str
    hand_present: bool


@dataclass
class Episode:
    task_id: str
    instruction: str
    frames: list
    safety_intervention: bool
    annotations: dict = field(default_factory=dict)   # chunk index -> serialized text
    seed: int = 0
    schedule: object = None     # HandIntrusionSchedule used during recording, if any

    def __len__(self):
        return len(self.frames)

    def num_chunks(self, chunk_size=CHUNK_SIZE):
        return -(-len(self.frames) // chunk_size)

    def states(self):
        return np.stack([f.state for f in self.frames])

    def actions(self):
        return np.stack([f.action for f in self.frames])

    def validate(self):
        n = len(self.frames)
        if not MIN_EPISODE_FRAMES <= n <= MAX_EPISODE_FRAMES:
            raise ValueError(f"episode has {n} frames, outside "
                             f"[{MIN_EPISODE_FRAMES}, {MAX_EPISODE_FRAMES}]")
        prev = -1
        for f in self.frames:
            if f.t <= prev:
                raise ValueError("frame indices must be strictly increasing")
            prev = f.t
            for arr in (f.state, f.action):
                if np.any(np.abs(arr) > 100.0 + 1e-6):
                    raise ValueError("state/action outside [-100, 100]")
        if self.safety_intervention != any(f.hand_present for f in self.frames):
            raise ValueError("safety_intervention flag inconsistent with frames")
        return self


@dataclass
class ChunkSample:
    img_wrist: np.ndarray
    img_top: np.ndarray
    state: np.ndarray
    instruction: str
    target_actions: np.ndarray   # (C, D) float32
    action_mask: np.ndarray      # (C,) bool, False on padded rows
    target_text: str             # serialized annotation, may be None pre-annotation
    chunk_index: int
    hand_present: bool           # any hand frame inside the chunk


def chunk_episode(ep: Episode, chunk_size: int = CHUNK_SIZE):
    """Split an episode into chunk-aligned training samples.

    The final partial chunk is padded by repeating the last action with a
    mask marking padded rows.
    """
    assert len(ep.frames) >= 1
    samples = []
    n = len(ep.frames)
    for k in range(-(-n // chunk_size)):
        lo = k * chunk_size
        hi = min(lo + chunk_size, n)
        block = ep.frames[lo:hi]
        actions = np.stack([f.action for f in block]).astype(np.float32)
        mask = np.zeros(chunk_size, dtype=bool)
        mask[:hi - lo] = True
        if hi - lo < chunk_size:
            pad = np.repeat(actions[-1:], chunk_size - (hi - lo), axis=0)
            actions = np.concatenate([actions, pad], axis=0)
        obs = ep.frames[lo]
        samples.append(ChunkSample(
            img_wrist=obs.img_wrist, img_top=obs.img_top, state=obs.state,
            instruction=ep.instruction,
            target_actions=actions, action_mask=mask,
            target_text=ep.annotations.get(k),
            chunk_index=k,
            hand_present=any(f.hand_present for f in block)))
    return samples


def chunk_stage_info(ep: Episode, chunk_size: int = CHUNK_SIZE):
    """Per-chunk (stage_name, hand_flag, stage_progress) used for annotation.

    stage_name is the majority stage inside the chunk; progress is the
    fraction of that stage's frames already elapsed at the chunk start.
    """
    stages = [f.stage_name for f in ep.frames]
    info = []
    for k in range(ep.num_chunks(chunk_size)):
        lo = k * chunk_size
        hi = min(lo + chunk_size, len(stages))
        block = stages[lo:hi]
        counts = {}
        for s in block:
            counts[s] = counts.get(s, 0) + 1
        stage = max(counts, key=lambda s: (counts[s], -block.index(s)))
        idxs = [i for i, s in enumerate(stages) if s == stage]
        before = sum(1 for i in idxs if i < lo)
        progress = before / max(1, len(idxs))
        hand = any(ep.frames[i].hand_present for i in range(lo, hi))
        info.append((stage, hand, progress))
    return info
