"""Hand intrusion: overlays hand presence onto a stream of scenes."""

from dataclasses import dataclass, replace
import math


@dataclass(frozen=True)
class HandIntrusionSchedule:
    enter_t: int
    leave_t: float = math.inf     # frame index or inf
    entry_pos: tuple = (0.0, 0.3)

    def __post_init__(self):
        assert self.enter_t < self.leave_t

    def active(self, t) -> bool:
        return self.enter_t <= t < self.leave_t


def with_hand(scene, schedule):
    """Scene with hand presence set according to the schedule (identity
    when schedule is None)."""
    if schedule is None:
        return scene
    if schedule.active(scene.t):
        return replace(scene, hand_present=True, hand_pos=tuple(schedule.entry_pos))
    if scene.hand_present:
        return replace(scene, hand_present=False, hand_pos=None)
    return scene


def inject_hand(scene_stream, schedule):
    """Apply a HandIntrusionSchedule to an iterable of scenes."""
    for scene in scene_stream:
        yield with_hand(scene, schedule)
