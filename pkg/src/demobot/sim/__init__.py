from .arm import ArmModel, UnreachableWaypointError
from .tasks import TASK_IDS, TaskSpec, TaskRegistry, default_registry, get_task
from .scene import SceneState, make_scene, step, in_forbidden_zone
from .render import render, to_uint8, from_uint8
from .scripted import scripted_policy, MIN_FRAMES, MAX_FRAMES
from .hand import HandIntrusionSchedule, inject_hand, with_hand
from .predicates import PredicateResult, evaluate_all, evaluate_predicate
