"""Task specifications loaded from the declarative scene template file."""

from dataclasses import dataclass
from importlib import resources

import yaml

from .arm import ArmModel

TASK_IDS = ("em_induction", "flame_test", "yeast_fermentation",
            "rock_classification", "agar_plate")


@dataclass(frozen=True)
class ObjectTemplate:
    name: str
    pos: tuple            # (x, y, z) rest position
    color: tuple
    radius: float
    graspable: bool
    shape: str
    jitter: bool = True
    jitter_with: str = None


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    instruction: str
    stage_list: tuple
    objects: dict            # name -> ObjectTemplate
    rules: tuple             # flag-toggle rules, see scene.step
    success_predicates: tuple
    forbidden_zones: tuple
    hazard_profile: str

    def __post_init__(self):
        assert self.stage_list, "stage_list must be non-empty"
        names = set(self.objects)
        for rule in self.rules:
            assert rule["object"] in names
        for pred in self.success_predicates:
            assert pred["object"] in names


@dataclass(frozen=True)
class Workspace:
    x: tuple
    y: tuple
    extent: float
    jitter_frac: float

    @property
    def jitter(self):
        return self.jitter_frac * self.extent


def _load_raw(path=None):
    if path is None:
        text = resources.files("demobot.sim").joinpath("templates.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return yaml.safe_load(text)


class TaskRegistry:
    """All five tasks plus the shared arm/workspace/hand configuration."""

    def __init__(self, path=None):
        raw = _load_raw(path)
        self.workspace = Workspace(
            x=tuple(raw["workspace"]["x"]), y=tuple(raw["workspace"]["y"]),
            extent=float(raw["workspace"]["extent"]),
            jitter_frac=float(raw["workspace"]["jitter_frac"]))
        arm = raw["arm"]
        self.arm = ArmModel(
            link_lengths=tuple(arm["link_lengths"]),
            joint_limits=tuple(tuple(p) for p in arm["joint_limits"]),
            max_joint_delta=float(arm["max_joint_delta"]),
            grasp_radius=float(arm["grasp_radius"]))
        self.home_pose = tuple(arm["home_pose"])
        self.hand_color = tuple(raw["hand"]["color"])
        self.hand_radius = float(raw["hand"]["radius"])
        self.tasks = {}
        for task_id, spec in raw["tasks"].items():
            objects = {
                name: ObjectTemplate(
                    name=name, pos=tuple(o["pos"]), color=tuple(o["color"]),
                    radius=float(o["radius"]), graspable=bool(o.get("graspable", False)),
                    shape=o.get("shape", "circle"), jitter=bool(o.get("jitter", True)),
                    jitter_with=o.get("jitter_with"))
                for name, o in spec["objects"].items()}
            self.tasks[task_id] = TaskSpec(
                task_id=task_id,
                instruction=spec["instruction"],
                stage_list=tuple(spec["stage_list"]),
                objects=objects,
                rules=tuple(spec.get("rules", ())),
                success_predicates=tuple(spec.get("predicates", ())),
                forbidden_zones=tuple(spec.get("forbidden_zones", ())),
                hazard_profile=spec.get("hazard_profile", "none"))
        assert set(self.tasks) == set(TASK_IDS)

    def __getitem__(self, task_id) -> TaskSpec:
        return self.tasks[task_id]


_default = None


def default_registry() -> TaskRegistry:
    global _default
    if _default is None:
        _default = TaskRegistry()
    return _default


def get_task(task_id) -> TaskSpec:
    return default_registry()[task_id]
