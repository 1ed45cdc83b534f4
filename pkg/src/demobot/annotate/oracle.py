"""Deterministic template oracle producing pedagogical annotations.

Stands in for a remote LLM annotator.  Every (task, stage) pair has a
template with at least two learning-focus variants keyed by progress
bucket (early vs. late in the stage).  Flame-test templates carry safety
language even without a hand present (inherent hazard awareness), and a
hand-present chunk always produces the stop/intervention annotation.
"""

from ..data.episode import chunk_stage_info
from ..sim.tasks import default_registry
from .schema import SAFETY_NORMAL, SAFETY_STOP, Annotation

# template entry: stage label, action description, [focus variants], connection, next step
TEMPLATES = {
    "em_induction": {
        "pickup_magnet": {
            "stage": "Magnet pickup",
            "action": "Grasping the bar magnet from the table",
            "focus": ["A magnet carries a field we can use to induce current.",
                      "With the magnet held firmly we can move it relative to the coil."],
            "connection": "Handling the magnet sets up the induction demonstration.",
            "next": "Carry the magnet over to the coil.",
        },
        "insert_in_coil": {
            "stage": "Magnet insertion",
            "action": "Sliding the magnet toward the coil along its axis",
            "focus": ["Bringing the magnet near the coil changes the magnetic flux through it.",
                      "As the magnet enters the coil the flux through the windings grows."],
            "connection": "Changing flux is what induces a voltage in the coil.",
            "next": "Move the magnet in and out slowly.",
        },
        "oscillate_slow": {
            "stage": "Slow oscillation",
            "action": "Moving the magnet slowly in and out of the coil",
            "focus": ["Slow motion changes magnetic flux gradually, so the induced current is small.",
                      "Watch the meter: slow flux change gives a weak induced voltage."],
            "connection": "Links motion speed to the size of the induced current.",
            "next": "Repeat the motion faster and compare.",
        },
        "oscillate_fast": {
            "stage": "Fast oscillation",
            "action": "Moving the magnet quickly in and out of the coil",
            "focus": ["Fast motion changes magnetic flux rapidly, inducing a larger current.",
                      "The induced voltage grows with the rate of flux change; the meter swings wider."],
            "connection": "Shows that induced voltage depends on how fast the flux changes.",
            "next": "Return the magnet to its start position.",
        },
        "return_magnet": {
            "stage": "Magnet return",
            "action": "Placing the magnet back at its start position",
            "focus": ["With the magnet at rest the flux is constant and no current is induced.",
                      "Once motion stops, the meter returns to zero: no flux change, no current."],
            "connection": "Confirms that induction requires changing flux, not just a field.",
            "next": "Review how motion speed changed the meter reading.",
        },
    },
    "flame_test": {
        "pickup_wire": {
            "stage": "Wire pickup",
            "action": "Grasping the nichrome wire loop by its handle",
            "focus": ["Keep hands clear: the wire tip may be hot from earlier runs.",
                      "A clean wire loop avoids color contamination; handle it with care near the burner."],
            "connection": "A clean tool gives a trustworthy flame color result.",
            "next": "Dip the loop into the salt powder.",
        },
        "collect_sample": {
            "stage": "Sample collection",
            "action": "Dipping the wire loop into the metal salt powder",
            "focus": ["Only a small sample is needed; excess powder can spatter in the flame.",
                      "Work away from the burner while loading the loop to stay safe."],
            "connection": "Controlled sampling keeps the test safe and repeatable.",
            "next": "Hold the loaded loop in the flame.",
        },
        "heat_in_flame": {
            "stage": "Flame heating",
            "action": "Holding the wire loop in the hottest part of the flame",
            "focus": ["Caution: open flame in use. Heated metal ions emit light of a characteristic color.",
                      "Keep a safe distance from the burner. Electrons fall back to lower levels and emit colored light."],
            "connection": "Emission color identifies the metal ion in the sample.",
            "next": "Note the flame color, then clean the wire.",
        },
        "clean_wire": {
            "stage": "Wire cleaning",
            "action": "Rinsing the wire loop in the cleaning solution",
            "focus": ["Cleaning removes residue so colors do not mix; the wire may still be hot.",
                      "A rinsed loop prevents carry-over between samples and cools the tip safely."],
            "connection": "Clean equipment prevents false colors in later tests.",
            "next": "Return the wire to its stand.",
        },
        "return_wire": {
            "stage": "Wire return",
            "action": "Placing the wire loop back on its stand",
            "focus": ["Store hot tools in their stand so nobody touches them by accident.",
                      "With the wire racked safely, the burner area is clear again."],
            "connection": "Safe tool storage ends the hazard, completing the protocol.",
            "next": "Record the observed flame color.",
        },
    },
    "yeast_fermentation": {
        "pickup_scoop": {
            "stage": "Scoop pickup",
            "action": "Grasping the measuring scoop",
            "focus": ["Using the same scoop keeps every measured amount consistent.",
                      "Consistent measures let us compare the flasks fairly."],
            "connection": "Measured amounts make the experiment a fair test.",
            "next": "Add sugar to the flask.",
        },
        "add_sugar": {
            "stage": "Sugar dispensing",
            "action": "Adding a measured scoop of sugar to the flask",
            "focus": ["Sugar is the food source the yeast will break down.",
                      "The sugar amount is our independent variable in this setup."],
            "connection": "Controlling the sugar amount isolates its effect on fermentation.",
            "next": "Add the yeast next.",
        },
        "add_yeast": {
            "stage": "Yeast addition",
            "action": "Adding yeast to the flask",
            "focus": ["Yeast are living cells that ferment sugar into carbon dioxide.",
                      "Equal yeast in each flask keeps that factor constant."],
            "connection": "Living organisms drive the gas production we will observe.",
            "next": "Add warm water to activate the yeast.",
        },
        "add_water": {
            "stage": "Water addition",
            "action": "Pouring warm water into the flask",
            "focus": ["Warm water activates the yeast; too hot would kill the cells.",
                      "Water dissolves the sugar so yeast can reach it."],
            "connection": "Temperature control keeps the organisms alive and active.",
            "next": "Seal the flask with the cap.",
        },
        "seal_flask": {
            "stage": "Flask sealing",
            "action": "Sealing the flask with its cap",
            "focus": ["A sealed flask traps the carbon dioxide the yeast produce.",
                      "Trapped gas gives us a visible sign of fermentation."],
            "connection": "Sealing turns invisible metabolism into a measurable signal.",
            "next": "Watch the flask for signs of gas buildup.",
        },
        "observe_fermentation": {
            "stage": "Fermentation observation",
            "action": "Monitoring the sealed flask for gas buildup",
            "focus": ["Yeast break down sugar without oxygen, releasing carbon dioxide gas.",
                      "More gas over time means the yeast are actively fermenting."],
            "connection": "Gas volume links sugar concentration to metabolic rate.",
            "next": "Record observations at regular intervals.",
        },
    },
    "rock_classification": {
        "pickup_dropper": {
            "stage": "Dropper pickup",
            "action": "Grasping the acid dropper",
            "focus": ["The dropper delivers a small, controlled amount of dilute acid.",
                      "Small drops keep the acid test safe and tidy."],
            "connection": "Controlled dosing makes the chemical test reliable.",
            "next": "Draw acid into the dropper.",
        },
        "draw_acid": {
            "stage": "Acid drawing",
            "action": "Filling the dropper from the acid bottle",
            "focus": ["Handle dilute acid with care; a single drop is enough.",
                      "We use just enough acid to test the rock surface."],
            "connection": "Careful handling of reagents is part of good lab practice.",
            "next": "Apply a drop to the rock sample.",
        },
        "apply_acid": {
            "stage": "Acid test",
            "action": "Applying a dilute acid drop to the rock surface",
            "focus": ["Acid reacts with calcium carbonate, releasing carbon dioxide bubbles.",
                      "If the rock contains carbonate, the drop will fizz on contact."],
            "connection": "A chemical property, fizzing, helps classify the rock type.",
            "next": "Watch the rock surface for fizzing.",
        },
        "observe_reaction": {
            "stage": "Result observation",
            "action": "Holding position to observe the acid-rock reaction",
            "focus": ["Vigorous bubbles mean carbonate rock such as limestone.",
                      "Weak or no fizzing points to a non-carbonate rock like granite."],
            "connection": "Interpreting the reaction turns observation into classification.",
            "next": "Return the dropper, then sort the rock.",
        },
        "return_dropper": {
            "stage": "Dropper return",
            "action": "Placing the dropper back beside the acid bottle",
            "focus": ["Returning reagent tools promptly keeps the bench safe.",
                      "A tidy bench prevents accidental acid contact."],
            "connection": "Good housekeeping supports safe, repeatable tests.",
            "next": "Move the tested rock to its bin.",
        },
        "sort_rock": {
            "stage": "Rock sorting",
            "action": "Moving the tested rock into its classification bin",
            "focus": ["The fizz result decides which bin the rock belongs in.",
                      "Sorting by test outcome builds a classified collection."],
            "connection": "Classification by chemical evidence mirrors field geology.",
            "next": "Pick the next sample or finish the session.",
        },
    },
    "agar_plate": {
        "remove_lid": {
            "stage": "Plate preparation",
            "action": "Lifting the petri dish lid and setting it aside",
            "focus": ["Minimize lid-open time to keep airborne microbes out.",
                      "Sterile technique starts with a brief, deliberate lid lift."],
            "connection": "Aseptic handling keeps later cultures uncontaminated.",
            "next": "Pour the molten agar into the dish.",
        },
        "pour_agar": {
            "stage": "Agar pouring",
            "action": "Dispensing molten agar evenly across the petri dish",
            "focus": ["Molten agar is hot; pour smoothly to avoid splashes and bubbles.",
                      "An even, bubble-free layer gives a uniform growth surface."],
            "connection": "A consistent agar surface makes colony counts comparable.",
            "next": "Replace the lid promptly.",
        },
        "replace_lid": {
            "stage": "Lid replacement",
            "action": "Placing the lid back onto the petri dish",
            "focus": ["Re-covering quickly limits the plate's exposure to the air.",
                      "The closed dish can now cool and solidify undisturbed."],
            "connection": "Prompt covering preserves the sterile field we created.",
            "next": "Let the agar set before storing the plate.",
        },
        "finish": {
            "stage": "Plate finishing",
            "action": "Holding position while the agar sets",
            "focus": ["The agar gels as it cools, forming a solid growth medium.",
                      "Once set, the plate is ready for inoculation in a later lesson."],
            "connection": "A finished plate links preparation to future experiments.",
            "next": "Store the plate agar-side up.",
        },
    },
}

_STOP_ANNOTATION = Annotation(
    stage="Human intervention detected",
    action_desc="Pausing operation - human hand in workspace",
    safety_status=SAFETY_STOP,
    learning_focus=("Laboratory safety protocols. The robot halts immediately "
                    "when a hand enters its workspace to prevent injury."),
    connection=("Understanding human-robot safety boundaries is essential in "
                "automated laboratory environments."),
    next_step="Wait for a clear workspace before resuming the experiment.")


def _check_coverage():
    reg = default_registry()
    for task_id in reg.tasks:
        task = reg[task_id]
        table = TEMPLATES.get(task_id, {})
        for stage in task.stage_list:
            entry = table.get(stage)
            assert entry is not None, f"no template for ({task_id}, {stage})"
            assert len(entry["focus"]) >= 2, f"({task_id}, {stage}) needs >= 2 variants"


_check_coverage()


def template_annotate(task, stage_name: str, hand_present: bool,
                      progress: float) -> Annotation:
    """Deterministic annotation for one chunk.

    progress is the fraction of the stage already elapsed; it selects the
    learning-focus variant (early vs. late bucket).
    """
    task_id = task if isinstance(task, str) else task.task_id
    if hand_present:
        return _STOP_ANNOTATION
    table = TEMPLATES[task_id]
    if stage_name not in table:
        raise KeyError(f"unknown stage {stage_name!r} for task {task_id!r}")
    entry = table[stage_name]
    variants = entry["focus"]
    bucket = min(len(variants) - 1, int(max(0.0, min(progress, 1.0)) * len(variants)))
    return Annotation(
        stage=entry["stage"],
        action_desc=entry["action"],
        safety_status=SAFETY_NORMAL,
        learning_focus=variants[bucket],
        connection=entry["connection"],
        next_step=entry["next"])


def annotate_episode(ep, chunk_size: int = 50) -> dict:
    """Serialized annotation per chunk index for a recorded episode."""
    out = {}
    for k, (stage, hand, progress) in enumerate(chunk_stage_info(ep, chunk_size)):
        ann = template_annotate(ep.task_id, stage, hand, progress)
        out[k] = ann.serialize()
    return out
