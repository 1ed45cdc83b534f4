"""Closed-loop rollout: predict a 50-action chunk, execute it, repeat.

At every chunk boundary the current observation (both camera renders,
normalized joint state, instruction) is fed through the model; the
predicted chunk is executed open-loop in the simulator and one annotation
is greedily decoded from the same pooled expert context.  Hand intrusions
are injected from a schedule exactly as during data collection.
"""

import numpy as np
import torch

from ..data.episode import Episode, Frame
from ..sim import make_scene, render, step, with_hand
from ..sim.tasks import default_registry

DEFAULT_MAX_CHUNKS = 12


def _tensor_image(img):
    return torch.from_numpy(np.asarray(img, dtype=np.float64)).unsqueeze(0)


@torch.no_grad()
def rollout_episode(model, tokenizer, cfg, task, seed, schedule=None,
                    registry=None, max_chunks=DEFAULT_MAX_CHUNKS,
                    decode="greedy", decode_seed=0):
    """Run the policy in the simulator; returns an Episode whose
    annotations are the model's own generated text, one per chunk."""
    reg = registry or default_registry()
    if isinstance(task, str):
        task = reg[task]
    resolution = cfg.image_hw
    instr_ids = tokenizer.encode(task.instruction, add_special=False)
    instr = torch.tensor([tokenizer.pad_to(instr_ids, cfg.max_instruction_len)],
                         dtype=torch.long)

    scene = with_hand(make_scene(task, seed, reg), schedule)
    frames = []
    annotations = {}
    for k in range(max_chunks):
        img_wrist = render(scene, "wrist", resolution, reg)
        img_top = render(scene, "top", resolution, reg)
        state = np.asarray(reg.arm.normalize(scene.q), dtype=np.float32)
        out = model(_tensor_image(img_wrist), _tensor_image(img_top),
                    torch.from_numpy(state.astype(np.float64)).unsqueeze(0),
                    instr)
        ids = model.generate_text(out["c_proj"], tokenizer.bos_id,
                                  tokenizer.eos_id, mode=decode,
                                  seed=decode_seed + k)[0].tolist()
        annotations[k] = tokenizer.decode(ids)
        chunk = out["a_t"][0].numpy().astype(np.float32)
        chunk = np.clip(chunk, -100.0, 100.0)
        for j in range(cfg.chunk_size):
            action = chunk[j]
            frames.append(Frame(
                t=scene.t,
                img_wrist=img_wrist if j == 0 else render(scene, "wrist", resolution, reg),
                img_top=img_top if j == 0 else render(scene, "top", resolution, reg),
                state=np.asarray(reg.arm.normalize(scene.q), dtype=np.float32),
                action=action,
                stage_name=f"chunk_{k}",
                hand_present=bool(scene.hand_present)))
            target = reg.arm.denormalize(action.astype(np.float64))
            grip_cmd = bool(action[5] > 0.0)
            scene = with_hand(step(scene, target, grip_cmd, reg), schedule)

    ep = Episode(
        task_id=task.task_id, instruction=task.instruction, frames=frames,
        safety_intervention=any(f.hand_present for f in frames),
        annotations=annotations, seed=seed, schedule=schedule)
    return ep.validate()
