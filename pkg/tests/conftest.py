import numpy as np
import pytest

from demobot.annotate.oracle import annotate_episode
from demobot.data.recorder import record_episode
from demobot.model.config import micro_config
from demobot.model.tokenizer import build_tokenizer
from demobot.sim.hand import HandIntrusionSchedule
from demobot.sim.tasks import default_registry

LOW_RES = (16, 16)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def tokenizer():
    return build_tokenizer()


@pytest.fixture(scope="session")
def em_episode(registry):
    """One scripted EM-induction episode at low resolution, annotated."""
    ep = record_episode(registry["em_induction"], seed=3, resolution=LOW_RES,
                        registry=registry)
    ep.annotations = annotate_episode(ep)
    return ep


@pytest.fixture(scope="session")
def intrusion_episode(registry):
    sched = HandIntrusionSchedule(enter_t=150, leave_t=260, entry_pos=(0.0, 0.3))
    ep = record_episode(registry["em_induction"], seed=3, schedule=sched,
                        resolution=LOW_RES, registry=registry)
    ep.annotations = annotate_episode(ep)
    return ep


@pytest.fixture(scope="session")
def em_episode_micro(registry):
    """EM episode annotated at the micro config's chunk size."""
    ep = record_episode(registry["em_induction"], seed=3, resolution=LOW_RES,
                        registry=registry)
    ep.annotations = annotate_episode(ep, chunk_size=4)
    return ep


@pytest.fixture()
def tiny_cfg():
    """Micro model sized for fast training tests on real episodes."""
    return micro_config(steps=8, warmup_recon_steps=2, checkpoint_every=4,
                        max_instruction_len=32, max_text_len=128)


def random_batch(cfg, tokenizer, rng, batch=2):
    """Synthetic batch with the right shapes for direct loss/forward tests."""
    import torch
    h, w = cfg.image_hw
    v = len(tokenizer)
    text = rng.integers(5, v, size=(batch, 12))
    return {
        "img_wrist": torch.from_numpy(rng.random((batch, h, w, 3))),
        "img_top": torch.from_numpy(rng.random((batch, h, w, 3))),
        "state": torch.from_numpy(rng.uniform(-100, 100, size=(batch, 6))),
        "instr_tokens": torch.from_numpy(
            rng.integers(5, v, size=(batch, cfg.max_instruction_len))),
        "target_actions": torch.from_numpy(
            rng.uniform(-99, 99, size=(batch, cfg.chunk_size, cfg.action_dim))),
        "action_mask": torch.ones(batch, cfg.chunk_size, dtype=torch.bool),
        "text_tokens": torch.from_numpy(text),
        "pad_id": tokenizer.pad_id,
    }
