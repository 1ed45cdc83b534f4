import math

import numpy as np
import pytest
import torch

from demobot.errors import StorageError, TrainingAborted
from demobot.model.checkpoint import (load_checkpoint, restore_optimizer,
                                      save_checkpoint)
from demobot.model.config import micro_config
from demobot.model.losses import action_mse, loss_total, text_ce
from demobot.model.network import PedagogicalVLA
from demobot.model.train import SampleBank, cosine_lr, train

from conftest import random_batch


def test_loss_decomposition(tokenizer):
    cfg = micro_config()
    model = PedagogicalVLA(cfg, len(tokenizer))
    rng = np.random.default_rng(3)
    for lam in (0.005, 0.1, 1.0):
        b = random_batch(cfg, tokenizer, rng)
        _, comps = loss_total(model, b, lambda_text=lam)
        assert abs(comps["total"] - (comps["action_loss"]
                                     + lam * comps["text_loss"])) < 1e-9
    b = random_batch(cfg, tokenizer, rng)
    _, comps = loss_total(model, b, lambda_text=0.0)
    assert comps["total"] == comps["action_loss"]


def test_action_mse_masking():
    pred = torch.zeros(1, 4, 6, dtype=torch.float64)
    target = torch.ones(1, 4, 6, dtype=torch.float64) * 2.0
    mask = torch.tensor([[True, True, False, False]])
    assert float(action_mse(pred, target, mask)) == pytest.approx(4.0)


def test_text_ce_ignores_padding(tokenizer):
    v = len(tokenizer)
    logits = torch.zeros(1, 3, v, dtype=torch.float64)
    targets = torch.tensor([[5, tokenizer.pad_id, tokenizer.pad_id]])
    uniform = math.log(v)
    assert float(text_ce(logits, targets, tokenizer.pad_id)) == \
        pytest.approx(uniform)


def test_cosine_lr_endpoints():
    assert cosine_lr(0, 100, 1e-3, 1e-6) == pytest.approx(1e-3)
    assert cosine_lr(99, 100, 1e-3, 1e-6) == pytest.approx(1e-6)
    mid = cosine_lr(50, 101, 1e-3, 1e-6)
    assert 1e-6 < mid < 1e-3


def test_train_reduces_loss_and_logs(em_episode_micro, tiny_cfg, tokenizer, tmp_path):
    cfg = tiny_cfg.with_overrides(steps=60)
    model, tok, log = train([em_episode_micro], cfg, tokenizer=tokenizer,
                            out_dir=str(tmp_path))
    steps = [r for r in log if r["phase"] == "train"]
    assert len(steps) == cfg.steps
    # minibatches of 2 are noisy, so compare averaged early vs late loss
    early = sum(r["total"] for r in steps[:5]) / 5
    late = sum(r["total"] for r in steps[-5:]) / 5
    assert late < early
    assert (tmp_path / "train_log.jsonl").exists()


def test_train_is_deterministic(em_episode_micro, tiny_cfg, tokenizer):
    m1, _, log1 = train([em_episode_micro], tiny_cfg, tokenizer=tokenizer)
    m2, _, log2 = train([em_episode_micro], tiny_cfg, tokenizer=tokenizer)
    assert log1[-1]["total"] == log2[-1]["total"]
    for (n, p1), (_, p2) in zip(m1.named_parameters(), m2.named_parameters()):
        assert torch.equal(p1, p2), n


def test_nan_aborts_with_dump(em_episode_micro, tiny_cfg, tokenizer, tmp_path):
    cfg = tiny_cfg.with_overrides(lr=1e18, steps=40)
    with pytest.raises(TrainingAborted) as err:
        train([em_episode_micro], cfg, tokenizer=tokenizer, out_dir=str(tmp_path))
    assert err.value.dump_path is not None


def test_missing_annotation_rejected(em_episode_micro, tiny_cfg, tokenizer):
    import copy
    ep = copy.copy(em_episode_micro)
    ep.annotations = {}
    with pytest.raises(ValueError):
        SampleBank([ep], tokenizer, tiny_cfg)


def test_checkpoint_round_trip_and_exact_resume(em_episode_micro, tiny_cfg,
                                                tokenizer, tmp_path):
    cfg = tiny_cfg
    ck = str(tmp_path / "ck")

    def hook(model, opt, step):
        if step == 4:
            save_checkpoint(ck, model, cfg, tokenizer, step=step,
                            optimizer=opt)

    m_full, _, _ = train([em_episode_micro], cfg, tokenizer=tokenizer,
                         checkpoint_hook=hook)
    m_loaded, cfg_l, tok_l, manifest, opt_state = load_checkpoint(ck)
    assert cfg_l == cfg
    assert tok_l.vocab == tokenizer.vocab
    assert manifest["step"] == 4
    opt = restore_optimizer(m_loaded, opt_state, lr=cfg_l.lr,
                            betas=cfg_l.adam_betas)
    m_res, _, _ = train([em_episode_micro], cfg_l, tokenizer=tok_l, model=m_loaded,
                        optimizer=opt, start_step=4)
    full = dict(m_full.named_parameters())
    for name, p in m_res.named_parameters():
        assert torch.equal(p, full[name]), name


def test_checkpoint_version_guard(em_episode_micro, tiny_cfg, tokenizer, tmp_path):
    import json
    model = PedagogicalVLA(tiny_cfg, len(tokenizer))
    ck = str(tmp_path / "ck")
    save_checkpoint(ck, model, tiny_cfg, tokenizer)
    mpath = tmp_path / "ck" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    manifest["checkpoint_version"] = 99
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(StorageError):
        load_checkpoint(ck)
    with pytest.raises(StorageError):
        load_checkpoint(str(tmp_path / "nowhere"))


def test_frozen_params_do_not_move(em_episode_micro, tiny_cfg, tokenizer):
    model, _, _ = train([em_episode_micro], tiny_cfg, tokenizer=tokenizer)
    before = {n: p.clone() for n, p in model.named_parameters()
              if not p.requires_grad}
    assert before, "expected frozen parameters after training"
    assert all(n.startswith(("vision.", "backbone.")) for n in before)
