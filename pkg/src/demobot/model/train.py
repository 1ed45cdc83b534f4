"""Training: vision reconstruction warm-up, then joint action+text
optimization of the non-frozen parameters with Adam and cosine lr decay."""

import json
import math
import os

import numpy as np
import torch

from ..errors import TrainingAborted
from ..data.episode import chunk_episode
from .losses import loss_total
from .network import DTYPE, PedagogicalVLA
from .tokenizer import build_tokenizer


class SampleBank:
    """All chunk samples of a corpus, tensorized once."""

    def __init__(self, episodes, tokenizer, cfg):
        self.tokenizer = tokenizer
        self.cfg = cfg
        wrist, top, state, instr, acts, masks, text = [], [], [], [], [], [], []
        self.meta = []
        for ep in episodes:
            instr_ids = tokenizer.encode(ep.instruction, add_special=False)
            instr_ids = tokenizer.pad_to(instr_ids, cfg.max_instruction_len)
            for s in chunk_episode(ep, cfg.chunk_size):
                wrist.append(np.asarray(s.img_wrist, dtype=np.float64))
                top.append(np.asarray(s.img_top, dtype=np.float64))
                state.append(s.state.astype(np.float64))
                instr.append(instr_ids)
                acts.append(s.target_actions.astype(np.float64))
                masks.append(s.action_mask)
                if s.target_text is None:
                    raise ValueError("corpus episode lacks a chunk annotation")
                ids = tokenizer.encode(s.target_text)
                if len(ids) > cfg.max_text_len:
                    raise ValueError("annotation exceeds max_text_len")
                text.append(ids)
                self.meta.append((ep.task_id, s.chunk_index, s.hand_present))
        self.img_wrist = torch.from_numpy(np.stack(wrist))
        self.img_top = torch.from_numpy(np.stack(top))
        self.state = torch.from_numpy(np.stack(state))
        self.instr = torch.tensor(instr, dtype=torch.long)
        self.actions = torch.from_numpy(np.stack(acts))
        self.mask = torch.from_numpy(np.stack(masks))
        # pad only to the longest annotation in the corpus (capped by config)
        t_max = max(len(ids) for ids in text)
        self.text = torch.tensor([tokenizer.pad_to(ids, t_max) for ids in text],
                                 dtype=torch.long)

    def __len__(self):
        return self.img_wrist.shape[0]

    def batch(self, idx):
        idx = torch.as_tensor(np.asarray(idx), dtype=torch.long)
        return {
            "img_wrist": self.img_wrist[idx], "img_top": self.img_top[idx],
            "state": self.state[idx], "instr_tokens": self.instr[idx],
            "target_actions": self.actions[idx], "action_mask": self.mask[idx],
            "text_tokens": self.text[idx], "pad_id": self.tokenizer.pad_id,
        }


def cosine_lr(step, total_steps, lr, lr_min):
    if total_steps <= 1:
        return lr
    frac = min(step / (total_steps - 1), 1.0)
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + math.cos(math.pi * frac))


def warmup_vision(model, bank, cfg, rng, log):
    """Brief reconstruction pretraining of the vision encoder, then freeze."""
    model.set_frozen(vision=False, backbone=True)
    opt = torch.optim.Adam(model.vision.parameters(), lr=cfg.lr,
                           betas=cfg.adam_betas)
    n = len(bank)
    for step in range(cfg.warmup_recon_steps):
        idx = rng.integers(0, n, size=min(cfg.batch_size, n))
        b = bank.batch(idx)
        loss = model.vision.recon_loss(b["img_wrist"], b["img_top"])
        opt.zero_grad()
        loss.backward()
        opt.step()
        log.append({"phase": "warmup", "step": step, "recon_loss": float(loss.detach())})
    model.set_frozen(vision=True, backbone=True)


def _dump_state(model, opt, step, out_dir):
    if out_dir is None:
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"abort_step{step}.pt")
    torch.save({"model": model.state_dict(), "optimizer": opt.state_dict(),
                "step": step}, path)
    return path


def train(episodes, cfg, tokenizer=None, out_dir=None, lambda_text=None,
          model=None, checkpoint_hook=None, start_step=0, optimizer=None):
    """Train on a list of episodes; returns (model, tokenizer, log).

    Deterministic given cfg.seed.  Writes a line-delimited training log to
    out_dir/train_log.jsonl when out_dir is given.  A non-finite loss
    aborts with a diagnostic state dump.

    Passing a checkpointed (model, optimizer, start_step) resumes exactly:
    the sampling RNG is advanced past the draws already consumed, so the
    continued run is bit-identical to an uninterrupted one.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("empty corpus")
    tok = tokenizer or build_tokenizer()
    bank = SampleBank(episodes, tok, cfg)
    resuming = start_step > 0
    if resuming and (model is None or optimizer is None):
        raise ValueError("resume needs both a model and its optimizer state")
    if model is None:
        model = PedagogicalVLA(cfg, len(tok))
    rng = np.random.default_rng(cfg.seed)
    log = []
    n = len(bank)

    if resuming:
        # replay the RNG draws the interrupted run already consumed
        for _ in range(cfg.warmup_recon_steps):
            rng.integers(0, n, size=min(cfg.batch_size, n))
        if n > cfg.batch_size:
            for _ in range(start_step):
                rng.integers(0, n, size=cfg.batch_size)
        opt = optimizer
    else:
        warmup_vision(model, bank, cfg, rng, log)
        trainable = [p for p in model.parameters() if p.requires_grad]
        opt = torch.optim.Adam(trainable, lr=cfg.lr, betas=cfg.adam_betas)

    frozen_before = {n2: p.detach().clone() for n2, p in model.named_parameters()
                     if not p.requires_grad}
    lam = cfg.lambda_text if lambda_text is None else lambda_text
    for step in range(start_step, cfg.steps):
        lr = cosine_lr(step, cfg.steps, cfg.lr, cfg.lr_min)
        for g in opt.param_groups:
            g["lr"] = lr
        if n <= cfg.batch_size:
            idx = np.arange(n)       # full-batch when the corpus is tiny
        else:
            idx = rng.integers(0, n, size=cfg.batch_size)
        batch = bank.batch(idx)
        total_t, comps = loss_total(model, batch, lambda_text=lam)
        if not math.isfinite(comps["total"]):
            dump = _dump_state(model, opt, step, out_dir)
            raise TrainingAborted(
                f"non-finite loss at step {step}: {comps}", dump_path=dump)
        opt.zero_grad()
        total_t.backward()
        opt.step()
        log.append({"phase": "train", "step": step, "lr": lr,
                    "action_loss": comps["action_loss"],
                    "text_loss": comps["text_loss"], "total": comps["total"]})
        if checkpoint_hook and cfg.checkpoint_every and \
                (step + 1) % cfg.checkpoint_every == 0:
            checkpoint_hook(model, opt, step + 1)

    for name, before in frozen_before.items():
        after = dict(model.named_parameters())[name]
        if not torch.equal(before, after):
            raise AssertionError(f"frozen parameter {name} changed during training")

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "train_log.jsonl"), "w") as fh:
            for rec in log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return model, tok, log
