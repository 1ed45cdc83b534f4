"""Checkpoints: JSON manifest + named little-endian parameter blobs.

Blobs are stored at full float64 working precision (rather than float32)
so save → load → continue reproduces training bit for bit; optimizer
moments and the data-sampling RNG state are included for exact resume.
"""

import dataclasses
import json
import os

import numpy as np
import torch

from ..errors import StorageError
from .config import ModelConfig
from .network import PedagogicalVLA
from .tokenizer import Tokenizer

CHECKPOINT_VERSION = 1


def save_checkpoint(path, model, cfg, tokenizer, step=0, seed=0, metrics=None,
                    optimizer=None, rng_state=None):
    os.makedirs(path, exist_ok=True)
    params = {name: p.detach().numpy().astype("<f8")
              for name, p in model.named_parameters()}
    np.savez(os.path.join(path, "params.npz"), **params)
    opt_arrays = {}
    opt_meta = None
    if optimizer is not None:
        named = list(model.named_parameters())
        trainable = [n for n, p in named if p.requires_grad]
        opt_meta = {"trainable": trainable, "steps": {}}
        id_to_name = {id(p): n for n, p in named}
        for group in optimizer.param_groups:
            for p in group["params"]:
                st = optimizer.state.get(p)
                if not st:
                    continue
                name = id_to_name[id(p)]
                opt_meta["steps"][name] = int(st["step"])
                opt_arrays[f"exp_avg::{name}"] = st["exp_avg"].numpy().astype("<f8")
                opt_arrays[f"exp_avg_sq::{name}"] = st["exp_avg_sq"].numpy().astype("<f8")
        np.savez(os.path.join(path, "optimizer.npz"), **opt_arrays)
    manifest = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(cfg),
        "step": step,
        "seed": seed,
        "metrics": metrics or {},
        "tokenizer": tokenizer.as_manifest(),
        "param_names": sorted(params),
        "has_optimizer": optimizer is not None,
        "optimizer_steps": opt_meta["steps"] if opt_meta else {},
        "frozen": model.frozen_names(),
        "rng_state": list(map(int, rng_state)) if rng_state is not None else None,
    }
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return path


def load_checkpoint(path):
    """Returns (model, cfg, tokenizer, manifest, optimizer_state).

    optimizer_state is None or {"steps": ..., "exp_avg": {...}, "exp_avg_sq": {...}}.
    """
    try:
        with open(os.path.join(path, "manifest.json")) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise StorageError(f"no checkpoint manifest in {path}") from exc
    except json.JSONDecodeError as exc:
        raise StorageError(f"corrupt checkpoint manifest: {exc}") from exc
    version = manifest.get("checkpoint_version")
    if version != CHECKPOINT_VERSION:
        raise StorageError(
            f"checkpoint version {version!r} unsupported (expected {CHECKPOINT_VERSION})")
    raw = dict(manifest["config"])
    for key in ("image_hw", "adam_betas"):
        raw[key] = tuple(raw[key])
    cfg = ModelConfig(**raw)
    tokenizer = Tokenizer.from_manifest(manifest["tokenizer"])
    model = PedagogicalVLA(cfg, len(tokenizer.vocab))
    try:
        blobs = np.load(os.path.join(path, "params.npz"))
    except Exception as exc:
        raise StorageError(f"cannot read checkpoint params: {exc}") from exc
    named = dict(model.named_parameters())
    if sorted(named) != manifest["param_names"]:
        raise StorageError("checkpoint parameter names do not match the model")
    with torch.no_grad():
        for name, p in named.items():
            arr = blobs[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise StorageError(f"shape mismatch for {name}")
            p.copy_(torch.from_numpy(arr))
    frozen = set(manifest["frozen"])
    for name, p in named.items():
        p.requires_grad_(name not in frozen)
    opt_state = None
    if manifest.get("has_optimizer"):
        ob = np.load(os.path.join(path, "optimizer.npz"))
        opt_state = {"steps": manifest.get("optimizer_steps", {}),
                     "exp_avg": {}, "exp_avg_sq": {}}
        for key in ob.files:
            kind, name = key.split("::", 1)
            opt_state[kind][name] = torch.from_numpy(ob[key])
    return model, cfg, tokenizer, manifest, opt_state


def restore_optimizer(model, opt_state, lr, betas):
    """Build an Adam whose moments exactly match a saved state."""
    named = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    opt = torch.optim.Adam([p for _, p in named], lr=lr, betas=betas)
    if opt_state is None:
        return opt
    for name, p in named:
        if name in opt_state["exp_avg"]:
            opt.state[p] = {
                "step": torch.tensor(float(opt_state["steps"].get(name, 0))),
                "exp_avg": opt_state["exp_avg"][name].clone(),
                "exp_avg_sq": opt_state["exp_avg_sq"][name].clone(),
            }
    return opt
