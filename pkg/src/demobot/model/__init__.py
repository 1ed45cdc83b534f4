from .config import (ModelConfig, config_from_dict, desk_config, micro_config,
                     paper_config)
from .tokenizer import Tokenizer, build_tokenizer, corpus_texts
from .network import PedagogicalVLA
from .losses import action_mse, loss_total, text_ce
from .train import SampleBank, cosine_lr, train
from .checkpoint import load_checkpoint, restore_optimizer, save_checkpoint
from .rollout import rollout_episode

__all__ = [
    "ModelConfig", "config_from_dict", "desk_config", "micro_config",
    "paper_config", "Tokenizer", "build_tokenizer", "corpus_texts",
    "PedagogicalVLA", "action_mse", "loss_total", "text_ce",
    "SampleBank", "cosine_lr", "train",
    "load_checkpoint", "restore_optimizer", "save_checkpoint",
    "rollout_episode",
]
