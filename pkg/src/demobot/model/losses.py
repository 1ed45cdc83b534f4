"""Combined training loss: masked action MSE + λ · token cross-entropy.

total = action + λ·text is computed in python floats from the two
component floats, so the decomposition identity holds exactly; the torch
scalar returned for backprop is built the same way.
"""

import torch
import torch.nn.functional as F


def action_mse(pred, target, mask):
    """Mean squared error over unmasked chunk rows and action dims."""
    err = (pred - target) ** 2                       # (B, C, D)
    m = mask.unsqueeze(-1).to(err.dtype)             # (B, C, 1)
    denom = m.sum() * err.shape[-1]
    return (err * m).sum() / denom


def text_ce(logits, targets, pad_id):
    """Mean cross-entropy over non-PAD target tokens (teacher forcing)."""
    v = logits.shape[-1]
    flat_logits = logits.reshape(-1, v)
    flat_targets = targets.reshape(-1)
    keep = flat_targets != pad_id
    if not bool(keep.any()):
        return logits.sum() * 0.0
    return F.cross_entropy(flat_logits[keep], flat_targets[keep])


def loss_total(model, batch, lambda_text=None):
    """batch: dict with img_wrist, img_top, state, instr_tokens,
    target_actions, action_mask, text_tokens, pad_id.

    Returns (torch scalar for backprop, components dict with exact python
    floats satisfying total == action + λ·text).
    """
    lam = model.cfg.lambda_text if lambda_text is None else lambda_text
    text_tokens = batch["text_tokens"]
    out = model(batch["img_wrist"], batch["img_top"], batch["state"],
                batch["instr_tokens"], text_tokens)
    a_loss = action_mse(out["a_t"], batch["target_actions"], batch["action_mask"])
    if lam == 0.0 or text_tokens is None:
        t_loss = torch.zeros((), dtype=a_loss.dtype)
        total_t = a_loss
    else:
        # logits[:, i] predicts tokens[:, i+1]; the last position is unused
        logits = out["token_logits"][:, :-1]
        t_loss = text_ce(logits, text_tokens[:, 1:], batch["pad_id"])
        total_t = a_loss + lam * t_loss
    a_f = float(a_loss.detach())
    t_f = float(t_loss.detach())
    components = {"action_loss": a_f, "text_loss": t_f,
                  "total": a_f if lam == 0.0 else a_f + lam * t_f,
                  "lambda": lam}
    return total_t, components
