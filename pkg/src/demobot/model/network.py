"""The policy network: patch vision encoder, frozen fusion backbone,
action expert with learned chunk queries, and a text-healing decoder.

Everything runs in float64 on CPU so the loss-decomposition and
gradient-check tolerances hold exactly.  The backbone (which owns the
state/instruction/vision-adapter embeddings) is frozen from initialization;
the vision encoder is trainable only during its reconstruction warm-up and
frozen for joint training.
"""

import math

import torch
from torch import nn

DTYPE = torch.float64


def _init_linear(layer, gen, std=0.02):
    with torch.no_grad():
        layer.weight.normal_(0.0, std, generator=gen)
        if layer.bias is not None:
            layer.bias.zero_()


class Block(nn.Module):
    """Pre-norm transformer block; optional cross-attention context."""

    def __init__(self, d, n_heads, cross=False):
        super().__init__()
        self.ln1 = nn.LayerNorm(d, dtype=DTYPE)
        self.attn = nn.MultiheadAttention(d, n_heads, batch_first=True, dtype=DTYPE)
        self.cross = cross
        if cross:
            self.ln_q = nn.LayerNorm(d, dtype=DTYPE)
            self.ln_kv = nn.LayerNorm(d, dtype=DTYPE)
            self.xattn = nn.MultiheadAttention(d, n_heads, batch_first=True, dtype=DTYPE)
        self.ln2 = nn.LayerNorm(d, dtype=DTYPE)
        self.mlp = nn.Sequential(
            nn.Linear(d, 4 * d, dtype=DTYPE), nn.GELU(),
            nn.Linear(4 * d, d, dtype=DTYPE))

    def forward(self, x, context=None, attn_mask=None, cross_bias=None):
        h = self.ln1(x)
        x = x + self.attn(h, h, h, attn_mask=attn_mask, need_weights=False)[0]
        if self.cross:
            q = self.ln_q(x)
            kv = self.ln_kv(context)
            x = x + self.xattn(q, kv, kv, attn_mask=cross_bias,
                               need_weights=False)[0]
        return x + self.mlp(self.ln2(x))


class VisionEncoder(nn.Module):
    """Patch transformer over both camera images with camera-id embeddings.

    `reconstruct` maps tokens back to patch pixels for the warm-up loss.
    """

    def __init__(self, cfg, gen):
        super().__init__()
        self.cfg = cfg
        p = cfg.patch
        self.patch_dim = p * p * 3
        self.n_tokens = cfg.tokens_per_image
        self.embed = nn.Linear(self.patch_dim, cfg.d_vision, dtype=DTYPE)
        self.pos = nn.Parameter(torch.zeros(self.n_tokens, cfg.d_vision, dtype=DTYPE))
        self.camera = nn.Parameter(torch.zeros(2, cfg.d_vision, dtype=DTYPE))
        self.blocks = nn.ModuleList(
            Block(cfg.d_vision, cfg.n_heads) for _ in range(cfg.n_vision_layers))
        self.ln = nn.LayerNorm(cfg.d_vision, dtype=DTYPE)
        self.recon_head = nn.Linear(cfg.d_vision, self.patch_dim, dtype=DTYPE)
        with torch.no_grad():
            self.pos.normal_(0.0, 0.02, generator=gen)
            self.camera.normal_(0.0, 0.02, generator=gen)
        _init_linear(self.embed, gen)
        _init_linear(self.recon_head, gen)

    def patchify(self, img):
        # (B, H, W, 3) -> (B, n_tokens, patch_dim)
        b = img.shape[0]
        p = self.cfg.patch
        h, w = self.cfg.image_hw
        if img.shape[1:] != (h, w, 3):
            raise ValueError(f"expected images of shape {(h, w, 3)}, got {tuple(img.shape[1:])}")
        x = img.reshape(b, h // p, p, w // p, p, 3)
        return x.permute(0, 1, 3, 2, 4, 5).reshape(b, self.n_tokens, self.patch_dim)

    def forward(self, img_wrist, img_top):
        pw = self.embed(self.patchify(img_wrist)) + self.pos + self.camera[0]
        pt = self.embed(self.patchify(img_top)) + self.pos + self.camera[1]
        x = torch.cat([pw, pt], dim=1)
        for blk in self.blocks:
            x = blk(x)
        return self.ln(x)

    def reconstruct(self, z_v):
        return self.recon_head(z_v)

    def recon_loss(self, img_wrist, img_top):
        z = self.forward(img_wrist, img_top)
        target = torch.cat([self.patchify(img_wrist), self.patchify(img_top)], dim=1)
        return ((self.reconstruct(z) - target) ** 2).mean()


class Backbone(nn.Module):
    """Frozen fusion trunk over [vision-adapter ⊕ state ⊕ instruction]."""

    def __init__(self, cfg, gen, vocab_size):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_hidden
        self.vision_adapter = nn.Linear(cfg.d_vision, d, dtype=DTYPE)
        self.state_embed = nn.Linear(cfg.action_dim, d, dtype=DTYPE)
        self.instr_embed = nn.Embedding(vocab_size, d, dtype=DTYPE)
        self.instr_pos = nn.Parameter(
            torch.zeros(cfg.max_instruction_len, d, dtype=DTYPE))
        self.blocks = nn.ModuleList(
            Block(d, cfg.n_heads) for _ in range(cfg.n_backbone_layers))
        self.ln = nn.LayerNorm(d, dtype=DTYPE)
        with torch.no_grad():
            self.instr_embed.weight.normal_(0.0, 0.02, generator=gen)
            self.instr_pos.normal_(0.0, 0.02, generator=gen)
        _init_linear(self.vision_adapter, gen)
        _init_linear(self.state_embed, gen)

    def forward(self, z_v, state, instr_tokens):
        if instr_tokens.shape[1] > self.cfg.max_instruction_len:
            raise ValueError(
                f"instruction of {instr_tokens.shape[1]} tokens exceeds cap "
                f"{self.cfg.max_instruction_len}")
        if torch.any(torch.abs(state) > 100.0 + 1e-9):
            raise ValueError("state outside [-100, 100]")
        vis = self.vision_adapter(z_v)
        st = self.state_embed(state / 100.0).unsqueeze(1)
        ins = self.instr_embed(instr_tokens) + self.instr_pos[: instr_tokens.shape[1]]
        x = torch.cat([vis, st, ins], dim=1)
        for blk in self.blocks:
            x = blk(x)
        return self.ln(x)


class ActionExpert(nn.Module):
    """C learned queries cross-attend to the fused sequence; a tanh-scaled
    head maps each query to one D-dimensional action."""

    def __init__(self, cfg, gen):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_expert
        self.queries = nn.Parameter(torch.zeros(cfg.chunk_size, d, dtype=DTYPE))
        self.context_proj = nn.Linear(cfg.d_hidden, d, dtype=DTYPE)
        self.blocks = nn.ModuleList(
            Block(d, cfg.n_heads, cross=True) for _ in range(cfg.n_expert_layers))
        self.ln = nn.LayerNorm(d, dtype=DTYPE)
        self.head = nn.Linear(d, cfg.action_dim, dtype=DTYPE)
        # pooled-vision summary token: patch embeddings are shared across
        # positions, so mean- and max-pooling over patches give
        # position-invariant cues (max pooling keeps a salient local cue,
        # e.g. an intruding hand, from being diluted by the other patches)
        self.vision_summary = nn.Linear(2 * cfg.d_vision, d, dtype=DTYPE)
        # per-chunk halt gate: blends the free prediction with the observed
        # state, so a zero-velocity hold (target == state) is exactly
        # representable; one scalar per chunk keeps the blend from adding
        # row-to-row jitter.  The gate reads only the pooled vision summary:
        # the vision encoder is frozen after warm-up, so the gate reduces to
        # a logistic regression on stable features and its learned behavior
        # does not drift with the rest of the network.
        self.gate_head = nn.Linear(d, 1, dtype=DTYPE)
        # learned additive attention-logit bias over source positions lets the
        # queries lock onto informative tokens (e.g. the state token) quickly
        n_src = 2 * cfg.tokens_per_image + 1 + cfg.max_instruction_len + 1
        self.cross_bias = nn.Parameter(
            torch.zeros(cfg.chunk_size, n_src, dtype=DTYPE))
        with torch.no_grad():
            self.queries.normal_(0.0, 0.02, generator=gen)
        _init_linear(self.context_proj, gen)
        _init_linear(self.vision_summary, gen)
        # small head init keeps the tanh in its linear region at the start
        _init_linear(self.head, gen, std=0.01)
        _init_linear(self.gate_head, gen, std=0.01)
        with torch.no_grad():
            # bias the gate closed so "hold position" is the default and
            # training only opens it where motion is needed; inputs whose
            # targets equal the state (zero-velocity holds) then never see
            # pressure to open, which keeps the halt robust off-distribution
            self.gate_head.bias.fill_(-2.0)

    def forward(self, h_t, v_pool, state):
        b = h_t.shape[0]
        summary = self.vision_summary(v_pool)
        ctx = torch.cat([self.context_proj(h_t), summary.unsqueeze(1)], dim=1)
        x = self.queries.unsqueeze(0).expand(b, -1, -1)
        bias = self.cross_bias[:, : ctx.shape[1]]
        for blk in self.blocks:
            x = blk(x, context=ctx, cross_bias=bias)
        h_expert = self.ln(x)
        a_free = 100.0 * torch.tanh(self.head(h_expert))
        g = torch.sigmoid(self.gate_head(summary)).unsqueeze(1)
        a_t = g * a_free + (1.0 - g) * state.unsqueeze(1)
        return a_t, h_expert


class TextDecoder(nn.Module):
    """Causal decoder over [virtual context token ⊕ text prefix]."""

    def __init__(self, cfg, gen, vocab_size):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_decoder
        self.token_embed = nn.Embedding(vocab_size, d, dtype=DTYPE)
        self.pos = nn.Parameter(torch.zeros(cfg.max_text_len + 1, d, dtype=DTYPE))
        self.blocks = nn.ModuleList(
            Block(d, cfg.n_heads) for _ in range(cfg.decoder_layers))
        self.ln = nn.LayerNorm(d, dtype=DTYPE)
        self.lm_head = nn.Linear(d, vocab_size, bias=False, dtype=DTYPE)
        with torch.no_grad():
            self.token_embed.weight.normal_(0.0, 0.02, generator=gen)
            self.pos.normal_(0.0, 0.02, generator=gen)
        _init_linear(self.lm_head, gen)

    def forward(self, c_proj, prefix_tokens):
        """Logits (B, T, V); position i depends only on c_proj and prefix[:i]."""
        if prefix_tokens.shape[1] > self.cfg.max_text_len:
            raise ValueError(
                f"prefix of {prefix_tokens.shape[1]} tokens exceeds max_text_len "
                f"{self.cfg.max_text_len}")
        emb = self.token_embed(prefix_tokens)
        x = torch.cat([c_proj.unsqueeze(1), emb], dim=1) + self.pos[: emb.shape[1] + 1]
        # broadcast the context to every position as well; conditioning stays
        # causal and strictly a function of c_proj
        x = x + c_proj.unsqueeze(1)
        t = x.shape[1]
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        for blk in self.blocks:
            x = blk(x, attn_mask=mask)
        # hidden at sequence position i+1 (the embedding of prefix[i]) gives
        # logits[i]: the distribution of the token following prefix[:i+1]
        return self.lm_head(self.ln(x))[:, 1:, :]


class PedagogicalVLA(nn.Module):
    def __init__(self, cfg, vocab_size, seed=None):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        init_seed = cfg.seed if seed is None else seed
        # default module initializers draw from the global RNG, so pin it too
        torch.manual_seed(init_seed)
        gen = torch.Generator().manual_seed(init_seed)
        self.vision = VisionEncoder(cfg, gen)
        self.backbone = Backbone(cfg, gen, vocab_size)
        self.expert = ActionExpert(cfg, gen)
        self.proj = nn.Linear(cfg.d_expert, cfg.d_hidden, bias=False, dtype=DTYPE)
        _init_linear(self.proj, gen, std=1.0 / math.sqrt(cfg.d_expert))
        # direct linear path from the pooled vision summary into the decoder
        # conditioning: salient visual events (an intruding hand) are one
        # linear map away from the language head instead of having to
        # survive the cross-attention stack, so the decoder binds status
        # words to the visual cue rather than memorizing training scenes
        self.summary_proj = nn.Linear(2 * cfg.d_vision, cfg.d_hidden,
                                      bias=False, dtype=DTYPE)
        _init_linear(self.summary_proj, gen, std=1.0 / math.sqrt(2 * cfg.d_vision))
        self.decoder = TextDecoder(cfg, gen, vocab_size)
        self.set_frozen(vision=False, backbone=True)   # vision thaws for warm-up

    def set_frozen(self, vision: bool, backbone: bool = True):
        for p in self.vision.parameters():
            p.requires_grad_(not vision)
        for p in self.backbone.parameters():
            p.requires_grad_(not backbone)

    def frozen_names(self):
        return [n for n, p in self.named_parameters() if not p.requires_grad]

    def mean_pool(self, h_expert):
        return h_expert.mean(dim=1)

    def forward(self, img_wrist, img_top, state, instr_tokens, text_tokens=None):
        """Full forward pass; returns a dict mirroring Eqs. 1-7."""
        z_v = self.vision(img_wrist, img_top)
        h_t = self.backbone(z_v, state, instr_tokens)
        v_pool = torch.cat([z_v.mean(dim=1), z_v.amax(dim=1)], dim=-1)
        a_t, h_expert = self.expert(h_t, v_pool, state)
        c_t = self.mean_pool(h_expert)
        c_proj = self.proj(c_t) + self.summary_proj(v_pool)
        out = {"z_v": z_v, "h_t": h_t, "a_t": a_t, "h_expert": h_expert,
               "c_t": c_t, "c_proj": c_proj, "token_logits": None}
        if text_tokens is not None:
            out["token_logits"] = self.decoder(c_proj, text_tokens)
        return out

    @torch.no_grad()
    def generate_text(self, c_proj, bos_id, eos_id, mode="greedy", seed=0):
        """Autoregressive decode until EOS or max_text_len tokens."""
        b = c_proj.shape[0]
        tokens = torch.full((b, 1), bos_id, dtype=torch.long)
        done = torch.zeros(b, dtype=torch.bool)
        gen = torch.Generator().manual_seed(seed)
        while tokens.shape[1] < self.cfg.max_text_len and not bool(done.all()):
            logits = self.decoder(c_proj, tokens)[:, -1, :]
            if mode == "greedy":
                # argmin over negated logits breaks ties at the lowest id
                nxt = logits.argmax(dim=-1)
            elif mode == "sampled":
                probs = torch.softmax(logits, dim=-1)
                nxt = torch.multinomial(probs, 1, generator=gen).squeeze(1)
            else:
                raise ValueError(f"unknown decode mode {mode!r}")
            nxt = torch.where(done, torch.full_like(nxt, eos_id), nxt)
            tokens = torch.cat([tokens, nxt.unsqueeze(1)], dim=1)
            done |= nxt == eos_id
        return tokens
