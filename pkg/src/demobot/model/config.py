"""Model/training configuration with desk, paper, and micro presets."""

from dataclasses import dataclass, field, fields, replace

ALLOWED_DECODER_LAYERS = (4, 8, 12)


@dataclass(frozen=True)
class ModelConfig:
    image_hw: tuple = (64, 64)
    patch: int = 16
    d_vision: int = 64
    d_hidden: int = 128
    d_expert: int = 128
    d_decoder: int = 128
    n_vision_layers: int = 2
    n_backbone_layers: int = 2
    n_expert_layers: int = 2
    decoder_layers: int = 12
    n_heads: int = 4
    chunk_size: int = 50          # C
    action_dim: int = 6           # D
    max_text_len: int = 128
    max_instruction_len: int = 32
    lambda_text: float = 0.1
    vocab_size: int = 2048        # upper bound; actual table may be smaller
    seed: int = 0
    # training
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-3
    lr_min: float = 2.5e-6
    warmup_recon_steps: int = 200
    adam_betas: tuple = (0.9, 0.95)
    checkpoint_every: int = 500

    def __post_init__(self):
        for f in ("d_vision", "d_hidden", "d_expert", "d_decoder",
                  "n_vision_layers", "n_backbone_layers", "n_expert_layers",
                  "n_heads", "chunk_size", "action_dim", "max_text_len"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")
        if not 0.0 <= self.lambda_text <= 1.0:
            raise ValueError("lambda_text must lie in [0, 1]")
        if self.lambda_text != 0.0 and not 0.005 <= self.lambda_text <= 1.0:
            raise ValueError("nonzero lambda_text must lie in [0.005, 1.0]")
        if self.decoder_layers < 1:
            raise ValueError("decoder_layers must be >= 1")
        if self.d_decoder != self.d_hidden:
            # the pooled expert context is injected as a decoder token, so
            # the decoder width must equal the projection target width
            raise ValueError("d_decoder must equal d_hidden")
        h, w = self.image_hw
        if h % self.patch or w % self.patch:
            raise ValueError("image size must be divisible by patch size")

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)

    @property
    def tokens_per_image(self):
        h, w = self.image_hw
        return (h // self.patch) * (w // self.patch)


def desk_config(**overrides) -> ModelConfig:
    return ModelConfig().with_overrides(**overrides)


def paper_config(**overrides) -> ModelConfig:
    """Full-scale preset (kept for anyone with the compute)."""
    base = ModelConfig(
        image_hw=(512, 512), patch=32, d_vision=256, d_hidden=768,
        d_expert=768, d_decoder=768, n_vision_layers=6, n_backbone_layers=8,
        n_expert_layers=4, decoder_layers=12, n_heads=8,
        steps=100_000, batch_size=32, lr=1e-4, lr_min=2.5e-6)
    return base.with_overrides(**overrides)


def micro_config(**overrides) -> ModelConfig:
    """Tiny widths for finite-difference gradient checks."""
    base = ModelConfig(
        image_hw=(16, 16), patch=8, d_vision=8, d_hidden=16, d_expert=16,
        d_decoder=16, n_vision_layers=1, n_backbone_layers=1,
        n_expert_layers=1, decoder_layers=2, n_heads=2,
        chunk_size=4, max_text_len=16, max_instruction_len=8,
        steps=10, batch_size=2, warmup_recon_steps=2)
    return base.with_overrides(**overrides)


def config_from_dict(d: dict) -> ModelConfig:
    preset = d.pop("preset", "desk")
    maker = {"desk": desk_config, "paper": paper_config, "micro": micro_config}[preset]
    known = {f.name for f in fields(ModelConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    for key in ("image_hw", "adam_betas"):
        if key in d:
            d[key] = tuple(d[key])
    return maker(**d)
