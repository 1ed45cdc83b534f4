import numpy as np
import pytest
import torch

from demobot.model.config import ModelConfig, config_from_dict, micro_config
from demobot.model.network import PedagogicalVLA
from demobot.model.tokenizer import Tokenizer, build_tokenizer, split_words

from conftest import random_batch


@pytest.fixture(scope="module")
def micro_model(tokenizer):
    cfg = micro_config()
    return cfg, PedagogicalVLA(cfg, len(tokenizer))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_hidden=0)
    with pytest.raises(ValueError):
        ModelConfig(lambda_text=0.001)
    with pytest.raises(ValueError):
        ModelConfig(d_decoder=64, d_hidden=128)
    with pytest.raises(ValueError):
        config_from_dict({"bogus_field": 1})
    assert config_from_dict({"preset": "micro", "steps": 3}).steps == 3


def test_forward_shapes(micro_model, tokenizer):
    cfg, model = micro_model
    rng = np.random.default_rng(0)
    b = random_batch(cfg, tokenizer, rng, batch=2)
    out = model(b["img_wrist"], b["img_top"], b["state"], b["instr_tokens"],
                b["text_tokens"])
    assert out["a_t"].shape == (2, cfg.chunk_size, cfg.action_dim)
    assert torch.all(out["a_t"].abs() <= 100.0)
    assert out["c_proj"].shape == (2, cfg.d_hidden)
    assert out["token_logits"].shape == (2, 12, len(tokenizer))


def test_decoder_is_causal(micro_model, tokenizer):
    cfg, model = micro_model
    rng = np.random.default_rng(1)
    b = random_batch(cfg, tokenizer, rng, batch=1)
    out1 = model(b["img_wrist"], b["img_top"], b["state"], b["instr_tokens"],
                 b["text_tokens"])
    mutated = b["text_tokens"].clone()
    mutated[0, -1] = (mutated[0, -1] + 1) % len(tokenizer)
    out2 = model(b["img_wrist"], b["img_top"], b["state"], b["instr_tokens"],
                 mutated)
    # logits[:, i] conditions on prefix[:i+1]; changing the last token may
    # only affect the final position
    assert torch.allclose(out1["token_logits"][:, :-1],
                          out2["token_logits"][:, :-1])
    assert not torch.allclose(out1["token_logits"][:, -1],
                              out2["token_logits"][:, -1])


def test_state_range_enforced(micro_model, tokenizer):
    cfg, model = micro_model
    rng = np.random.default_rng(2)
    b = random_batch(cfg, tokenizer, rng, batch=1)
    bad = b["state"].clone()
    bad[0, 0] = 150.0
    with pytest.raises(ValueError):
        model(b["img_wrist"], b["img_top"], bad, b["instr_tokens"])


def test_init_deterministic(tokenizer):
    cfg = micro_config()
    m1 = PedagogicalVLA(cfg, len(tokenizer))
    m2 = PedagogicalVLA(cfg, len(tokenizer))
    for (n1, p1), (_, p2) in zip(m1.named_parameters(), m2.named_parameters()):
        assert torch.equal(p1, p2), n1


def test_frozen_components(micro_model):
    _, model = micro_model
    for name, p in model.named_parameters():
        if name.startswith("backbone."):
            assert not p.requires_grad, name
        if name.startswith(("expert.", "decoder.", "proj")):
            assert p.requires_grad, name


def test_generate_text_stops_and_is_deterministic(micro_model, tokenizer):
    cfg, model = micro_model
    c = torch.zeros(2, cfg.d_hidden, dtype=torch.float64)
    ids1 = model.generate_text(c, tokenizer.bos_id, tokenizer.eos_id)
    ids2 = model.generate_text(c, tokenizer.bos_id, tokenizer.eos_id)
    assert ids1.shape[1] <= cfg.max_text_len
    assert torch.equal(ids1, ids2)


def test_tokenizer_round_trip(tokenizer):
    from demobot.model.tokenizer import corpus_texts
    for text in corpus_texts():
        assert tokenizer.decode(tokenizer.encode(text)) == text
        assert len(tokenizer.encode(text)) <= 128


def test_tokenizer_byte_fallback(tokenizer):
    assert tokenizer.decode(tokenizer.encode("schön q7xz zz9")) == \
        "schön q7xz zz9"


def test_tokenizer_vocab_bound(tokenizer):
    assert len(tokenizer) <= 2048
    with pytest.raises(ValueError):
        Tokenizer([f"w{i}" for i in range(3000)])


def test_split_words_punctuation():
    assert split_words("Stop - Human detected.") == \
        ["Stop", "-", "Human", "detected", "."]
