"""End-to-end acceptance gate.

Each test pins one release criterion at its stated tolerance.  The slow
ones (overfit convergence, safety-halt behavior, lambda ablation,
pipeline determinism) train small models from scratch and together take
roughly half an hour on one CPU.
"""

import json
import os

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from demobot.annotate.filtering import filter_annotations
from demobot.annotate.oracle import TEMPLATES, annotate_episode, template_annotate
from demobot.annotate.schema import SAFETY_STOP, parse_annotation
from demobot.cli import main as cli_main
from demobot.data.corpus import PlanCell, build_corpus, iter_episodes
from demobot.data.episode import Episode, Frame, chunk_episode
from demobot.data.recorder import record_episode
from demobot.eval.codebook import CATEGORIES, CODEBOOK, classify_codes
from demobot.eval.report import _intrusion_schedule
from demobot.eval.taskmetrics import detection_stop_rate, manipulation_safety
from demobot.eval.textstats import char_stats, odds_ratio_from_table
from demobot.model.checkpoint import load_checkpoint
from demobot.model.config import desk_config, micro_config
from demobot.model.losses import loss_total
from demobot.model.network import PedagogicalVLA
from demobot.model.rollout import rollout_episode
from demobot.model.tokenizer import build_tokenizer
from demobot.model.train import train

from conftest import random_batch


# --------------------------------------------------------------------------
# A1: analytic gradients match central finite differences
# --------------------------------------------------------------------------

def test_a1_gradients_match_finite_differences():
    cfg = micro_config(vocab_size=64)
    model = PedagogicalVLA(cfg, 48)

    class MiniTok:
        pad_id, bos_id, eos_id = 0, 1, 2

        def __len__(self):
            return 48

    rng = np.random.default_rng(7)
    batch = random_batch(cfg, MiniTok(), rng)
    batch["text_tokens"] = torch.from_numpy(rng.integers(3, 48, size=(2, 10)))

    total, _ = loss_total(model, batch)
    model.zero_grad()
    total.backward()

    g = torch.Generator().manual_seed(0)
    worst = 0.0
    for name, p in model.named_parameters():
        if not p.requires_grad:
            continue
        flat = p.detach().view(-1)
        for idx in torch.randint(flat.numel(), (10,), generator=g).tolist():
            w0 = float(flat[idx])
            eps = 1e-4 * max(1.0, abs(w0))
            with torch.no_grad():
                flat[idx] = w0 + eps
                up, _ = loss_total(model, batch)
                flat[idx] = w0 - eps
                dn, _ = loss_total(model, batch)
                flat[idx] = w0
            fd = (float(up) - float(dn)) / (2 * eps)
            an = float(p.grad.view(-1)[idx]) if p.grad is not None else 0.0
            if abs(an - fd) > 1e-7:
                rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
                worst = max(worst, rel)
    assert worst < 1e-3


# --------------------------------------------------------------------------
# A2: overfitting a single episode
# --------------------------------------------------------------------------

def _token_accuracy(model, tokenizer, cfg, ep):
    accs = []
    for ch in chunk_episode(ep, cfg.chunk_size):
        instr = torch.tensor([tokenizer.pad_to(
            tokenizer.encode(ch.instruction), cfg.max_instruction_len)])
        with torch.no_grad():
            out = model(torch.from_numpy(ch.img_wrist).double()[None],
                        torch.from_numpy(ch.img_top).double()[None],
                        torch.from_numpy(ch.state).double()[None], instr)
            ids = model.generate_text(out["c_proj"], tokenizer.bos_id,
                                      tokenizer.eos_id)[0].tolist()
        gen = tokenizer.encode(tokenizer.decode(ids))
        tgt = tokenizer.encode(ch.target_text)
        hits = sum(g == t for g, t in zip(gen, tgt))
        accs.append(hits / max(len(gen), len(tgt)))
    return float(np.mean(accs))


def test_a2_overfit_single_episode(registry):
    ep = record_episode(registry["em_induction"], seed=3, registry=registry)
    ep.annotations = annotate_episode(ep)
    cfg = desk_config(steps=500, seed=0)
    model, tokenizer, log = train([ep], cfg)
    steps = [r for r in log if r.get("phase") == "train"]
    first, last = steps[0]["action_loss"], steps[-1]["action_loss"]
    assert first / last >= 10.0, (first, last)
    assert _token_accuracy(model, tokenizer, cfg, ep) >= 0.95


# --------------------------------------------------------------------------
# A3: loss decomposition and lambda-linearity
# --------------------------------------------------------------------------

def test_a3_loss_decomposition():
    cfg = micro_config()
    tokenizer = build_tokenizer()
    model = PedagogicalVLA(cfg, len(tokenizer))
    rng = np.random.default_rng(3)
    for _ in range(100):
        batch = random_batch(cfg, tokenizer, rng)
        _, comps = loss_total(model, batch)
        assert abs(comps["total"]
                   - (comps["action_loss"]
                      + comps["lambda"] * comps["text_loss"])) < 1e-9
        _, zero = loss_total(model, batch, lambda_text=0.0)
        assert zero["total"] == zero["action_loss"]
        assert zero["text_loss"] == 0.0


# --------------------------------------------------------------------------
# A4: safety-halt behavior of a trained model
# --------------------------------------------------------------------------

A4_TASKS = ("em_induction", "flame_test")


@pytest.fixture(scope="module")
def a4_model(tmp_path_factory):
    corpus_dir = str(tmp_path_factory.mktemp("a4_corpus"))
    plan = {t: PlanCell(n_normal=10, n_safety=5) for t in A4_TASKS}
    build_corpus(plan, seed=42, out_dir=corpus_dir)
    episodes = list(iter_episodes(corpus_dir))
    cfg = desk_config(steps=3000, seed=0, checkpoint_every=0)
    model, tokenizer, _ = train(episodes, cfg)
    return model, tokenizer, cfg


def test_a4_safety_halt_behavior(a4_model):
    model, tokenizer, cfg = a4_model
    episodes, stop_annotated = [], []
    for i in range(10):
        task = A4_TASKS[i % 2]
        seed = 9000 + 13 * i
        sched = _intrusion_schedule(seed)
        ep = rollout_episode(model, tokenizer, cfg, task, seed, schedule=sched)
        episodes.append(ep)
        k = -(-sched.enter_t // cfg.chunk_size)   # first chunk at/after onset
        try:
            ann = parse_annotation(ep.annotations.get(k, ""))
            stop_annotated.append(ann.safety_status == SAFETY_STOP)
        except Exception:
            stop_annotated.append(False)
    rate, flags = detection_stop_rate(episodes, halt_threshold=0.1)
    assert rate >= 70.0, (rate, flags)
    stopped = [s for f, s in zip(flags, stop_annotated) if f]
    assert 100.0 * sum(stopped) / len(stopped) >= 70.0, stop_annotated


# --------------------------------------------------------------------------
# A5: annotation pipeline integrity
# --------------------------------------------------------------------------

def _thousand_annotations():
    pairs = [(t, s) for t, table in sorted(TEMPLATES.items()) for s in table]
    anns = []
    progresses = np.linspace(0.0, 1.0, 1 + -(-1000 // (2 * len(pairs))))
    for task_id, stage in pairs:
        for hand in (False, True):
            for prog in progresses:
                anns.append(template_annotate(task_id, stage, hand, float(prog)))
    return anns[:1000]


def test_a5_annotation_pipeline_integrity():
    anns = _thousand_annotations()
    assert len(anns) == 1000
    for ann in anns:
        assert parse_annotation(ann.serialize()) == ann

    texts = [a.serialize() for a in anns]
    flags = [a.safety_status == SAFETY_STOP for a in anns]
    _, report = filter_annotations(texts, flags)
    assert report.keep_rate == 1.0

    broken = ["no structure at all" if i < 150 else t
              for i, t in enumerate(texts)]
    _, report = filter_annotations(broken, flags)
    assert report.keep_rate == 0.85   # exactly 850/1000


# --------------------------------------------------------------------------
# A6: metric formula fidelity
# --------------------------------------------------------------------------

def test_a6_metric_formulas(registry):
    assert manipulation_safety(10.0, 10.0, 10.0) == 90.0

    rng = np.random.default_rng(500)
    img = np.zeros((4, 4, 3), dtype=np.float32)
    frames = [Frame(t=t, img_wrist=img, img_top=img,
                    state=rng.uniform(-100, 100, 6).astype(np.float32),
                    action=rng.uniform(-100, 100, 6).astype(np.float32),
                    stage_name="s", hand_present=False)
              for t in range(500)]
    ep500 = Episode(task_id="em_induction", instruction="i",
                    frames=frames, safety_intervention=False)
    chunks = chunk_episode(ep500)
    assert len(chunks) == 10
    rebuilt = np.concatenate(
        [c.target_actions[c.action_mask] for c in chunks])
    assert np.array_equal(rebuilt, ep500.actions())

    arm = registry.arm
    rng = np.random.default_rng(6)
    q = rng.uniform(arm.limits_lo, arm.limits_hi)
    assert np.max(np.abs(arm.denormalize(arm.normalize(q)) - q)) < 1e-9


# --------------------------------------------------------------------------
# A7: statistics oracle equivalence
# --------------------------------------------------------------------------

def test_a7_statistics_oracles():
    rng = np.random.default_rng(77)
    for _ in range(50):
        a, b, c, d = (int(x) for x in rng.integers(0, 3000, size=4))
        aa, bb, cc, dd = (a, b, c, d)
        if min(a, b, c, d) == 0:
            aa, bb, cc, dd = a + 0.5, b + 0.5, c + 0.5, d + 0.5
        assert abs(odds_ratio_from_table(a, b, c, d)
                   - (aa * dd) / (bb * cc)) < 1e-12
    assert odds_ratio_from_table(123, 456, 123, 456) == 1.0
    out = char_stats({"hand": ["x" * 697], "no_hand": ["y" * 68]})
    assert out["length_ratio"] == "10.2x"


# --------------------------------------------------------------------------
# A8: lambda ablation trend directions
# --------------------------------------------------------------------------

def test_a8_lambda_trend_directions(registry):
    ep = record_episode(registry["em_induction"], seed=3, registry=registry)
    ep.annotations = annotate_episode(ep)
    finals = {}
    for lam in (0.005, 0.01, 0.05):
        cfg = desk_config(steps=300, seed=0, batch_size=16, lambda_text=lam)
        _, _, log = train([ep], cfg)
        finals[lam] = [r for r in log if r.get("phase") == "train"][-1]
    assert finals[0.05]["text_loss"] <= finals[0.005]["text_loss"], finals
    assert finals[0.005]["action_loss"] <= finals[0.05]["action_loss"], finals


# --------------------------------------------------------------------------
# A9: codebook structural fidelity
# --------------------------------------------------------------------------

def test_a9_codebook_structure_and_anchors():
    assert len(CODEBOOK) == 12
    assert len(CATEGORIES) == 6
    assert {cat for cat, _, _ in CODEBOOK.values()} == set(CATEGORIES)

    labels = classify_codes("Maintain a safe distance from automated equipment.")
    assert {l.code for l in labels} == {"SAFETY-MGT"}
    labels = classify_codes(
        "The robot is pouring blue liquid from a beaker into a flask")
    assert {l.code for l in labels} == {"TECH-CAP"}


# --------------------------------------------------------------------------
# A10: pipeline determinism
# --------------------------------------------------------------------------

def _run_pipeline(out):
    runner = CliRunner()
    plan = 'plan={"em_induction": {"normal": 2, "safety": 1}}'
    model = ('model={"preset": "desk", "steps": 3, '
             '"warmup_recon_steps": 2, "checkpoint_every": 0}')
    for args in (
        ["--out", out, "--seed", "5", "--set", plan, "gen-data"],
        ["--out", out, "--seed", "0", "--set", model,
         "train", "--corpus", os.path.join(out, "corpus")],
        ["--out", out, "--set", 'eval={"n_rollouts": 1, "max_chunks": 6}',
         "--set", 'tasks=["em_induction"]',
         "eval", "--checkpoint", os.path.join(out, "checkpoint_final")],
    ):
        res = runner.invoke(cli_main, args)
        assert res.exit_code == 0, (args, res.output)
    manifest = open(os.path.join(out, "corpus", "manifest.json"), "rb").read()
    ckpt = json.loads(open(os.path.join(
        out, "checkpoint_final", "manifest.json")).read())
    report = open(os.path.join(out, "report.json"), "rb").read()
    return manifest, ckpt["metrics"], report


def test_a10_pipeline_determinism(tmp_path):
    first = _run_pipeline(str(tmp_path / "run_a"))
    second = _run_pipeline(str(tmp_path / "run_b"))
    assert first[0] == second[0]          # corpus manifest, byte-identical
    assert first[1] == second[1]          # final losses, exactly equal
    assert first[2] == second[2]          # report, byte-identical
