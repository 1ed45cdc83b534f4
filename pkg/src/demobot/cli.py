"""Command-line entry point: gen-data, train, rollout, eval, analyze, ablate.

One YAML config file drives every command; any key can be overridden on
the command line with dotted paths (--set model.steps=500).  Exit codes:
0 success, 2 invalid config/usage, 3 I/O failure, 4 training abort,
5 incompatible checkpoint.
"""

import json
import os
import sys
import time

import click
import numpy as np
import yaml

from .annotate.client import get_annotator
from .data.corpus import PlanCell, build_corpus, iter_episodes, load_manifest
from .data.corpus import plan_from_table
from .errors import StorageError, TrainingAborted
from .eval.codebook import classify_codes
from .eval.judge import get_judge
from .eval.report import evaluate_rollouts, write_report
from .eval.taskmetrics import score_task_execution
from .eval.textstats import char_stats, keyword_freq, safety_odds_ratio
from .model.checkpoint import load_checkpoint, restore_optimizer, save_checkpoint
from .model.config import config_from_dict
from .model.losses import loss_total
from .model.rollout import rollout_episode
from .model.tokenizer import build_tokenizer
from .model.train import SampleBank, train
from .sim.tasks import default_registry

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_TRAIN_ABORT = 4
EXIT_CHECKPOINT = 5

DEFAULT_ABLATION = {"decoder_layers": [4, 8, 12],
                    "lambda_text": [0.005, 0.01, 0.05]}


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _apply_override(cfg, dotted, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot override through non-mapping key {k!r}")
    node[keys[-1]] = _parse_value(value)


def load_run_config(path, sets=()):
    cfg = {}
    if path:
        try:
            with open(path) as fh:
                cfg = yaml.safe_load(fh) or {}
        except FileNotFoundError as exc:
            raise ValueError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ValueError(f"invalid YAML config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValueError("config root must be a mapping")
    for item in sets:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _apply_override(cfg, key, value)
    return cfg


def _plan_from_config(cfg, paper_scale):
    if "plan" in cfg:
        plan = {}
        for task_id, cell in cfg["plan"].items():
            plan[task_id] = PlanCell(int(cell["normal"]), int(cell["safety"]))
        return plan
    scale = 1.0 if paper_scale else float(cfg.get("scale", 0.1))
    return plan_from_table(scale=scale, tasks=cfg.get("tasks"))


def _model_config(cfg, seed=None):
    section = dict(cfg.get("model", {}))
    if seed is not None:
        section["seed"] = seed
    return config_from_dict(section)


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              help="YAML run config.")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
@click.option("--out", type=str, default=None, help="Output directory.")
@click.option("--paper-scale", is_flag=True,
              help="Use full-scale episode counts and the full-size model.")
@click.option("--judge", type=click.Choice(["rule", "remote"]), default=None)
@click.option("--annotator", type=click.Choice(["template", "remote"]),
              default=None)
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
              help="Dotted-path config override; repeatable.")
@click.pass_context
def main(ctx, config_path, seed, out, paper_scale, judge, annotator, sets):
    """Science-demonstration robot pipeline: data, training, evaluation."""
    try:
        cfg = load_run_config(config_path, sets)
    except ValueError as exc:
        _fail(EXIT_CONFIG, exc)
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if judge is not None:
        cfg.setdefault("eval", {})["judge"] = judge
    if annotator is not None:
        cfg["annotator"] = annotator
    if paper_scale:
        cfg["paper_scale"] = True
        cfg.setdefault("model", {}).setdefault("preset", "paper")
    ctx.obj = cfg


def _out_dir(cfg, default="runs"):
    return cfg.get("out", default)


def _remote_kwargs(cfg, section):
    opts = dict(cfg.get(section, {}).get("remote", {}))
    return opts


@main.command("gen-data")
@click.pass_obj
def cmd_gen_data(cfg):
    """Record the episode corpus and write its manifest."""
    try:
        plan = _plan_from_config(cfg, cfg.get("paper_scale", False))
        annotator = get_annotator(cfg.get("annotator", "template"),
                                  **_remote_kwargs(cfg, "annotate"))
        seed = int(cfg.get("seed", 0))
        out = os.path.join(_out_dir(cfg), "corpus")
        resolution = tuple(cfg.get("resolution", (64, 64)))
    except (ValueError, KeyError, TypeError) as exc:
        _fail(EXIT_CONFIG, exc)
    try:
        manifest = build_corpus(plan, seed, out, resolution=resolution,
                                annotator=annotator)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write corpus: {exc}")
    for task_id in sorted(manifest["tasks"]):
        entry = manifest["tasks"][task_id]
        click.echo(f"{task_id}: {entry['total']} episodes "
                   f"({entry['n_normal']} normal, {entry['n_safety']} safety)")
    click.echo(f"corpus written to {out}")


@main.command("train")
@click.option("--corpus", "corpus_dir", type=str, default=None)
@click.option("--resume", "resume_from", type=str, default=None,
              help="Checkpoint directory to resume from.")
@click.pass_obj
def cmd_train(cfg, corpus_dir, resume_from):
    """Train the policy on a recorded corpus."""
    corpus_dir = corpus_dir or cfg.get("corpus")
    if not corpus_dir or not os.path.isdir(corpus_dir):
        _fail(EXIT_CONFIG, f"missing corpus directory: {corpus_dir!r}")
    try:
        load_manifest(corpus_dir)
    except StorageError as exc:
        _fail(EXIT_CONFIG, exc)
    out = _out_dir(cfg)
    seed = cfg.get("seed")
    model = optimizer = None
    start_step = 0
    try:
        mcfg = _model_config(cfg, seed=seed)
        tok = build_tokenizer()
    except (ValueError, KeyError) as exc:
        _fail(EXIT_CONFIG, exc)
    if resume_from:
        try:
            model, mcfg, tok, manifest, opt_state = load_checkpoint(resume_from)
        except StorageError as exc:
            _fail(EXIT_CHECKPOINT, exc)
        optimizer = restore_optimizer(model, opt_state, lr=mcfg.lr,
                                      betas=mcfg.adam_betas)
        start_step = manifest["step"]

    episodes = list(iter_episodes(corpus_dir, tasks=cfg.get("tasks")))

    def hook(m, opt, step):
        save_checkpoint(os.path.join(out, f"checkpoint_step{step}"),
                        m, mcfg, tok, step=step, seed=mcfg.seed, optimizer=opt)

    try:
        model, tok, log = train(episodes, mcfg, tokenizer=tok, out_dir=out,
                                model=model, optimizer=optimizer,
                                start_step=start_step, checkpoint_hook=hook)
    except TrainingAborted as exc:
        _fail(EXIT_TRAIN_ABORT,
              f"training aborted: {exc} (diagnostic dump: {exc.dump_path})")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write training outputs: {exc}")
    final = log[-1] if log else {}
    metrics = {k: final.get(k) for k in ("action_loss", "text_loss", "total")}
    path = os.path.join(out, "checkpoint_final")
    save_checkpoint(path, model, mcfg, tok, step=mcfg.steps, seed=mcfg.seed,
                    metrics=metrics)
    click.echo(f"final losses: {json.dumps(metrics, sort_keys=True)}")
    click.echo(f"checkpoint written to {path}")


def _load_checkpoint_or_exit(path):
    if not path:
        _fail(EXIT_CONFIG, "no checkpoint given (use --checkpoint or config)")
    try:
        return load_checkpoint(path)
    except StorageError as exc:
        _fail(EXIT_CHECKPOINT, exc)


@main.command("rollout")
@click.option("--checkpoint", "ckpt", type=str, default=None)
@click.option("--task", "task_id", type=str, default=None)
@click.option("--episodes", "n_episodes", type=int, default=1)
@click.option("--intrusion", is_flag=True, help="Inject a hand intrusion.")
@click.pass_obj
def cmd_rollout(cfg, ckpt, task_id, n_episodes, intrusion):
    """Run the trained policy closed-loop and store the episodes."""
    from .data.storage import save_episode
    from .eval.report import _intrusion_schedule

    model, mcfg, tok, _, _ = _load_checkpoint_or_exit(ckpt or cfg.get("checkpoint"))
    reg = default_registry()
    task_ids = [task_id] if task_id else list(reg.tasks)
    for tid in task_ids:
        if tid not in reg.tasks:
            _fail(EXIT_CONFIG, f"unknown task {tid!r}")
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    max_chunks = int(cfg.get("eval", {}).get("max_chunks", 12))
    try:
        for tid in task_ids:
            for i in range(n_episodes):
                ep_seed = seed + 1000 + 97 * i
                sched = _intrusion_schedule(ep_seed) if intrusion else None
                ep = rollout_episode(model, tok, mcfg, reg[tid], ep_seed,
                                     schedule=sched, registry=reg,
                                     max_chunks=max_chunks)
                m = score_task_execution(ep, reg)
                path = os.path.join(out, "rollouts", f"{tid}_{i:03d}")
                save_episode(ep, path)
                click.echo(f"{tid}[{i}] success={m.success_rate:.0f} "
                           f"manip={m.manipulation_safety:.1f} -> {path}")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write rollouts: {exc}")


@main.command("eval")
@click.option("--checkpoint", "ckpt", type=str, default=None)
@click.pass_obj
def cmd_eval(cfg, ckpt):
    """Evaluate a checkpoint: 10 rollouts per task per condition."""
    model, mcfg, tok, _, _ = _load_checkpoint_or_exit(ckpt or cfg.get("checkpoint"))
    ev = cfg.get("eval", {})
    try:
        judge = get_judge(ev.get("judge", "rule"), **_remote_kwargs(cfg, "eval"))
    except (ValueError, TypeError) as exc:
        _fail(EXIT_CONFIG, exc)
    report = evaluate_rollouts(
        model, tok, mcfg,
        task_ids=cfg.get("tasks"),
        n_rollouts=int(ev.get("n_rollouts", 10)),
        seed0=int(cfg.get("seed", 0)) + 1000,
        judge=judge,
        max_chunks=int(ev.get("max_chunks", 12)),
        halt_threshold=float(ev.get("halt_threshold", 0.1)))
    try:
        path = write_report(report, _out_dir(cfg))
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write report: {exc}")
    click.echo(f"report written to {path}")


@main.command("analyze")
@click.option("--corpus", "corpus_dir", type=str, default=None,
              help="Annotated corpus to analyze (defaults to config corpus).")
@click.pass_obj
def cmd_analyze(cfg, corpus_dir):
    """Text analyses over an annotated corpus: odds ratio, lengths,
    codebook distribution, keyword frequencies."""
    from .data.episode import chunk_stage_info

    corpus_dir = corpus_dir or cfg.get("corpus")
    if not corpus_dir or not os.path.isdir(corpus_dir):
        _fail(EXIT_CONFIG, f"missing corpus directory: {corpus_dir!r}")
    hand_texts, nohand_texts, all_texts = [], [], []
    code_counts = {}
    try:
        for ep in iter_episodes(corpus_dir, tasks=cfg.get("tasks")):
            info = chunk_stage_info(ep)
            for k, text in ep.annotations.items():
                all_texts.append(text)
                hand = info[k][1] if k < len(info) else False
                (hand_texts if hand else nohand_texts).append(text)
                for lbl in classify_codes(text):
                    code_counts[lbl.code] = code_counts.get(lbl.code, 0) + 1
    except StorageError as exc:
        _fail(EXIT_IO, exc)
    if not all_texts:
        _fail(EXIT_CONFIG, "corpus has no annotations to analyze")
    analysis = {
        "n_texts": len(all_texts),
        "codebook_counts": code_counts,
        "keyword_freq": keyword_freq(all_texts),
        "char_stats": char_stats({"hand": hand_texts, "no_hand": nohand_texts}),
    }
    if hand_texts and nohand_texts:
        odds, p, table = safety_odds_ratio(hand_texts, nohand_texts)
        analysis["safety_odds_ratio"] = {"odds_ratio": odds, "p_value": p,
                                         "table": list(table)}
    out = _out_dir(cfg)
    try:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "analysis.json")
        with open(path, "w") as fh:
            json.dump(analysis, fh, sort_keys=True, indent=1)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write analysis: {exc}")
    click.echo(f"analysis written to {path}")


def _final_losses(model, episodes, mcfg, tok, lam):
    bank = SampleBank(episodes, tok, mcfg)
    batch = bank.batch(np.arange(len(bank)))
    _, comps = loss_total(model, batch, lambda_text=lam)
    return comps


@main.command("ablate")
@click.option("--grid", "which", type=click.Choice(["depth", "lambda", "both"]),
              default="both")
@click.option("--corpus", "corpus_dir", type=str, default=None)
@click.option("--rollouts", "n_rollouts", type=int, default=2,
              help="Rollouts per grid point for the action success proxy.")
@click.pass_obj
def cmd_ablate(cfg, which, corpus_dir, n_rollouts):
    """Sweep decoder depth and/or text-loss weight on a shared corpus.

    Rows are appended to ablation.jsonl as each point finishes, so an
    interrupted sweep keeps its partial results.
    """
    corpus_dir = corpus_dir or cfg.get("corpus")
    if not corpus_dir or not os.path.isdir(corpus_dir):
        _fail(EXIT_CONFIG, f"missing corpus directory: {corpus_dir!r}")
    grids = {**DEFAULT_ABLATION, **cfg.get("ablation", {})}
    points = []
    if which in ("depth", "both"):
        points += [("decoder_layers", v) for v in grids["decoder_layers"]]
    if which in ("lambda", "both"):
        points += [("lambda_text", v) for v in grids["lambda_text"]]
    if not points:
        _fail(EXIT_CONFIG, "empty ablation grid")

    episodes = list(iter_episodes(corpus_dir, tasks=cfg.get("tasks")))
    out = _out_dir(cfg)
    os.makedirs(out, exist_ok=True)
    table_path = os.path.join(out, "ablation.jsonl")
    reg = default_registry()
    tok = build_tokenizer()
    seed = cfg.get("seed")
    rows = []
    for param, value in points:
        t0 = time.time()
        try:
            mcfg = _model_config(cfg, seed=seed).with_overrides(**{param: value})
        except ValueError as exc:
            _fail(EXIT_CONFIG, exc)
        try:
            model, _, _ = train(episodes, mcfg, tokenizer=tok)
        except TrainingAborted as exc:
            _fail(EXIT_TRAIN_ABORT, f"ablation point {param}={value}: {exc}")
        comps = _final_losses(model, episodes, mcfg, tok, mcfg.lambda_text)
        succ = []
        for i in range(n_rollouts):
            task = reg[episodes[i % len(episodes)].task_id]
            ep = rollout_episode(model, tok, mcfg, task, 5000 + i, registry=reg,
                                 max_chunks=int(cfg.get("eval", {}).get("max_chunks", 12)))
            succ.append(score_task_execution(ep, reg).success_rate)
        row = {
            "param": param, "value": value,
            "text_loss": comps["text_loss"],
            "action_loss": comps["action_loss"],
            "action_success": float(np.mean(succ)) if succ else None,
            "wall_time_s": round(time.time() - t0, 1),
        }
        rows.append(row)
        with open(table_path, "a") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        click.echo(json.dumps(row, sort_keys=True))
    click.echo(f"ablation table written to {table_path}")


if __name__ == "__main__":
    main()
