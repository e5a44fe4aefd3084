"""Command line covering the whole pipeline: data, filters, training,
rollout, evaluation, and the HTTP service. GLP_SEED in the environment
overrides every seed that would otherwise come from a config or flag."""
from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import click
import numpy as np


def _seed(value: int) -> int:
    env = os.environ.get("GLP_SEED")
    return int(env) if env is not None else value


@click.group()
def main():
    """Desk-scale generative world model tools."""


@main.command("gen-data")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=17, show_default=True)
@click.option("--episodes", default=100, show_default=True)
@click.option("--steps", default=6, show_default=True, help="actions per episode")
@click.option("--frames-per-action", default=8, show_default=True)
def gen_data(out_dir, seed, episodes, steps, frames_per_action):
    """Generate a block-world episode dataset (GWV files + manifest)."""
    from .datapipe import write_dataset
    from .env import generate_dataset

    train, val = generate_dataset(_seed(seed), episodes, steps, frames_per_action)
    manifest = write_dataset(train + val, out_dir)
    click.echo(f"wrote {len(train) + len(val)} episodes -> {manifest}")


@main.command("filter")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--thresholds", "thresholds_path", type=click.Path(exists=True))
@click.option("--fps", default=12.0, show_default=True)
def filter_cmd(in_dir, out_path, thresholds_path, fps):
    """Run the data filters over a directory of GWV clips."""
    from .datapipe import FilterThresholds, apply_filters, read_gwv

    th = None
    if thresholds_path:
        th = FilterThresholds.from_json(Path(thresholds_path).read_text())
    reports = []
    for path in sorted(Path(in_dir).glob("*.gwv")):
        clip = read_gwv(path).to_float()
        reports.append(apply_filters(clip, th, fps=fps, clip_id=path.stem))
    Path(out_path).write_text(json.dumps([r.to_dict() for r in reports], indent=2))
    kept = sum(r.verdict for r in reports)
    click.echo(f"{kept}/{len(reports)} clips pass -> {out_path}")


@main.command("train")
@click.option("--stage", type=click.Choice(["1", "2"]), required=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--init-from", "init_from", type=click.Path(exists=True),
              help="stage-1 checkpoint to start stage 2 from")
@click.option("--resume", "resume", type=click.Path(exists=True))
def train(stage, config_path, init_from, resume):
    """Train one flow-matching stage from a JSON config."""
    from .training import TrainConfig, train_stage1, train_stage2

    cfg = TrainConfig.load(config_path)
    if cfg.stage != int(stage):
        raise click.UsageError(f"--stage {stage} but config says stage {cfg.stage}")
    if os.environ.get("GLP_SEED") is not None:
        cfg = dataclasses.replace(cfg, seed=_seed(cfg.seed))
    if cfg.stage == 1:
        result = train_stage1(cfg, resume=resume, log=click.echo)
    else:
        result = train_stage2(cfg, init_from=init_from, resume=resume, log=click.echo)
    click.echo(f"finished after {result.steps} steps; checkpoint at {cfg.out}")


@main.command("rollout")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--actions", "actions_path", required=True, type=click.Path(exists=True),
              help="text file, one grammar sentence per line")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--env-seed", default=0, show_default=True, help="initial scene seed")
@click.option("--seed", default=17, show_default=True, help="decoder noise seed")
@click.option("--cfg-scale", default=4.0, show_default=True)
def rollout(ckpt_path, actions_path, out_dir, env_seed, seed, cfg_scale):
    """Closed-loop rollout of an action script; writes GWV video + summary."""
    from .datapipe import GwvVideo, write_gwv
    from .env import random_scene, render
    from .numerics import RngStream
    from .rollout import Session
    from .training import bundle_from_checkpoint

    actions = [ln.strip() for ln in Path(actions_path).read_text().splitlines() if ln.strip()]
    if not actions:
        raise click.UsageError("actions file is empty")
    bundle = bundle_from_checkpoint(ckpt_path)
    scene = random_scene(RngStream(env_seed, "scene"))
    frame = render(scene)
    session = Session(bundle, frame, RngStream(_seed(seed), "rollout"), cfg_scale=cfg_scale)
    stream = [frame[None]]
    for i, action in enumerate(actions, start=1):
        _, frames = session.step(action)
        stream.append(frames)
        click.echo(f"step {i}/{len(actions)}: {action}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_gwv(GwvVideo.from_float(np.concatenate(stream, axis=0)), out / "rollout.gwv")
    summary = {
        "actions": actions,
        "steps": session.step_count,
        "frames": int(sum(len(s) for s in stream)),
        "latent_summary": session.history[-1].state_norms,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    click.echo(f"wrote {out / 'rollout.gwv'}")


def _eval_rollout_cases(bundle, seed, cases, steps, cfg_scale, want_truth):
    """Shared loop for smoothness/consistency: model rollout beside the env."""
    from .env import applicable_actions, random_scene, render, step
    from .numerics import RngStream
    from .rollout import Session

    fpa = bundle.shape.frames_per_action
    for i in range(cases):
        rng = RngStream(seed, f"eval-case/{i}")
        state = random_scene(rng.child("scene"))
        session = Session(bundle, render(state), rng.child("model"), cfg_scale=cfg_scale)
        model_steps, truth_steps, script = [], [], []
        for _ in range(steps):
            action = rng.choice(applicable_actions(state, fpa))
            script.append(action)
            _, frames = session.step(action)
            model_steps.append(frames)
            state, gt_frames, _ = step(state, action, fpa)
            if want_truth:
                truth_steps.append(gt_frames)
        yield i, script, model_steps, truth_steps


@main.command("eval")
@click.option("--suite", type=click.Choice(["smoothness", "consistency", "stepwise", "planning"]),
              required=True)
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=17, show_default=True)
@click.option("--cases", default=8, show_default=True, help="rollout cases (smoothness/consistency)")
@click.option("--steps", default=4, show_default=True, help="actions per rollout case")
@click.option("--instances", default=200, show_default=True, help="stepwise instances")
@click.option("--tasks", default=46, show_default=True, help="planning tasks")
@click.option("--cfg-scale", default=4.0, show_default=True)
def eval_cmd(suite, ckpt_path, out_path, seed, cases, steps, instances, tasks, cfg_scale):
    """Run one benchmark suite against a checkpoint; writes results.json."""
    from .evalsuite import (
        RolloutWorldModel,
        build_planning_suite,
        build_stepwise_instances,
        repeater_model,
        rollout_model,
        simulation_consistency,
        simulative_plan,
        stepwise_eval,
        transition_smoothness,
    )
    from .numerics import RngStream
    from .training import bundle_from_checkpoint

    seed = _seed(seed)
    bundle = bundle_from_checkpoint(ckpt_path)
    records: list[dict] = []

    if suite == "smoothness":
        for i, script, model_steps, _ in _eval_rollout_cases(
                bundle, seed, cases, steps, cfg_scale, want_truth=False):
            score = transition_smoothness(np.concatenate(model_steps, axis=0))
            records.append({"case": i, "script": script, "score": score})
        aggregate = {"mean_smoothness": float(np.mean([r["score"] for r in records]))}
    elif suite == "consistency":
        for i, script, model_steps, truth_steps in _eval_rollout_cases(
                bundle, seed, cases, steps, cfg_scale, want_truth=True):
            score = simulation_consistency(model_steps, truth_steps)
            records.append({"case": i, "script": script, "score": score})
        aggregate = {"mean_consistency": float(np.mean([r["score"] for r in records]))}
    elif suite == "stepwise":
        insts = build_stepwise_instances(seed, instances)
        model = stepwise_eval(rollout_model(bundle, seed, cfg_scale), insts,
                              RngStream(seed, "eval/stepwise"))
        chance = stepwise_eval(repeater_model(), insts, RngStream(seed, "eval/stepwise"))
        records.append({"model_accuracy": model.accuracy, "repeater_accuracy": chance.accuracy,
                        "n_scored": model.n_scored, "skip_reasons": model.skip_reasons})
        aggregate = {"accuracy": model.accuracy}
    else:
        world = RolloutWorldModel(bundle, seed, cfg_scale=cfg_scale)
        wins = 0
        for task in build_planning_suite(seed, tasks):
            trace = simulative_plan(None, world, task)
            wins += trace.success
            records.append({"task": task.task_id, "oracle_len": task.oracle_len,
                            "budget": task.budget, "status": trace.status,
                            "actions": trace.actions})
        aggregate = {"success_rate": wins / len(records)}

    payload = {"suite": suite, "ckpt": str(ckpt_path), "seed": seed,
               "records": records, "aggregate": aggregate}
    Path(out_path).write_text(json.dumps(payload, indent=2))
    click.echo(f"{suite}: {aggregate} -> {out_path}")


@main.command("serve")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--server-seed", default=0, show_default=True)
@click.option("--cfg-scale", default=4.0, show_default=True)
def serve(ckpt_path, port, host, server_seed, cfg_scale):
    """Serve the session API over a checkpoint."""
    import uvicorn

    from .service import create_app
    from .training import bundle_from_checkpoint

    bundle = bundle_from_checkpoint(ckpt_path)
    registry = {"default": bundle, Path(ckpt_path).stem: bundle}
    app = create_app(registry, server_seed=_seed(server_seed), cfg_scale=cfg_scale)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
