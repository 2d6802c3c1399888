"""Command-line front door. Batch commands drive the core package
directly; ``serve`` launches the session service that the operator UI and
scripted clients talk to."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .config import ENV_VAR, load_config
from .env import Environment
from .errors import CoadaptError
from .trace import EpisodeTrace, format_replay

REWARD_VARIANTS = ("r1", "r2")


def _load_cfg(config_path):
    return load_config(config_path)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              help=f"Config JSON path (or set {ENV_VAR}).")
@click.pass_context
def main(ctx, config_path):
    """Event-triggered shared-control simulator, trainer, and service."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--reward", type=click.Choice(REWARD_VARIANTS), required=True)
@click.option("--episodes", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=str, required=True)
@click.pass_context
def train(ctx, reward, episodes, seed, out_dir):
    """Train both agents in fast fidelity; writes checkpoints and metrics."""
    try:
        cfg = _load_cfg(ctx.obj["config_path"])
        env = Environment(cfg)
        weights = _variant_weights(cfg, reward)
        done = {"n": 0}

        def progress(ep, total):
            if ep % max(total // 20, 1) == 0 or ep == total:
                click.echo(f"episode {ep}/{total}")
            done["n"] = ep

        result = env.run_training(weights, episodes, seed, out_dir,
                                  progress=progress)
        click.echo(f"checkpoint: {result['checkpoint']}")
        click.echo(f"metrics: {result['metrics']}")
    except CoadaptError as exc:
        _fail(str(exc))


def _variant_weights(cfg, variant: str):
    w = cfg["experiment"][f"reward_{variant}"]
    return (w["alpha"], w["beta"], w["gamma"], w["eta"], w["rho"])


@main.command("eval")
@click.option("--checkpoint", type=str, required=True)
@click.option("--episodes", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fidelity", type=click.Choice(["fast", "dynamic"]),
              default="dynamic", show_default=True)
@click.option("--reward", type=click.Choice(REWARD_VARIANTS), default="r2",
              show_default=True)
@click.option("--out", "out_dir", type=str, default=None,
              help="Optional directory for rows.csv and traces.")
@click.pass_context
def eval_cmd(ctx, checkpoint, episodes, seed, fidelity, reward, out_dir):
    """Greedy evaluation episodes from a checkpoint."""
    try:
        cfg = _load_cfg(ctx.obj["config_path"])
        env = Environment(cfg)
        spec = harness.ExperimentSpec(
            config_id=f"dammrl_{reward}", episodes=episodes,
            seeds=tuple(seed + k for k in range(episodes)),
            reward_weights=_variant_weights(cfg, reward),
            checkpoint=checkpoint, fidelity=fidelity)
        out = out_dir or "eval_out"
        table = harness.run_comparison([spec], env, out)
        for agg in table.aggregates:
            if agg["metric"] in ("success", "total_time", "final_error"):
                click.echo(f"{agg['metric']}: mean={agg['mean']:.4f} "
                           f"ci=({agg['ci_lo']:.4f}, {agg['ci_hi']:.4f})")
        click.echo(f"rows: {Path(out) / 'rows.csv'}")
    except CoadaptError as exc:
        _fail(str(exc))


@main.command()
@click.option("--spec", "spec_path", type=str, required=True,
              help="JSON file with {seeds, configs:[...]}.")
@click.option("--out", "out_dir", type=str, default="comparison_out",
              show_default=True)
@click.pass_context
def compare(ctx, spec_path, out_dir):
    """Run the multi-configuration comparison over shared seeds."""
    try:
        cfg = _load_cfg(ctx.obj["config_path"])
        env = Environment(cfg)
        specs = harness.load_spec_file(spec_path)

        def progress(config_id, k, n):
            if k % max(n // 10, 1) == 0 or k == n:
                click.echo(f"{config_id}: {k}/{n}")

        harness.run_comparison(specs, env, out_dir, progress=progress)
        click.echo(f"wrote {Path(out_dir) / 'rows.csv'} and aggregates.csv")
    except CoadaptError as exc:
        _fail(str(exc))


@main.command()
@click.argument("trace_dir", type=str)
@click.option("--out", "out_path", type=str, default=None,
              help="CSV output path (default: stdout).")
def profile(trace_dir, out_path):
    """Small-step selection fractions by distance-to-goal band."""
    try:
        paths = sorted(Path(trace_dir).glob("*.jsonl"))
        if not paths:
            _fail(f"no .jsonl traces under {trace_dir}")
        traces = [EpisodeTrace.read(p) for p in paths]
        prof = harness.step_size_profile(traces)
        if out_path:
            harness.write_profile_csv(prof, out_path)
            click.echo(f"wrote {out_path}")
        else:
            for band, row in prof.items():
                hi = "inf" if band[1] == float("inf") else f"{band[1]:.2f}"
                fr = ", ".join(f"{v:.3f}" for v in row["small_fraction"])
                click.echo(f"[{band[0]:.2f}, {hi}) m  n={row['commands']}  "
                           f"small fraction (x,y,z) = {fr}")
    except CoadaptError as exc:
        _fail(str(exc))


@main.command()
@click.argument("trace_file", type=str)
def replay(trace_file):
    """Print a human-readable step log for a recorded trace."""
    p = Path(trace_file)
    if not p.exists():
        _fail(f"trace file not found: {p}")
    try:
        trace = EpisodeTrace.read(p)
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(f"cannot parse {p}: {exc}")
    for line in format_replay(trace):
        click.echo(line)


@main.command()
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="host:port to listen on.")
@click.option("--checkpoint", type=str, default=None,
              help="DAMMRL checkpoint for the robot agent.")
@click.option("--robot-policy", type=click.Choice(["fixed", "dammrl"]),
              default="fixed", show_default=True)
@click.option("--ui-dir", type=str, default=None,
              help="Directory of built operator-console assets to serve.")
@click.option("--pressure-source", type=str, default=None,
              help="Byte-stream path (file, pipe, device) of sensor samples.")
@click.pass_context
def serve(ctx, bind, checkpoint, robot_policy, ui_dir, pressure_source):
    """Run the live session service."""
    try:
        import uvicorn

        from .service.app import create_app

        cfg = _load_cfg(ctx.obj["config_path"])
        if robot_policy == "dammrl" and checkpoint is None:
            _fail("--robot-policy dammrl requires --checkpoint")
        host, _, port = bind.partition(":")
        app = create_app(cfg, checkpoint=checkpoint, robot_policy=robot_policy,
                         ui_dir=ui_dir, pressure_source=pressure_source)
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                    log_level="warning")
    except CoadaptError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
