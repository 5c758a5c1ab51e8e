"""Command-line entry points.

The CLI is a thin client: generation commands write instances to disk, the
eval commands roll scripted policies (in-process by default, or against a
running server with --server), and ``serve`` starts the HTTP service.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import jigsaw as jigsaw_env
from . import vsp as vsp_env
from .curation import PerturbationConfig, build_records, emit_dataset
from .episodes import TASKS
from .harness import HttpGym, InProcessGym, PolicySpec, run_suite
from .raster import to_png


@click.group()
def main():
    """toolgym: multi-turn visual tool-calling gym."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True, type=int)
@click.option("--log-dir", default=None, type=click.Path(file_okay=False),
              help="Append terminal episode snapshots to episodes.jsonl here.")
def serve(host: str, port: int, log_dir):
    """Run the HTTP episode server."""
    import uvicorn

    from .episodes import EpisodeService
    from .server import create_app

    app = create_app(EpisodeService(log_dir=log_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def vsp():
    """Grid-task utilities."""


@vsp.command("gen")
@click.option("--size", default=4, show_default=True, type=int)
@click.option("--holes", default=None, type=int, help="Hole count (default: size).")
@click.option("--count", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--kind", default="navigation", show_default=True,
              type=click.Choice(["navigation", "verification"]))
@click.option("--cell-px", default=100, show_default=True, type=int)
def vsp_gen(size, holes, count, seed, out, kind, cell_px):
    """Emit PNG + ground-truth sidecar per generated grid instance."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    holes = size if holes is None else holes
    for i in range(count):
        instance = vsp_env.make_instance(kind, size, holes, seed + i, cell_px=cell_px)
        stem = f"vsp_{kind}_{seed + i:06d}"
        (out_dir / f"{stem}.png").write_bytes(to_png(instance.rendered))
        (out_dir / f"{stem}.json").write_text(
            json.dumps(instance.to_record(), indent=2) + "\n"
        )
    click.echo(f"wrote {count} {kind} instance(s) to {out_dir}")


@main.group()
def jigsaw():
    """Jigsaw-task utilities."""


@jigsaw.command("gen")
@click.option("--count", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--source-px", default=300, show_default=True, type=int)
def jigsaw_gen(count, seed, out, source_px):
    """Emit base/candidate PNGs + ground-truth record per puzzle."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        instance = jigsaw_env.make_instance(seed + i, source_px=source_px)
        stem = f"jigsaw_{seed + i:06d}"
        (out_dir / f"{stem}_base.png").write_bytes(to_png(instance.base))
        (out_dir / f"{stem}_cand_a.png").write_bytes(to_png(instance.candidates["A"]))
        (out_dir / f"{stem}_cand_b.png").write_bytes(to_png(instance.candidates["B"]))
        (out_dir / f"{stem}.json").write_text(
            json.dumps(instance.to_record(), indent=2) + "\n"
        )
    click.echo(f"wrote {count} puzzle(s) to {out_dir}")


@main.command()
@click.option("--task", default="all", show_default=True,
              type=click.Choice(["all", *TASKS]))
@click.option("--count", default=100, show_default=True, type=int)
@click.option("--reflection", default=0.0, show_default=True, type=float)
@click.option("--failure", default=0.0, show_default=True, type=float)
@click.option("--no-tool", default=0.0, show_default=True, type=float)
@click.option("--retries", default=2, show_default=True, type=int,
              help="Failed attempts before the fallback answer.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def curate(task, count, reflection, failure, no_tool, retries, seed, out):
    """Synthesize a curated trajectory dataset (JSONL + images + manifest)."""
    tasks = list(TASKS) if task == "all" else [task]
    cfg = PerturbationConfig(
        reflection_fraction=reflection,
        failure_fraction=failure,
        no_tool_fraction=no_tool,
        failure_retry_count=retries,
        seed=seed,
    )
    records = build_records(tasks, count, cfg, seed=seed)
    manifest = emit_dataset(records, out)
    click.echo(json.dumps(manifest, indent=2))


@main.group("eval")
def eval_group():
    """Policy rollouts and usage metrics."""


@eval_group.command("run")
@click.option("--policy", default="oracle", show_default=True,
              type=click.Choice(["oracle", "noisy", "no_tool", "replay"]))
@click.option("--task", "tasks", multiple=True,
              type=click.Choice(list(TASKS)), default=("vsp_nav",), show_default=True)
@click.option("--count", default=20, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--p-error", default=0.2, show_default=True, type=float,
              help="Corruption probability for the noisy policy.")
@click.option("--replay-path", default=None, type=click.Path(exists=True),
              help="Dataset directory for the replay policy.")
@click.option("--report", default=None, type=click.Path(dir_okay=False),
              help="Write the suite report JSON here.")
@click.option("--freq-csv", default=None, type=click.Path(dir_okay=False),
              help="Write per-tool frequency curves as CSV.")
@click.option("--server", default=None, help="Base URL of a running server; "
              "defaults to an in-process gym.")
@click.option("--size", default=None, type=int, help="Grid size override.")
@click.option("--randomize-seed", default=None, type=int,
              help="Roll out under seed-randomized tool schemas.")
def eval_run(policy, tasks, count, seed, p_error, replay_path, report,
             freq_csv, server, size, randomize_seed):
    """Roll a scripted policy and print Table-style usage metrics."""
    spec = PolicySpec(kind=policy, p_error=p_error, replay_path=replay_path)
    gym = HttpGym(server) if server else InProcessGym()
    overrides = {}
    for t in tasks:
        cfg = {}
        if size is not None and t.startswith("vsp"):
            cfg["size"] = size
        if randomize_seed is not None:
            cfg["randomize_seed"] = randomize_seed
        overrides[t] = cfg
    suite = run_suite(spec, list(tasks), count, seed, gym=gym, cfg_overrides=overrides)
    for task_name, stats in suite.per_task.items():
        succ = "-" if stats["succ_pct"] is None else f"{stats['succ_pct']:.2f}"
        click.echo(
            f"{task_name}: episodes={stats['episodes']} "
            f"turns={stats['mean_turns']:.2f} cps={stats['cps']:.2f} "
            f"succ%={succ} acc%={stats['acc_pct']:.2f}"
        )
    if report:
        Path(report).write_text(json.dumps(suite.to_dict(), indent=2) + "\n")
        click.echo(f"report written to {report}")
    if freq_csv:
        Path(freq_csv).write_text(suite.frequency_csv())
        click.echo(f"frequency curves written to {freq_csv}")


if __name__ == "__main__":
    main()
