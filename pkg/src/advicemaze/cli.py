"""Command line interface: experiments, analysis, live service, advice client."""
from __future__ import annotations

import json
from pathlib import Path

import click

from .harness import (
    ExperimentConfig,
    desk_scale_config,
    packaged_map_path,
    run_experiment,
    transfer_experiment,
)
from .metrics import VisitHeatmap, kl_divergence
from .render import RenderConfig, TexturePalette, aliasing_index, render, write_pgm
from .world import AgentPose, Heading, load_map_file

AGENT_CHOICE = click.Choice(["baseline", "fa", "naa"])
CONDITION_CHOICE = click.Choice(["hfha", "hfla", "lfha", "lfla", "human", "none"])
PALETTE_CHOICE = click.Choice(["aliased", "landmarked"])


@click.group()
def main() -> None:
    """Maze testbed for advice-driven deep Q-learning under aliasing."""


def _build_config(
    preset: str,
    agent: str,
    condition: str,
    map_path: str | None,
    episodes: int | None,
    sessions: int | None,
    seed: int,
    friction: int,
    palette: str | None,
    out_dir: str | None,
    serve_port: int | None,
    checkpoint: str | None,
) -> ExperimentConfig:
    overrides: dict = {"base_seed": seed, "friction": friction}
    if map_path:
        overrides["map_path"] = map_path
    if episodes:
        overrides["episodes"] = episodes
    if sessions:
        overrides["sessions"] = sessions
    if palette:
        overrides["palette"] = palette
    if out_dir:
        overrides["out_dir"] = out_dir
    if serve_port is not None:
        overrides["serve_port"] = serve_port
    if checkpoint:
        overrides["checkpoint_path"] = checkpoint
    if preset == "desk":
        return desk_scale_config(agent, condition, **overrides)
    return ExperimentConfig(agent=agent, condition=condition, **overrides)


@main.command()
@click.option("--agent", type=AGENT_CHOICE, default="baseline", show_default=True)
@click.option("--condition", type=CONDITION_CHOICE, default="none", show_default=True)
@click.option("--preset", type=click.Choice(["desk", "paper"]), default="desk", show_default=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--episodes", type=int, default=None, help="Episodes per session (preset default otherwise).")
@click.option("--sessions", type=int, default=None, help="Independent sessions (preset default otherwise).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--friction", type=int, default=2, show_default=True, help="Advice persistence in forward steps.")
@click.option("--palette", type=PALETTE_CHOICE, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--serve-port", type=int, default=None, help="Expose live telemetry/advice on this port.")
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None, help="Save per-session checkpoints here.")
def train(agent, condition, preset, map_path, episodes, sessions, seed, friction,
          palette, out_dir, serve_port, checkpoint) -> None:
    """Train an agent and persist metrics, heatmaps, and a summary."""
    cfg = _build_config(
        preset, agent, condition, map_path, episodes, sessions, seed,
        friction, palette, out_dir, serve_port, checkpoint,
    )
    if condition == "human" and serve_port is None:
        raise click.UsageError("--condition human needs --serve-port for advice input")

    handle = None
    channel = None
    if serve_port is not None:
        from .service import serve as serve_service

        handle, hub = serve_service(serve_port)
        hub.register_map(load_map_file(cfg.resolved_map_path))
        channel = hub.channel
        click.echo(f"telemetry on ws://127.0.0.1:{handle.port}/ws")
    try:
        result = run_experiment(cfg, channel=channel)
    finally:
        if handle is not None:
            handle.stop()
    click.echo(f"wrote {cfg.out_dir}/metrics.csv")
    click.echo(json.dumps(
        {
            "median_episodes_to_stable_goal": result.summary["median_episodes_to_stable_goal"],
            "mean_final_moving_average": result.summary["mean_final_moving_average"],
        },
        sort_keys=True,
    ))


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the combined heatmap CSV here (default: print stats only).")
def heatmap(run_dir, out_path) -> None:
    """Combine per-session visit heatmaps from a run directory."""
    paths = sorted(Path(run_dir).glob("session*_heatmap.csv"))
    if not paths:
        raise click.ClickException(f"no session heatmaps under {run_dir}")
    total = VisitHeatmap.from_csv(paths[0].read_text())
    for p in paths[1:]:
        total = total + VisitHeatmap.from_csv(p.read_text())
    if out_path:
        Path(out_path).write_text(total.to_csv())
        click.echo(f"wrote {out_path}")
    click.echo(json.dumps({"sessions": len(paths), "total_visits": total.total}))


@main.command()
@click.argument("p_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("q_csv", type=click.Path(exists=True, dir_okay=False))
def kl(p_csv, q_csv) -> None:
    """KL divergence (both directions, nats) between two heatmap CSVs."""
    p = VisitHeatmap.from_csv(Path(p_csv).read_text())
    q = VisitHeatmap.from_csv(Path(q_csv).read_text())
    click.echo(json.dumps(
        {"kl_pq": kl_divergence(p, q), "kl_qp": kl_divergence(q, p)}, sort_keys=True
    ))


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--agent", type=AGENT_CHOICE, default="naa", show_default=True)
@click.option("--condition", type=CONDITION_CHOICE, default="hfha", show_default=True)
@click.option("--preset", type=click.Choice(["desk", "paper"]), default="desk", show_default=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--episodes", type=int, default=None)
@click.option("--rotations", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def transfer(checkpoint, agent, condition, preset, map_path, episodes, rotations, seed, out_dir) -> None:
    """Continue a checkpoint on the rotated map; report reconvergence."""
    cfg = _build_config(
        preset, agent, condition, map_path, episodes, 1, seed,
        2, None, out_dir, None, None,
    )
    report = transfer_experiment(cfg, checkpoint, rotations=rotations)
    click.echo(json.dumps(report, sort_keys=True))


@main.command("aliasing-index")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--palette", "palettes", type=PALETTE_CHOICE, multiple=True,
              help="Repeatable; default compares both palettes.")
@click.option("--obs", type=int, default=32, show_default=True)
@click.option("--threshold", type=float, default=0.02, show_default=True)
def aliasing_index_cmd(map_path, palettes, obs, threshold) -> None:
    """Fraction of near-identical view pairs per texture palette."""
    gmap = load_map_file(map_path or packaged_map_path("paper20.map"))
    cfg = RenderConfig(width=obs, height=obs)
    names = palettes or ("aliased", "landmarked")
    out = {
        name: aliasing_index(gmap, TexturePalette.from_name(name), cfg, threshold)
        for name in names
    }
    click.echo(json.dumps(out, sort_keys=True))


@main.command("render")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--x", type=int, default=None, help="Cell x (default: spawn).")
@click.option("--y", type=int, default=None, help="Cell y (default: spawn).")
@click.option("--heading", type=click.Choice(["north", "east", "south", "west"]), default=None)
@click.option("--palette", type=PALETTE_CHOICE, default="aliased", show_default=True)
@click.option("--obs", type=int, default=32, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def render_cmd(map_path, x, y, heading, palette, obs, out_path) -> None:
    """Export one first-person frame as a PGM image."""
    gmap = load_map_file(map_path or packaged_map_path("paper20.map"))
    pose = AgentPose(
        x if x is not None else gmap.spawn.x,
        y if y is not None else gmap.spawn.y,
        Heading[heading.upper()] if heading else gmap.spawn.heading,
    )
    if not gmap.is_traversable(pose.x, pose.y):
        raise click.ClickException(f"cell ({pose.x}, {pose.y}) is not traversable")
    frame = render(gmap, pose, TexturePalette.from_name(palette), RenderConfig(obs, obs))
    write_pgm(frame, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(file_okay=False), default=None,
              help="Serve the teacher console from this directory.")
def serve(port, host, static_dir) -> None:
    """Run the service: start runs via POST /runs, teach via ws://.../ws."""
    import uvicorn

    from .service import ServiceHub, create_app

    app = create_app(ServiceHub(), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@click.option("--url", default="ws://127.0.0.1:8765/ws", show_default=True)
@click.option("--direction", type=click.Choice(["north", "south", "east", "west"]), required=True)
@click.option("--count", type=int, default=1, show_default=True)
def advise(url, direction, count) -> None:
    """Send cardinal advice to a running service (scripted teacher client)."""
    from websockets.sync.client import connect

    with connect(url) as ws:
        for _ in range(count):
            ws.send(json.dumps({"type": "advice", "direction": direction}))
    click.echo(f"sent {count} x {direction}")


if __name__ == "__main__":
    main()
