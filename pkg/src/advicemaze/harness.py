"""Experiment orchestration: condition sweeps, persisted metrics, transfer runs.

Outputs per run directory: ``metrics.csv`` (all sessions, one row per
episode), ``session<k>_metrics.csv`` and ``session<k>_heatmap.csv`` per
session, a combined ``heatmap.csv``, and ``summary.json``. Identical
configuration and seeds reproduce every file byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .agents import ArbitrationConfig
from .loop import AGENT_KINDS, SessionResult, SessionSpec, run_session
from .metrics import (
    EpisodeRecord,
    VisitHeatmap,
    censored_median,
    episodes_to_stable_goal,
    kl_divergence,
    moving_average,
    records_to_csv,
)
from .oracle import CONDITIONS, OracleConfig
from .qnet import NetworkSpec, TrainingConfig, load_checkpoint, save_checkpoint
from .render import RenderConfig, TexturePalette
from .telemetry import TelemetryChannel
from .world import GridMap, load_map_file, rotate_map_90

CONDITION_NAMES = tuple(CONDITIONS) + ("human", "none")

BASELINE_MAX_ACTIONS = 1500
ADVICE_MAX_ACTIONS = 1000


def packaged_map_path(name: str) -> Path:
    return Path(resources.files("advicemaze").joinpath("maps", name))  # type: ignore[arg-type]


@dataclass(frozen=True)
class ExperimentConfig:
    agent: str = "baseline"
    condition: str = "none"
    map_path: str | None = None  # default: the shipped 20x20 map
    episodes: int = 250
    sessions: int = 5
    base_seed: int = 0
    seeds: tuple[int, ...] | None = None
    out_dir: str | None = None
    serve_port: int | None = None
    palette: str = "aliased"
    obs_size: int = 32
    frame_stack: int = 4
    max_actions: int | None = None  # None: 1500 for baseline, 1000 otherwise
    friction: int = 2
    cost_threshold: float = 0.25
    queue_capacity: int = 5
    queue_ttl: int = 20
    conv_channels: tuple[int, ...] = (16, 32, 32, 64)
    dense_widths: tuple[int, ...] = (128,)
    train_period: int = 4
    training: TrainingConfig = field(default_factory=TrainingConfig)
    checkpoint_path: str | None = None
    learn: bool = True
    stable_goal_streak: int = 3

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise ValueError(f"unknown agent {self.agent!r}")
        if self.condition not in CONDITION_NAMES:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.sessions < 1:
            raise ValueError("sessions must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.sessions:
            raise ValueError("seed list length must equal sessions")

    @property
    def resolved_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return self.seeds
        return tuple(self.base_seed + i for i in range(self.sessions))

    @property
    def resolved_max_actions(self) -> int:
        if self.max_actions is not None:
            return self.max_actions
        return BASELINE_MAX_ACTIONS if self.agent == "baseline" else ADVICE_MAX_ACTIONS

    @property
    def resolved_map_path(self) -> Path:
        return Path(self.map_path) if self.map_path else packaged_map_path("paper20.map")

    def oracle_config(self, seed: int) -> OracleConfig | None:
        if self.condition in CONDITIONS:
            return OracleConfig.from_condition(self.condition, seed=seed)
        return None  # "human" feeds the queue via the server; "none" is baseline

    def session_spec(self, gmap: GridMap, session: int, seed: int) -> SessionSpec:
        return SessionSpec(
            gmap=gmap,
            agent_kind=self.agent,
            episodes=self.episodes,
            max_actions=self.resolved_max_actions,
            oracle_cfg=self.oracle_config(seed),
            palette=TexturePalette.from_name(self.palette),
            render_cfg=RenderConfig(width=self.obs_size, height=self.obs_size),
            frame_stack=self.frame_stack,
            net_spec=NetworkSpec(
                input_shape=(self.frame_stack, self.obs_size, self.obs_size),
                conv_channels=self.conv_channels,
                dense_widths=self.dense_widths,
            ),
            training=self.training,
            train_period=self.train_period,
            arbitration=ArbitrationConfig(
                cost_threshold=self.cost_threshold, friction=self.friction
            ),
            queue_capacity=self.queue_capacity,
            queue_ttl=self.queue_ttl,
            seed=seed,
            session=session,
            learn=self.learn,
        )


def desk_scale_config(agent: str, condition: str, **overrides) -> ExperimentConfig:
    """CI-sized preset: 12x12 map, small network, short episodes."""
    base = dict(
        agent=agent,
        condition=condition,
        map_path=str(packaged_map_path("desk12.map")),
        episodes=120,
        sessions=5,
        obs_size=32,
        frame_stack=4,
        max_actions=525 if agent == "baseline" else 350,
        conv_channels=(8, 16),
        dense_widths=(64,),
        train_period=8,
        training=TrainingConfig(
            learning_rate=1e-3,
            batch_size=32,
            replay_capacity=4000,
            min_replay=200,
            target_sync_period=100,
            eps_start=0.5,
            eps_end=0.05,
            eps_decay_steps=4000,
        ),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    gmap: GridMap
    sessions: list[SessionResult]
    summary: dict

    @property
    def records(self) -> list[EpisodeRecord]:
        return [r for s in self.sessions for r in s.records]

    @property
    def heatmap(self) -> VisitHeatmap:
        total = VisitHeatmap.for_map(self.gmap)
        for s in self.sessions:
            total = total + s.heatmap
        return total

    def metrics_csv(self) -> str:
        return records_to_csv(self.records)


def _session_summary(cfg: ExperimentConfig, result: SessionResult, seed: int) -> dict:
    records = result.records
    goal_count = sum(r.reached_goal for r in records)
    return {
        "session": result.session,
        "seed": seed,
        "episodes": len(records),
        "episodes_to_stable_goal": episodes_to_stable_goal(records, cfg.stable_goal_streak),
        "final_moving_average": result.final_moving_average,
        "mean_score": sum(r.score for r in records) / len(records),
        "goal_episodes": goal_count,
        "total_steps": sum(r.steps for r in records),
        "advice_offered": sum(r.advice_offered for r in records),
        "advice_used": sum(r.advice_used for r in records),
    }


def run_experiment(
    cfg: ExperimentConfig,
    channel: TelemetryChannel | None = None,
    agent_factory=None,
    workers: int = 1,
) -> ExperimentResult:
    """Run every session and persist metrics when out_dir is set.

    Sessions share no mutable state, so with ``workers > 1`` they run in
    parallel processes; results come back in session order either way, and
    output files are identical. Live telemetry and injected agent factories
    force sequential execution.
    """
    gmap = load_map_file(cfg.resolved_map_path)
    seeds = cfg.resolved_seeds
    specs = [
        cfg.session_spec(gmap, session=i, seed=seed)
        for i, seed in enumerate(seeds, start=1)
    ]
    if workers > 1 and channel is None and agent_factory is None and len(specs) > 1:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            sessions = list(pool.map(run_session, specs))
    else:
        sessions = [
            run_session(spec, channel=channel, agent_factory=agent_factory)
            for spec in specs
        ]

    per_session: list[dict] = []
    for seed, result in zip(seeds, sessions):
        per_session.append(_session_summary(cfg, result, seed))
        if cfg.checkpoint_path and result.trainer is not None:
            path = Path(cfg.checkpoint_path)
            if len(seeds) > 1:
                path = path.with_name(f"{path.stem}_s{result.session}{path.suffix or '.npz'}")
            _save_session_checkpoint(path, cfg, result)

    convergence = [s["episodes_to_stable_goal"] for s in per_session]
    summary = {
        "agent": cfg.agent,
        "condition": cfg.condition,
        "map": str(cfg.resolved_map_path),
        "map_digest": gmap.digest,
        "palette": cfg.palette,
        "episodes": cfg.episodes,
        "sessions": cfg.sessions,
        "seeds": list(seeds),
        "max_actions": cfg.resolved_max_actions,
        "per_session": per_session,
        "median_episodes_to_stable_goal": censored_median(convergence, cfg.episodes),
        "mean_final_moving_average": sum(s["final_moving_average"] for s in per_session)
        / len(per_session),
        "total_advice_offered": sum(s["advice_offered"] for s in per_session),
        "total_advice_used": sum(s["advice_used"] for s in per_session),
    }
    result = ExperimentResult(cfg=cfg, gmap=gmap, sessions=sessions, summary=summary)
    if cfg.out_dir:
        write_experiment_files(result, Path(cfg.out_dir))
    return result


def _save_session_checkpoint(path: Path, cfg: ExperimentConfig, result: SessionResult) -> None:
    trainer = result.trainer
    meta = {
        "global_step": result.global_step,
        "final_moving_average": result.final_moving_average,
        "tracker_max_loss": result.tracker.max_loss if result.tracker else 0.0,
        "tracker_losses": {str(k): v for k, v in (result.tracker.losses if result.tracker else {}).items()},
        "agent": cfg.agent,
        "condition": cfg.condition,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        path,
        spec=result.net_spec,
        params=trainer.params,
        bn_state=trainer.bn_state,
        adam=trainer.adam,
        meta=meta,
    )


def write_experiment_files(result: ExperimentResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(result.metrics_csv())
    (out_dir / "heatmap.csv").write_text(result.heatmap.to_csv())
    for s in result.sessions:
        (out_dir / f"session{s.session}_metrics.csv").write_text(records_to_csv(s.records))
        (out_dir / f"session{s.session}_heatmap.csv").write_text(s.heatmap.to_csv())
    (out_dir / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True) + "\n"
    )


def transfer_experiment(
    cfg: ExperimentConfig,
    checkpoint_path: str,
    rotations: int = 1,
    recovery_fraction: float = 0.9,
    agent_factory=None,
) -> dict:
    """Resume a converged checkpoint on the rotated map and time reconvergence.

    Reconvergence is the first episode whose 10-episode moving-average score
    reaches ``recovery_fraction`` of the phase-1 final moving average.
    """
    ckpt = load_checkpoint(checkpoint_path)
    phase1_ma = float(ckpt.meta.get("final_moving_average", 0.0))
    gmap = load_map_file(cfg.resolved_map_path)
    for _ in range(rotations % 4):
        gmap = rotate_map_90(gmap)

    seed = cfg.resolved_seeds[0]
    spec = replace(
        cfg.session_spec(gmap, session=1, seed=seed),
        net_spec=ckpt.spec,
    )
    result = run_session(spec, agent_factory=agent_factory, resume=ckpt)
    curve = moving_average(result.scores, 10)
    threshold = recovery_fraction * phase1_ma
    reconv = None
    for episode, value in enumerate(curve, start=1):
        if value >= threshold:
            reconv = episode
            break
    report = {
        "checkpoint": str(checkpoint_path),
        "rotations": rotations % 4,
        "phase1_final_moving_average": phase1_ma,
        "threshold": threshold,
        "reconvergence_episode": reconv,
        "phase2_episodes": len(result.records),
        "phase2_final_moving_average": result.final_moving_average,
        "phase1_episodes_reference": int(ckpt.meta.get("phase1_episodes", 0)) or None,
    }
    if cfg.out_dir:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "transfer_metrics.csv").write_text(records_to_csv(result.records))
        (out_dir / "transfer_heatmap.csv").write_text(result.heatmap.to_csv())
        (out_dir / "transfer.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
    return report


__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "desk_scale_config",
    "run_experiment",
    "transfer_experiment",
    "write_experiment_files",
    "packaged_map_path",
    "kl_divergence",
    "moving_average",
]
