"""One training session: environment, renderer, oracle, agent, and learner.

The loop is single-threaded and fully deterministic for a fixed seed: the
master seed spawns independent child streams for network init, exploration,
oracle emissions, and replay sampling, so enabling or disabling one consumer
never perturbs the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import (
    ArbitrationConfig,
    BaselineAgent,
    FAAgent,
    NAAAgent,
    PendingAdviceQueue,
)
from .metrics import EpisodeRecord, VisitHeatmap, expected_score, moving_average
from .oracle import OracleConfig, advise, compute_policy_field
from .qnet import (
    Checkpoint,
    ConfidenceTracker,
    LinearSchedule,
    NetworkSpec,
    QNetwork,
    ReplayBuffer,
    Trainer,
    TrainingConfig,
    Transition,
)
from .render import FrameCache, FrameStack, RenderConfig, TexturePalette
from .telemetry import StateSnapshot, TelemetryChannel
from .world import Action, EpisodeConfig, GridMap, MazeEnv

AGENT_KINDS = ("baseline", "fa", "naa")


@dataclass(frozen=True)
class SessionSpec:
    """Fully resolved inputs for a single training session."""

    gmap: GridMap
    agent_kind: str = "baseline"
    episodes: int = 250
    max_actions: int = 1000
    oracle_cfg: OracleConfig | None = None
    palette: TexturePalette = TexturePalette.aliased()
    render_cfg: RenderConfig = RenderConfig()
    frame_stack: int = 4
    net_spec: NetworkSpec | None = None
    training: TrainingConfig = TrainingConfig()
    train_period: int = 4
    arbitration: ArbitrationConfig = ArbitrationConfig()
    queue_capacity: int = 5
    queue_ttl: int = 20
    seed: int = 0
    session: int = 1
    learn: bool = True

    def resolved_net_spec(self) -> NetworkSpec:
        if self.net_spec is not None:
            return self.net_spec
        return NetworkSpec(
            input_shape=(self.frame_stack, self.render_cfg.height, self.render_cfg.width)
        )


@dataclass
class SessionResult:
    session: int
    records: list[EpisodeRecord]
    heatmap: VisitHeatmap
    global_step: int
    final_moving_average: float
    trainer: Trainer | None = None
    tracker: ConfidenceTracker | None = None
    net_spec: NetworkSpec | None = None

    @property
    def scores(self) -> list[float]:
        return [r.score for r in self.records]


def build_agent(kind: str, q_fn, tracker, queue, arb_cfg):
    if kind == "baseline":
        return BaselineAgent(q_fn)
    if kind == "fa":
        return FAAgent(q_fn, tracker, queue, arb_cfg)
    if kind == "naa":
        return NAAAgent(q_fn, tracker, queue, arb_cfg)
    raise ValueError(f"unknown agent kind {kind!r}")


def run_session(
    spec: SessionSpec,
    channel: TelemetryChannel | None = None,
    agent_factory=None,
    resume: Checkpoint | None = None,
) -> SessionResult:
    if spec.agent_kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {spec.agent_kind!r}")
    seq = np.random.SeedSequence(spec.seed)
    init_rng, agent_rng, oracle_rng, train_rng = (
        np.random.default_rng(child) for child in seq.spawn(4)
    )

    net_spec = spec.resolved_net_spec()
    net = QNetwork(net_spec)
    if resume is not None:
        params = {k: v.copy() for k, v in resume.params.items()}
        bn_state = {k: v.copy() for k, v in resume.bn_state.items()}
    else:
        params, bn_state = net.init_params(init_rng)
    trainer = Trainer(net, params, bn_state, spec.training) if spec.learn else None
    tracker = ConfidenceTracker()
    global_step = 0
    if resume is not None and trainer is not None:
        trainer.adam = resume.restore_adam()
        trainer.sync_target()
        meta = resume.meta
        global_step = int(meta.get("global_step", 0))
        tracker.max_loss = float(meta.get("tracker_max_loss", 0.0))
        tracker.losses = {int(k): float(v) for k, v in meta.get("tracker_losses", {}).items()}

    queue = channel.queue if channel is not None else PendingAdviceQueue(
        spec.queue_capacity, spec.queue_ttl
    )

    def q_fn(obs: np.ndarray) -> np.ndarray:
        live = trainer.params if trainer else params
        live_bn = trainer.bn_state if trainer else bn_state
        return net.q_values(live, live_bn, obs)

    field_ = compute_policy_field(spec.gmap) if spec.oracle_cfg else None
    if agent_factory is not None:
        agent = agent_factory(q_fn=q_fn, tracker=tracker, queue=queue, spec=spec)
    else:
        agent = build_agent(spec.agent_kind, q_fn, tracker, queue, spec.arbitration)

    buffer = ReplayBuffer(spec.training.replay_capacity)
    schedule = LinearSchedule(
        spec.training.eps_start, spec.training.eps_end, spec.training.eps_decay_steps
    )
    cache = FrameCache(spec.gmap, spec.palette, spec.render_cfg)
    env = MazeEnv(spec.gmap, EpisodeConfig(max_actions=spec.max_actions, seed=spec.seed))
    stack = FrameStack(spec.frame_stack)
    heatmap = VisitHeatmap.for_map(spec.gmap)
    records: list[EpisodeRecord] = []
    digest = spec.gmap.digest

    for episode in range(1, spec.episodes + 1):
        pose = env.reset()
        stack.clear()
        stack.push(cache.frame(pose))
        obs = stack.observation().astype(np.float32)
        queue.clear()
        if isinstance(agent, NAAAgent):
            agent.active = None
        offered_mark = queue.total_pushed
        used = 0

        while not env.terminal:
            if channel is not None:
                channel.wait_if_paused()
                channel.global_step = global_step
            if spec.oracle_cfg is not None:
                event = advise(field_, env.pose, spec.oracle_cfg, oracle_rng, global_step)
                if event is not None:
                    queue.push(event)

            epsilon = schedule.value(global_step)
            decision = agent.choose(obs, env.pose, global_step, agent_rng, epsilon)
            outcome = env.step(decision.action)
            if decision.consumed_event:
                used += 1
            heatmap.record(outcome.new_pose.x, outcome.new_pose.y)

            frame = cache.frame(outcome.new_pose)
            stack.push(frame)
            next_obs = stack.observation().astype(np.float32)
            if trainer is not None:
                buffer.push(
                    Transition(
                        obs=obs,
                        action=int(decision.action),
                        reward=outcome.reward / spec.training.reward_scale,
                        next_obs=next_obs,
                        # timeouts bootstrap; only reaching the goal is absorbing
                        terminal=env.reached_goal,
                    )
                )
            obs = next_obs
            global_step += 1

            if (
                trainer is not None
                and len(buffer) >= spec.training.min_replay
                and global_step % spec.train_period == 0
            ):
                trainer.train_step(buffer, tracker, train_rng)

            if channel is not None and channel.client_connected:
                channel.publish(
                    StateSnapshot(
                        episode=episode,
                        step=global_step,
                        x=outcome.new_pose.x,
                        y=outcome.new_pose.y,
                        heading=outcome.new_pose.heading.name.lower(),
                        score=env.score,
                        last_action=decision.action.name.lower(),
                        advice_active=decision.used_advice,
                        frame_w=frame.width,
                        frame_h=frame.height,
                        frame_bytes=frame.to_bytes(),
                        map_digest=digest,
                    )
                )

        entry = "entry" in env.milestones_fired
        exit_ = "exit" in env.milestones_fired
        expect = expected_score(env.reached_goal, entry, exit_, env.steps)
        if abs(env.score - expect) > 1e-9:
            raise RuntimeError(
                f"score accounting broken: got {env.score}, expected {expect}"
            )
        records.append(
            EpisodeRecord(
                session=spec.session,
                episode=episode,
                score=env.score,
                steps=env.steps,
                advice_offered=queue.total_pushed - offered_mark,
                advice_used=used,
                reached_goal=env.reached_goal,
            )
        )

    final_ma = float(moving_average([r.score for r in records], 10)[-1])
    return SessionResult(
        session=spec.session,
        records=records,
        heatmap=heatmap,
        global_step=global_step,
        final_moving_average=final_ma,
        trainer=trainer,
        tracker=tracker,
        net_spec=net_spec,
    )
