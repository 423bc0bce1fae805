"""Synthetic teacher: perfect map knowledge, tunable frequency and accuracy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import AdviceEvent
from .world import AgentPose, GridMap, Heading, bfs_distances

# Preset (frequency, accuracy) pairs per experimental condition.
CONDITIONS = {
    "hfha": (0.05, 1.0),
    "hfla": (0.05, 0.5),
    "lfha": (0.01, 1.0),
    "lfla": (0.01, 0.5),
}

# Fixed tie-break order when several neighbors are equally close to the goal.
_DIRECTION_ORDER = (Heading.NORTH, Heading.EAST, Heading.SOUTH, Heading.WEST)


@dataclass(frozen=True)
class OracleConfig:
    frequency: float = 0.05  # chance per environment step of emitting advice
    accuracy: float = 1.0  # chance the emitted direction is the optimal one
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.frequency <= 1.0:
            raise ValueError("frequency must be in [0, 1]")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")

    @classmethod
    def from_condition(cls, condition: str, seed: int = 0) -> "OracleConfig":
        if condition not in CONDITIONS:
            raise ValueError(f"unknown oracle condition {condition!r}")
        frequency, accuracy = CONDITIONS[condition]
        return cls(frequency=frequency, accuracy=accuracy, seed=seed)


@dataclass(frozen=True)
class PolicyField:
    """Optimal movement direction toward the goal for every traversable cell.

    The goal cell and cells that cannot reach the goal carry ``None``.
    """

    directions: dict[tuple[int, int], Heading | None]
    distances: dict[tuple[int, int], int]

    def direction_at(self, x: int, y: int) -> Heading | None:
        return self.directions.get((x, y))

    def distance_at(self, x: int, y: int) -> int | None:
        return self.distances.get((x, y))


def compute_policy_field(gmap: GridMap) -> PolicyField:
    """Reverse BFS from the goal; ties break north, east, south, west."""
    dist = bfs_distances(gmap, gmap.goal)
    directions: dict[tuple[int, int], Heading | None] = {}
    for cell in gmap.traversable_cells():
        d = dist.get(cell)
        if d is None or d == 0:
            directions[cell] = None
            continue
        x, y = cell
        for heading in _DIRECTION_ORDER:
            dx, dy = heading.vector
            if dist.get((x + dx, y + dy)) == d - 1:
                directions[cell] = heading
                break
    return PolicyField(directions=directions, distances=dist)


def advise(
    field: PolicyField,
    pose: AgentPose,
    cfg: OracleConfig,
    rng: np.random.Generator,
    step: int = 0,
) -> AdviceEvent | None:
    """At most one advice per call: emitted with probability ``frequency``.

    An emitted direction is optimal with probability ``accuracy``; otherwise
    it is uniform over the four cardinals (and may still be optimal by
    chance). No advice at the goal or on cells that cannot reach it.
    """
    optimal = field.direction_at(pose.x, pose.y)
    if optimal is None:
        return None
    if rng.random() >= cfg.frequency:
        return None
    if rng.random() < cfg.accuracy:
        direction = optimal
    else:
        direction = Heading(int(rng.integers(4)))
    return AdviceEvent(direction=direction, issued_at=step, source="oracle")
