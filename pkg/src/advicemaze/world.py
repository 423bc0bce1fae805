"""Grid-maze world model: map loading, agent kinematics, rewards, episodes.

Coordinates: ``x`` is the column (west -> east), ``y`` is the row
(north -> south), matching the row order of the ASCII map format.
Action indices are fixed: 0=forward, 1=turn_left, 2=turn_right, 3=turn_around.
"""
from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

STEP_COST = -0.5
MILESTONE_BONUS = 1500.0
GOAL_BONUS = 15000.0


class WorldError(Exception):
    """Base class for world-model errors."""


class MapParseError(WorldError):
    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class MapValidationError(WorldError):
    """A structurally well-formed map violates a world invariant."""


class EpisodeTerminated(WorldError):
    """Raised when ``step`` is called on a finished episode."""


class CellKind(IntEnum):
    FLOOR = 0
    WALL = 1
    HEDGE = 2
    BUILDING_RED = 3
    BUILDING_GREEN = 4
    BUILDING_BLUE = 5
    GOAL = 6


# Cells the agent may occupy. The goal cell is walkable: stepping onto it
# ends the episode. Every non-floor kind is opaque to the renderer.
TRAVERSABLE = frozenset({CellKind.FLOOR, CellKind.GOAL})

CHAR_TO_KIND = {
    ".": CellKind.FLOOR,
    "S": CellKind.FLOOR,
    "#": CellKind.WALL,
    "H": CellKind.HEDGE,
    "R": CellKind.BUILDING_RED,
    "G": CellKind.BUILDING_GREEN,
    "B": CellKind.BUILDING_BLUE,
    "N": CellKind.GOAL,
}
KIND_TO_CHAR = {
    CellKind.FLOOR: ".",
    CellKind.WALL: "#",
    CellKind.HEDGE: "H",
    CellKind.BUILDING_RED: "R",
    CellKind.BUILDING_GREEN: "G",
    CellKind.BUILDING_BLUE: "B",
    CellKind.GOAL: "N",
}


class Heading(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    @property
    def vector(self) -> tuple[int, int]:
        return _HEADING_VECTORS[self]

    def turned_left(self) -> "Heading":
        return Heading((self - 1) % 4)

    def turned_right(self) -> "Heading":
        return Heading((self + 1) % 4)

    def turned_around(self) -> "Heading":
        return Heading((self + 2) % 4)


_HEADING_VECTORS = {
    Heading.NORTH: (0, -1),
    Heading.EAST: (1, 0),
    Heading.SOUTH: (0, 1),
    Heading.WEST: (-1, 0),
}


class Action(IntEnum):
    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    TURN_AROUND = 3


@dataclass(frozen=True)
class AgentPose:
    x: int
    y: int
    heading: Heading


@dataclass(frozen=True)
class Milestone:
    """One-shot bonus line crossed along ``axis`` in the ``sign`` direction.

    Freshly loaded maps always use axis='x', sign=+1; rotation remaps the
    line onto the other axis so the bonus keeps its task meaning.
    """

    label: str  # "entry" or "exit"
    axis: str  # "x" or "y"
    sign: int  # +1: fires at coord >= threshold, -1: at coord <= threshold
    threshold: int

    def reached(self, x: int, y: int) -> bool:
        coord = x if self.axis == "x" else y
        return coord >= self.threshold if self.sign > 0 else coord <= self.threshold


@dataclass(frozen=True)
class GridMap:
    """Immutable maze layout. Safe to share across threads after load."""

    width: int
    height: int
    cells: np.ndarray  # (height, width) of CellKind values, read-only
    spawn: AgentPose
    goal: tuple[int, int]
    milestone_entry: Milestone
    milestone_exit: Milestone

    def kind(self, x: int, y: int) -> CellKind:
        return CellKind(int(self.cells[y, x]))

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_traversable(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.kind(x, y) in TRAVERSABLE

    def is_opaque(self, x: int, y: int) -> bool:
        """Whether a view ray stops at this cell (any non-floor kind)."""
        return not self.in_bounds(x, y) or self.kind(x, y) != CellKind.FLOOR

    def traversable_cells(self) -> list[tuple[int, int]]:
        ys, xs = np.nonzero(np.isin(self.cells, [int(k) for k in TRAVERSABLE]))
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    @property
    def milestone_x_entry(self) -> int:
        return self.milestone_entry.threshold

    @property
    def milestone_x_exit(self) -> int:
        return self.milestone_exit.threshold

    def rows(self) -> list[str]:
        """Legend-character rows, with the spawn cell marked ``S``."""
        out = []
        for y in range(self.height):
            chars = [KIND_TO_CHAR[self.kind(x, y)] for x in range(self.width)]
            if y == self.spawn.y:
                chars[self.spawn.x] = "S"
            out.append("".join(chars))
        return out

    @property
    def digest(self) -> str:
        payload = json.dumps(
            {
                "rows": self.rows(),
                "spawn": [self.spawn.x, self.spawn.y, int(self.spawn.heading)],
                "milestones": [
                    [m.label, m.axis, m.sign, m.threshold]
                    for m in (self.milestone_entry, self.milestone_exit)
                ],
            },
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EpisodeConfig:
    max_actions: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.max_actions <= 0:
            raise ValueError("max_actions must be positive")


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    new_pose: AgentPose
    terminal: bool
    milestone_fired: str | None = None  # "entry" | "exit" | "goal"


def _freeze(cells: np.ndarray) -> np.ndarray:
    cells = np.asarray(cells, dtype=np.int8)
    cells.setflags(write=False)
    return cells


def load_map(text: str) -> GridMap:
    """Parse the ASCII map format into a validated :class:`GridMap`.

    Format: four header lines ``width=``, ``height=``, ``milestone_entry_x=``,
    ``milestone_exit_x=`` followed by ``height`` rows of ``width`` legend
    characters. The spawn cell ``S`` faces east.
    """
    lines = text.splitlines()
    header: dict[str, int] = {}
    keys = ("width", "height", "milestone_entry_x", "milestone_exit_x")
    idx = 0
    lineno = 0
    for key in keys:
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise MapParseError(f"missing header '{key}='", len(lines))
        lineno = idx + 1
        raw = lines[idx].strip()
        name, sep, value = raw.partition("=")
        if not sep or name.strip() != key:
            raise MapParseError(f"expected header '{key}=', got {raw!r}", lineno)
        try:
            header[key] = int(value.strip())
        except ValueError:
            raise MapParseError(f"header '{key}' is not an integer", lineno) from None
        idx += 1

    width, height = header["width"], header["height"]
    if width < 4 or height < 4:
        raise MapValidationError(f"map must be at least 4x4, got {width}x{height}")

    grid = np.zeros((height, width), dtype=np.int8)
    spawns: list[tuple[int, int]] = []
    goals: list[tuple[int, int]] = []
    row = 0
    while row < height:
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise MapParseError(f"expected {height} grid rows, found {row}", len(lines))
        lineno = idx + 1
        line = lines[idx].rstrip()
        if len(line) != width:
            raise MapParseError(
                f"row has {len(line)} cells, expected {width}", lineno, len(line) + 1
            )
        for col, ch in enumerate(line):
            kind = CHAR_TO_KIND.get(ch)
            if kind is None:
                raise MapParseError(f"unknown cell character {ch!r}", lineno, col + 1)
            grid[row, col] = int(kind)
            if ch == "S":
                spawns.append((col, row))
            elif ch == "N":
                goals.append((col, row))
        idx += 1
        row += 1

    if len(spawns) != 1:
        raise MapValidationError(f"expected exactly one spawn cell, found {len(spawns)}")
    if len(goals) != 1:
        raise MapValidationError(f"expected exactly one goal cell, found {len(goals)}")

    gmap = GridMap(
        width=width,
        height=height,
        cells=_freeze(grid),
        spawn=AgentPose(spawns[0][0], spawns[0][1], Heading.EAST),
        goal=goals[0],
        milestone_entry=Milestone("entry", "x", 1, header["milestone_entry_x"]),
        milestone_exit=Milestone("exit", "x", 1, header["milestone_exit_x"]),
    )
    validate_map(gmap)
    return gmap


def load_map_file(path) -> GridMap:
    with open(path, "r", encoding="utf-8") as fh:
        return load_map(fh.read())


def validate_map(gmap: GridMap) -> None:
    """Check every GridMap invariant; raise :class:`MapValidationError` if broken."""
    if gmap.width < 4 or gmap.height < 4:
        raise MapValidationError("map smaller than 4x4")
    goals = np.argwhere(gmap.cells == int(CellKind.GOAL))
    if len(goals) != 1:
        raise MapValidationError(f"expected exactly one goal cell, found {len(goals)}")
    if not gmap.is_traversable(gmap.spawn.x, gmap.spawn.y):
        raise MapValidationError("spawn cell is not traversable")
    if not gmap.is_traversable(*gmap.goal):
        raise MapValidationError("goal cell is not traversable")
    entry, exit_ = gmap.milestone_entry, gmap.milestone_exit
    if entry.axis != exit_.axis or entry.sign != exit_.sign:
        raise MapValidationError("milestones must share an axis and direction")
    extent = gmap.width if entry.axis == "x" else gmap.height
    for m in (entry, exit_):
        if not 0 <= m.threshold < extent:
            raise MapValidationError(f"milestone {m.label} threshold out of bounds")
    if entry.sign > 0 and not entry.threshold < exit_.threshold:
        raise MapValidationError("milestone entry must precede exit")
    if entry.sign < 0 and not entry.threshold > exit_.threshold:
        raise MapValidationError("milestone entry must precede exit")
    if shortest_path_length(gmap, (gmap.spawn.x, gmap.spawn.y), gmap.goal) is None:
        raise MapValidationError("goal unreachable from spawn")


def serialize_map(gmap: GridMap) -> str:
    """Inverse of :func:`load_map` for maps whose milestones lie on the x axis."""
    if gmap.milestone_entry.axis != "x" or gmap.milestone_entry.sign != 1:
        raise ValueError("only x-axis increasing milestones are serializable")
    lines = [
        f"width={gmap.width}",
        f"height={gmap.height}",
        f"milestone_entry_x={gmap.milestone_x_entry}",
        f"milestone_exit_x={gmap.milestone_x_exit}",
    ]
    lines.extend(gmap.rows())
    return "\n".join(lines) + "\n"


def bfs_distances(gmap: GridMap, start: tuple[int, int]) -> dict[tuple[int, int], int]:
    """4-connected BFS distance from ``start`` to every reachable traversable cell."""
    if not gmap.is_traversable(*start):
        raise ValueError(f"start cell {start} is not traversable")
    dist = {start: 0}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            nxt = (x + dx, y + dy)
            if nxt not in dist and gmap.is_traversable(*nxt):
                dist[nxt] = dist[(x, y)] + 1
                queue.append(nxt)
    return dist


def shortest_path_length(
    gmap: GridMap, start: tuple[int, int], goal: tuple[int, int]
) -> int | None:
    """BFS step count between two traversable cells, or None when unreachable."""
    if not gmap.is_traversable(*start):
        raise ValueError(f"start cell {start} is not traversable")
    if not gmap.is_traversable(*goal):
        raise ValueError(f"goal cell {goal} is not traversable")
    return bfs_distances(gmap, start).get(goal)


_HEADING_CLOCKWISE = {
    Heading.NORTH: Heading.EAST,
    Heading.EAST: Heading.SOUTH,
    Heading.SOUTH: Heading.WEST,
    Heading.WEST: Heading.NORTH,
}


def _rotate_milestone(m: Milestone, height: int) -> Milestone:
    # Under a clockwise turn (x, y) -> (height-1-y, x): an x-line keeps its
    # threshold on the new y axis; a y-line flips direction on the new x axis.
    if m.axis == "x":
        return replace(m, axis="y")
    return replace(m, axis="x", sign=-m.sign, threshold=height - 1 - m.threshold)


def rotate_map_90(gmap: GridMap) -> GridMap:
    """Clockwise quarter-turn of the whole task: cells, spawn, goal, milestones."""
    cells = np.rot90(gmap.cells, k=-1).copy()
    h = gmap.height

    def rot_point(x: int, y: int) -> tuple[int, int]:
        return h - 1 - y, x

    sx, sy = rot_point(gmap.spawn.x, gmap.spawn.y)
    rotated = GridMap(
        width=gmap.height,
        height=gmap.width,
        cells=_freeze(cells),
        spawn=AgentPose(sx, sy, _HEADING_CLOCKWISE[gmap.spawn.heading]),
        goal=rot_point(*gmap.goal),
        milestone_entry=_rotate_milestone(gmap.milestone_entry, h),
        milestone_exit=_rotate_milestone(gmap.milestone_exit, h),
    )
    validate_map(rotated)
    return rotated


class MazeEnv:
    """Single-episode world state machine around an immutable :class:`GridMap`.

    Deterministic: identical (map, action sequence) produces an identical
    outcome trace. Blocked forward moves keep the pose and still cost a step.
    """

    def __init__(self, gmap: GridMap, cfg: EpisodeConfig | None = None):
        self.map = gmap
        self.cfg = cfg or EpisodeConfig()
        self.reset()

    def reset(self) -> AgentPose:
        self.pose = self.map.spawn
        self.steps = 0
        self.score = 0.0
        self.terminal = False
        self._fired: set[str] = set()
        return self.pose

    def step(self, action: Action) -> StepOutcome:
        if self.terminal:
            raise EpisodeTerminated("step() called on a terminated episode")
        x, y, heading = self.pose.x, self.pose.y, self.pose.heading
        if action == Action.TURN_LEFT:
            heading = heading.turned_left()
        elif action == Action.TURN_RIGHT:
            heading = heading.turned_right()
        elif action == Action.TURN_AROUND:
            heading = heading.turned_around()
        elif action == Action.FORWARD:
            dx, dy = heading.vector
            if self.map.is_traversable(x + dx, y + dy):
                x, y = x + dx, y + dy
        else:
            raise ValueError(f"unknown action {action!r}")

        self.pose = AgentPose(x, y, heading)
        self.steps += 1
        reward = STEP_COST
        fired: str | None = None
        for m in (self.map.milestone_entry, self.map.milestone_exit):
            if m.label not in self._fired and m.reached(x, y):
                self._fired.add(m.label)
                reward += MILESTONE_BONUS
                fired = m.label
        if (x, y) == self.map.goal:
            reward += GOAL_BONUS
            fired = "goal"
            self.terminal = True
        if self.steps >= self.cfg.max_actions:
            self.terminal = True
        self.score += reward
        return StepOutcome(reward=reward, new_pose=self.pose, terminal=self.terminal, milestone_fired=fired)

    @property
    def reached_goal(self) -> bool:
        return (self.pose.x, self.pose.y) == self.map.goal

    @property
    def milestones_fired(self) -> frozenset[str]:
        return frozenset(self._fired)
