"""First-person grayscale observations via column raycasting.

One ray per image column over a fixed horizontal field of view; the first
non-floor cell hit paints a wall slice whose height falls with perpendicular
distance. Texture choice is the knob that controls perceptual aliasing:
the aliased palette paints every solid surface identically, the landmarked
palette gives buildings and the goal distinct intensity bands.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .world import AgentPose, CellKind, GridMap, Heading

SKY_INTENSITY = 0.08
FLOOR_INTENSITY = 0.30
_STRIPE_DARK = 0.40
_STRIPE_LIGHT = 0.55
_LANDMARK_INTENSITY = {
    CellKind.BUILDING_RED: 0.95,
    CellKind.BUILDING_GREEN: 0.80,
    CellKind.BUILDING_BLUE: 0.65,
    CellKind.GOAL: 1.00,
}


@dataclass(frozen=True)
class RenderConfig:
    width: int = 32
    height: int = 32
    fov_degrees: float = 90.0


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    intensities: np.ndarray  # (height, width), values in [0, 1]

    def to_bytes(self) -> bytes:
        return (np.clip(self.intensities, 0.0, 1.0) * 255).astype(np.uint8).tobytes()


@dataclass(frozen=True)
class TexturePalette:
    """Per-cell-kind shading as a function of surface coordinate and distance."""

    mode: str  # "aliased" | "landmarked"

    @classmethod
    def aliased(cls) -> "TexturePalette":
        return cls(mode="aliased")

    @classmethod
    def landmarked(cls) -> "TexturePalette":
        return cls(mode="landmarked")

    @classmethod
    def from_name(cls, name: str) -> "TexturePalette":
        if name not in ("aliased", "landmarked"):
            raise ValueError(f"unknown palette {name!r}")
        return cls(mode=name)

    def shade(self, kind: CellKind, u: float, dist: float) -> float:
        if self.mode == "landmarked" and kind in _LANDMARK_INTENSITY:
            base = _LANDMARK_INTENSITY[kind]
        else:
            # Repeating stripe texture, identical on every surface; a local
            # function of the hit point so equal wall geometry renders equal.
            base = _STRIPE_LIGHT if int(u * 4.0) % 2 == 0 else _STRIPE_DARK
        return base * _attenuation(dist)


def _attenuation(dist: float) -> float:
    return 1.0 / (1.0 + 0.12 * max(dist, 0.0))


def slice_height(dist: float, image_height: int) -> int:
    """Wall slice height in pixels; non-increasing in perpendicular distance."""
    return int(image_height / max(dist, 1e-6))


def _cast_ray(
    gmap: GridMap, px: float, py: float, rx: float, ry: float
) -> tuple[CellKind, float, float]:
    """DDA grid walk from (px, py) along (rx, ry) to the first opaque cell.

    Returns (cell kind, perpendicular distance, surface coordinate in [0, 1)).
    """
    mx, my = int(px), int(py)
    delta_x = abs(1.0 / rx) if rx != 0.0 else math.inf
    delta_y = abs(1.0 / ry) if ry != 0.0 else math.inf
    if rx < 0.0:
        step_x, side_x = -1, (px - mx) * delta_x
    else:
        step_x, side_x = 1, (mx + 1.0 - px) * delta_x
    if ry < 0.0:
        step_y, side_y = -1, (py - my) * delta_y
    else:
        step_y, side_y = 1, (my + 1.0 - py) * delta_y

    side = 0
    for _ in range(4 * (gmap.width + gmap.height)):
        if side_x < side_y:
            side_x += delta_x
            mx += step_x
            side = 0
        else:
            side_y += delta_y
            my += step_y
            side = 1
        if gmap.is_opaque(mx, my):
            break

    if side == 0:
        perp = side_x - delta_x
        hit = py + perp * ry
    else:
        perp = side_y - delta_y
        hit = px + perp * rx
    kind = gmap.kind(mx, my) if gmap.in_bounds(mx, my) else CellKind.WALL
    return kind, max(perp, 1e-9), hit - math.floor(hit)


def render(
    gmap: GridMap,
    pose: AgentPose,
    palette: TexturePalette,
    cfg: RenderConfig = RenderConfig(),
) -> Frame:
    """Deterministic first-person frame for a pose; pure in all arguments."""
    w, h = cfg.width, cfg.height
    dx, dy = pose.heading.vector
    half_fov = math.tan(math.radians(cfg.fov_degrees) / 2.0)
    plane_x, plane_y = -dy * half_fov, dx * half_fov
    px, py = pose.x + 0.5, pose.y + 0.5
    horizon = h // 2

    img = np.empty((h, w), dtype=np.float64)
    img[:horizon, :] = SKY_INTENSITY
    img[horizon:, :] = FLOOR_INTENSITY
    for col in range(w):
        cam = 2.0 * (col + 0.5) / w - 1.0
        kind, dist, u = _cast_ray(gmap, px, py, dx + plane_x * cam, dy + plane_y * cam)
        line = slice_height(dist, h)
        top = max(0, (h - line) // 2)
        bottom = min(h, (h + line) // 2)
        img[top:bottom, col] = palette.shade(kind, u, dist)
    return Frame(width=w, height=h, intensities=np.clip(img, 0.0, 1.0))


class FrameStack:
    """Most-recent-first ring of frames; short stacks pad with the oldest frame."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._frames: deque[Frame] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._frames)

    def clear(self) -> None:
        self._frames.clear()

    def push(self, frame: Frame) -> None:
        if self._frames:
            first = self._frames[0]
            if (frame.width, frame.height) != (first.width, first.height):
                raise ValueError(
                    f"frame is {frame.width}x{frame.height}, "
                    f"stack holds {first.width}x{first.height}"
                )
        self._frames.appendleft(frame)

    def observation(self) -> np.ndarray:
        """(capacity, height, width) tensor, newest frame at index 0."""
        if not self._frames:
            raise ValueError("cannot stack an empty FrameStack")
        layers = [f.intensities for f in self._frames]
        oldest = layers[-1]
        layers.extend([oldest] * (self.capacity - len(layers)))
        return np.stack(layers, axis=0)


def push_and_stack(stack: FrameStack, frame: Frame) -> np.ndarray:
    stack.push(frame)
    return stack.observation()


class FrameCache:
    """Memoizes frames per pose for one (map, palette, config) triple.

    Rendering is pure, so reuse across an episode loop is safe and cheap;
    a map has at most 4 * traversable-cells distinct views.
    """

    def __init__(self, gmap: GridMap, palette: TexturePalette, cfg: RenderConfig):
        self.gmap = gmap
        self.palette = palette
        self.cfg = cfg
        self._frames: dict[tuple[int, int, int], Frame] = {}

    def frame(self, pose: AgentPose) -> Frame:
        key = (pose.x, pose.y, int(pose.heading))
        hit = self._frames.get(key)
        if hit is None:
            hit = render(self.gmap, pose, self.palette, self.cfg)
            self._frames[key] = hit
        return hit


def all_state_frames(
    gmap: GridMap, palette: TexturePalette, cfg: RenderConfig = RenderConfig()
) -> np.ndarray:
    """Render every (traversable cell, heading) state; rows are flat frames."""
    states = [
        AgentPose(x, y, h) for (x, y) in gmap.traversable_cells() for h in Heading
    ]
    out = np.empty((len(states), cfg.height * cfg.width), dtype=np.float64)
    for i, pose in enumerate(states):
        out[i] = render(gmap, pose, palette, cfg).intensities.ravel()
    return out


def aliasing_index(
    gmap: GridMap,
    palette: TexturePalette,
    cfg: RenderConfig = RenderConfig(),
    threshold: float = 0.02,
) -> float:
    """Fraction of distinct state pairs whose views are near-identical.

    Two states alias when the mean absolute pixel difference of their frames
    falls below ``threshold``. Ranges over ordered pairs, but the measure is
    symmetric so unordered counting gives the same value.
    """
    frames = all_state_frames(gmap, palette, cfg)
    n = frames.shape[0]
    if n < 2:
        return 1.0
    close = 0
    for i in range(n - 1):
        mad = np.abs(frames[i + 1 :] - frames[i]).mean(axis=1)
        close += int((mad < threshold).sum())
    return close / (n * (n - 1) / 2)


def write_pgm(frame: Frame, path) -> None:
    """Export a frame as binary PGM (P5), 8 bits per pixel."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.width} {frame.height}\n255\n".encode())
        fh.write(frame.to_bytes())
