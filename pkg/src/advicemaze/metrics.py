"""Experiment records and analysis: learning curves, heatmaps, KL divergence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import GOAL_BONUS, MILESTONE_BONUS, STEP_COST, GridMap

CSV_HEADER = "session,episode,score,steps,advice_offered,advice_used,reached_goal"


@dataclass(frozen=True)
class EpisodeRecord:
    session: int
    episode: int  # 1-based within a session
    score: float
    steps: int
    advice_offered: int
    advice_used: int
    reached_goal: bool

    def __post_init__(self):
        if self.advice_used > self.advice_offered:
            raise ValueError("advice_used cannot exceed advice_offered")

    def csv_row(self) -> str:
        return (
            f"{self.session},{self.episode},{self.score:.1f},{self.steps},"
            f"{self.advice_offered},{self.advice_used},{int(self.reached_goal)}"
        )


def parse_records(csv_text: str) -> list[EpisodeRecord]:
    lines = [ln for ln in csv_text.strip().splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("metrics CSV missing expected header")
    out = []
    for ln in lines[1:]:
        s, e, score, steps, off, used, goal = ln.split(",")
        out.append(
            EpisodeRecord(int(s), int(e), float(score), int(steps), int(off), int(used), bool(int(goal)))
        )
    return out


def records_to_csv(records: list[EpisodeRecord]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in records]) + "\n"


def expected_score(reached_goal: bool, entry: bool, exit_: bool, steps: int) -> float:
    return GOAL_BONUS * reached_goal + MILESTONE_BONUS * (entry + exit_) + STEP_COST * steps


class VisitHeatmap:
    """Per-cell visit counts accumulated over training steps."""

    def __init__(self, width: int, height: int, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((height, width), dtype=np.int64)
        if counts.shape != (height, width):
            raise ValueError(f"counts shape {counts.shape} != ({height}, {width})")
        self.width = width
        self.height = height
        self.counts = counts.astype(np.int64)

    @classmethod
    def for_map(cls, gmap: GridMap) -> "VisitHeatmap":
        return cls(gmap.width, gmap.height)

    def record(self, x: int, y: int) -> None:
        self.counts[y, x] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "VisitHeatmap") -> "VisitHeatmap":
        if (self.width, self.height) != (other.width, other.height):
            raise ValueError("heatmap dimensions differ")
        return VisitHeatmap(self.width, self.height, self.counts + other.counts)

    def to_csv(self) -> str:
        return "\n".join(",".join(str(int(v)) for v in row) for row in self.counts) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "VisitHeatmap":
        rows = [
            [int(v) for v in line.split(",")]
            for line in text.strip().splitlines()
            if line
        ]
        counts = np.array(rows, dtype=np.int64)
        return cls(counts.shape[1], counts.shape[0], counts)


def moving_average(series, window: int = 10) -> np.ndarray:
    """Trailing mean; early entries average over the partial window available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise ValueError("series is empty")
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(values.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out


def kl_divergence(p_counts, q_counts) -> float:
    """KL(P || Q) in nats between two count grids, add-one smoothed.

    Smoothing keeps every cell strictly positive, so the divergence is always
    finite; it is zero exactly when the smoothed distributions coincide.
    """
    p = np.asarray(getattr(p_counts, "counts", p_counts), dtype=np.float64)
    q = np.asarray(getattr(q_counts, "counts", q_counts), dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"heatmap shapes differ: {p.shape} vs {q.shape}")
    p = p + 1.0
    q = q + 1.0
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def episodes_to_stable_goal(records: list[EpisodeRecord], k: int = 3) -> int | None:
    """1-based episode starting the first run of k consecutive goal episodes."""
    streak = 0
    for i, rec in enumerate(records):
        streak = streak + 1 if rec.reached_goal else 0
        if streak >= k:
            return records[i - k + 1].episode
    return None


def censored_median(values: list[int | None], ceiling: int) -> float:
    """Median where None (never converged) counts as ceiling + 1."""
    filled = sorted(ceiling + 1 if v is None else v for v in values)
    n = len(filled)
    if n == 0:
        raise ValueError("no values")
    mid = n // 2
    if n % 2:
        return float(filled[mid])
    return (filled[mid - 1] + filled[mid]) / 2.0


def corridor_second_half_mass(heatmap: VisitHeatmap, gmap: GridMap) -> float:
    """Fraction of all visits falling in the far half of the corridor span."""
    entry, exit_ = gmap.milestone_entry, gmap.milestone_exit
    if entry.sign != 1:
        raise ValueError("corridor analysis expects increasing milestones")
    lo, hi = entry.threshold, exit_.threshold
    mid = (lo + hi) / 2.0
    total = heatmap.total
    if total == 0:
        return 0.0
    mass = 0
    for x, y in gmap.traversable_cells():
        coord = x if entry.axis == "x" else y
        if mid <= coord < hi:
            mass += int(heatmap.counts[y, x])
    return mass / total
