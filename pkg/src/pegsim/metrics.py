"""Trajectory and training accounting: travel length, completion time,
reduction percentages, and training-curve summaries.

Travel length sums commanded motion inside contiguous manual segments
only: the operator's device is idle while the coarse controller drives,
and the between-legs teleport is a task reset, not operator motion, so
distances never accrue across segment boundaries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "IncompleteTrialError",
    "Sample",
    "TrainingCurve",
    "TrainingSummary",
    "TrialMode",
    "TrialRecord",
    "completion_time",
    "concatenate",
    "format_table",
    "reduction",
    "summarize_training",
    "travel_length",
]


class IncompleteTrialError(ValueError):
    """Raised when a computation requires a completed trial."""


class TrialMode(enum.Enum):
    MANUAL = "manual"
    SEMI_AUTONOMOUS = "semi"


@dataclass(frozen=True)
class Sample:
    """One operator-commanded position, tagged with its motion segment."""

    t_ms: float
    x: float
    y: float
    z: float
    segment: int = 0


@dataclass
class TrialRecord:
    mode: TrialMode
    samples: list[Sample] = field(default_factory=list)
    leg_markers: list[int] = field(default_factory=list)
    completion_ms: float | None = None

    @property
    def completed(self) -> bool:
        return self.completion_ms is not None and bool(self.leg_markers)


def travel_length(record: TrialRecord) -> float:
    """Cumulative Euclidean path length of commanded positions, in mm."""
    if not record.samples:
        raise ValueError("travel length needs at least one sample")
    total = 0.0
    prev = record.samples[0]
    for s in record.samples[1:]:
        if s.segment == prev.segment:
            total += math.dist((prev.x, prev.y, prev.z), (s.x, s.y, s.z))
        prev = s
    return total


def completion_time(record: TrialRecord) -> float:
    """Trial duration in seconds; refuses incomplete trials."""
    if not record.completed:
        raise IncompleteTrialError("trial has no completed legs")
    if not record.samples:
        raise IncompleteTrialError("trial carries no samples")
    return (record.samples[-1].t_ms - record.samples[0].t_ms) / 1000.0


def reduction(manual: float, assisted: float) -> float:
    """Percentage reduction of `assisted` relative to `manual`."""
    if manual <= 0:
        raise ValueError("manual baseline must be positive")
    return 100.0 * (manual - assisted) / manual


def concatenate(records: list[TrialRecord]) -> TrialRecord:
    """Join trials end to end, keeping segments distinct across the seam."""
    if not records:
        raise ValueError("nothing to concatenate")
    mode = records[0].mode
    out = TrialRecord(mode=mode)
    t_offset = 0.0
    seg_offset = 0
    tick_offset = 0
    for rec in records:
        if rec.mode is not mode:
            raise ValueError("cannot concatenate trials of different modes")
        max_seg = 0
        for s in rec.samples:
            out.samples.append(Sample(
                t_ms=s.t_ms + t_offset, x=s.x, y=s.y, z=s.z,
                segment=s.segment + seg_offset,
            ))
            max_seg = max(max_seg, s.segment)
        out.leg_markers.extend(m + tick_offset for m in rec.leg_markers)
        if rec.samples:
            t_offset = out.samples[-1].t_ms
        seg_offset += max_seg + 1
        if rec.leg_markers:
            tick_offset = out.leg_markers[-1]
    last = records[-1]
    if last.completion_ms is not None:
        out.completion_ms = out.samples[-1].t_ms if out.samples else None
    return out


@dataclass(frozen=True)
class TrainingCurve:
    returns: tuple[float, ...]
    lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.returns) != len(self.lengths):
            raise ValueError("returns and lengths must align")
        if any(length <= 0 for length in self.lengths):
            raise ValueError("episode lengths must be positive")


@dataclass(frozen=True)
class TrainingSummary:
    ma_return: tuple[float, ...]
    ma_length: tuple[float, ...]
    convergence_episode: int
    final_return: float
    final_length: float


def _moving_average(values, window: int) -> list[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        if i >= window - 1:
            out.append(acc / window)
    return out


def summarize_training(curve: TrainingCurve, window: int) -> TrainingSummary:
    """Moving averages plus the convergence episode.

    Convergence is the first episode from which every defined moving
    average of episode length stays within +-20% of its final value.
    """
    n = len(curve.lengths)
    if window <= 0 or window > n:
        raise ValueError("window must lie in [1, episode count]")
    ma_r = _moving_average(curve.returns, window)
    ma_l = _moving_average(curve.lengths, window)
    final = ma_l[-1]
    band = 0.2 * abs(final)
    convergence = n
    # moving average i covers episodes [i+1 .. i+window] (1-based).
    for i in range(len(ma_l) - 1, -1, -1):
        if abs(ma_l[i] - final) > band:
            break
        convergence = i + 1
    return TrainingSummary(
        ma_return=tuple(ma_r),
        ma_length=tuple(ma_l),
        convergence_episode=convergence,
        final_return=ma_r[-1],
        final_length=final,
    )


def format_table(manual_m: float, manual_t: float,
                 semi_m: float, semi_t: float) -> str:
    """Plain-text summary table plus machine-readable key/value lines."""
    lines = [
        f"{'':12s}{'Manual':>12s}{'Semi-autonomous':>18s}",
        f"{'M (mm)':12s}{manual_m:>12.1f}{semi_m:>18.1f}",
        f"{'T (s)':12s}{manual_t:>12.1f}{semi_t:>18.1f}",
        "",
        f"travel_reduction_pct={reduction(manual_m, semi_m)!r}",
        f"time_reduction_pct={reduction(manual_t, semi_t)!r}",
        f"manual_m_mm={manual_m!r}",
        f"manual_t_s={manual_t!r}",
        f"semi_m_mm={semi_m!r}",
        f"semi_t_s={semi_t!r}",
    ]
    return "\n".join(lines)
