"""Degrade ground-truth tracking into broadcast-like discrete frames.

Frames are sampled on a fixed period anchored at zero, the first and last
``trim_frames`` sampled frames are discarded, and each sampled frame keeps
only the players within the visibility radius of the ball (inclusive).
Sampled frames snap to the nearest native frame, so every visible position is
an exact copy of ground truth; identities are erased.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

from .geometry import ObservationFrame
from .ingest import SOURCE_SIMULATED, DiscreteMatchRecord, MatchHalf

_TOL = 1e-9


@dataclass(frozen=True)
class DegradeConfig:
    sample_period: float = 1.0
    visibility_radius: float = 30.0
    trim_frames: int = 30

    def __post_init__(self):
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.visibility_radius <= 0:
            raise ValueError("visibility_radius must be positive")
        if self.trim_frames < 0:
            raise ValueError("trim_frames must be non-negative")


def ground_truth_at(half: MatchHalf, t: float) -> ObservationFrame:
    """The native frame nearest to ``t`` (ties go to the earlier frame).

    Valid for any time from the start of the half (zero) up to the last
    native frame; times below the first frame snap forward to it.
    """
    times = half.frame_times()
    if not times or t < -_TOL or t > times[-1] + _TOL:
        raise ValueError(f"time {t} outside half span [0, {times[-1] if times else 0}]")
    i = bisect_left(times, t)
    if i == 0:
        return half.frames[0]
    if i == len(times):
        return half.frames[-1]
    before, after = times[i - 1], times[i]
    return half.frames[i - 1] if t - before <= after - t else half.frames[i]


def degrade(half: MatchHalf, cfg: DegradeConfig) -> DiscreteMatchRecord:
    """Sample, trim, and restrict visibility to within radius of the ball."""
    if not half.frames:
        raise ValueError("cannot degrade an empty half")
    t_first, t_last = half.span
    if t_last - t_first <= 2 * cfg.trim_frames * cfg.sample_period:
        raise ValueError(
            f"half too short: span {t_last - t_first:.1f}s cannot absorb "
            f"2x{cfg.trim_frames} trimmed frames at {cfg.sample_period}s"
        )
    k_start = max(cfg.trim_frames, math.ceil(t_first / cfg.sample_period - _TOL))
    k_end = math.floor((t_last - cfg.trim_frames * cfg.sample_period) / cfg.sample_period + _TOL)
    frames = []
    for k in range(k_start, k_end + 1):
        t = k * cfg.sample_period
        native = ground_truth_at(half, t)
        visible = tuple(
            (tag, pos)
            for tag, pos in native.visible
            if pos.distance_to(native.ball) <= cfg.visibility_radius
        )
        frames.append(ObservationFrame(time=t, ball=native.ball, visible=visible))
    return DiscreteMatchRecord(
        half_id=half.half_id,
        frames=frames,
        source=SOURCE_SIMULATED,
        defends_left=dict(half.defends_left),
    )


@dataclass(frozen=True)
class DegradeStats:
    n_frames: int
    mean_visible_outfield: float
    n_predictions: int  # hidden outfielder slots summed over frames


def degrade_stats(record: DiscreteMatchRecord, outfield_total: int = 20) -> DegradeStats:
    n_frames = len(record.frames)
    visible = [
        sum(1 for tag, _ in fr.visible if not tag.is_goalkeeper) for fr in record.frames
    ]
    total_visible = sum(visible)
    return DegradeStats(
        n_frames=n_frames,
        mean_visible_outfield=total_visible / n_frames if n_frames else 0.0,
        n_predictions=outfield_total * n_frames - total_visible,
    )
