"""Error analysis against ground truth: matching, headline statistics, the
error-vs-occlusion curve, percentile example frames, and pitch drawings.

Estimates are compared to truth per team with a minimum-total-distance
bijection (goalkeepers are drawn in the figures but excluded from all error
statistics).  Queries run both in phase (at sampled-frame times, where
observed players score exactly zero) and out of phase (halfway between
frames).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assigner import solve_assignment
from .broadcast import ground_truth_at
from .geometry import (
    AWAY,
    HOME,
    EnrichedFrame,
    PitchPoint,
)
from .ingest import DiscreteMatchRecord, Event, MatchHalf
from .pipeline import PathSet, snapshot_at

logger = logging.getLogger(__name__)

IN_PHASE = "in_phase"
OUT_OF_PHASE = "out_of_phase"


class TruthMismatchError(ValueError):
    """Estimated and true team sizes disagree at a query time."""


@dataclass(frozen=True, slots=True)
class PlayerScore:
    team: str
    true_pos: PitchPoint
    est_pos: PitchPoint
    error_m: float
    provenance: str
    seconds_to_obs: float


@dataclass(frozen=True)
class FrameError:
    time: float
    phase: str
    scores: tuple[PlayerScore, ...]
    total_squared_error: float


def _match_team(
    est: list[tuple[int, PitchPoint]], truth: list[PitchPoint]
) -> list[tuple[int, PitchPoint, float]]:
    """Minimum-total-distance bijection; exact coincidences are pinned first.

    Pinning a zero-distance pair never breaks optimality (triangle
    inequality) and guarantees observed positions score exactly zero.
    """
    unused = list(range(len(truth)))
    pinned: list[tuple[int, PitchPoint, float]] = []
    remaining: list[tuple[int, PitchPoint]] = []
    for idx, pos in est:
        hit = next(
            (j for j in unused if truth[j].x == pos.x and truth[j].y == pos.y), None
        )
        if hit is not None:
            unused.remove(hit)
            pinned.append((idx, truth[hit], 0.0))
        else:
            remaining.append((idx, pos))
    if remaining:
        cost = np.empty((len(unused), len(remaining)))
        for i, j in enumerate(unused):
            for c, (_, pos) in enumerate(remaining):
                cost[i, c] = truth[j].distance_to(pos)
        for col, row in solve_assignment(cost).items():
            idx, pos = remaining[col]
            matched = truth[unused[row]]
            pinned.append((idx, matched, matched.distance_to(pos)))
    return pinned


def match_and_score(
    estimated: EnrichedFrame,
    truth_players: Sequence[tuple[str, PitchPoint]],
    *,
    ages: Sequence[float] | None = None,
    phase: str = IN_PHASE,
) -> FrameError:
    """Score one snapshot against the true outfield positions of both teams.

    ``truth_players`` holds (team, position) for outfielders only; goalkeeper
    entries in the snapshot are ignored.  ``ages`` aligns with
    ``estimated.players`` and defaults to zero.
    """
    indexed: list[tuple[int, PlayerScore]] = []
    ages_by_outfield: dict[int, float] = {}
    if ages is not None:
        pos = 0
        for team in (HOME, AWAY):
            for i, p in enumerate(estimated.players):
                if p.tag.team == team and not p.tag.is_goalkeeper:
                    ages_by_outfield[i] = ages[pos]
                    pos += 1
    for team in (HOME, AWAY):
        est = [
            (i, p.position)
            for i, p in enumerate(estimated.players)
            if p.tag.team == team and not p.tag.is_goalkeeper
        ]
        truth = [pos for tm, pos in truth_players if tm == team]
        if len(est) != len(truth):
            raise TruthMismatchError(
                f"team {team}: {len(est)} estimates vs {len(truth)} true positions"
            )
        for idx, true_pos, err in _match_team(est, truth):
            indexed.append(
                (
                    idx,
                    PlayerScore(
                        team=team,
                        true_pos=true_pos,
                        est_pos=estimated.players[idx].position,
                        error_m=err,
                        provenance=estimated.players[idx].provenance,
                        seconds_to_obs=ages_by_outfield.get(idx, 0.0),
                    ),
                )
            )
    # keep scores in the snapshot's player order so callers can walk them
    indexed.sort(key=lambda pair: pair[0])
    scores = [s for _, s in indexed]
    total_sq = sum(s.error_m**2 for s in scores)
    return FrameError(
        time=estimated.time, phase=phase, scores=tuple(scores), total_squared_error=total_sq
    )


# --- half evaluation ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PredictionRow:
    half_id: int
    time: float
    phase: str
    provenance: str
    error_m: float
    seconds_to_obs: float
    prev_frame_observed: bool
    at_event_frame: bool


@dataclass
class HalfResult:
    half_id: int
    frame_errors: list[FrameError]  # in-phase, time order
    rows: list[PredictionRow]
    n_frames: int


def _truth_outfield(half: MatchHalf, t: float) -> list[tuple[str, PitchPoint]]:
    native = ground_truth_at(half, t)
    return [(tag.team, pos) for tag, pos in native.visible if not tag.is_goalkeeper]


def event_frame_times(events: Sequence[Event], frame_times: Sequence[float]) -> set[float]:
    """The deduplicated in-phase frame times nearest to each event."""
    chosen: set[float] = set()
    if not frame_times:
        return chosen
    arr = list(frame_times)
    for ev in events:
        best = min(arr, key=lambda ft: (abs(ft - ev.time), ft))
        chosen.add(best)
    return chosen


def evaluate_half(
    record: DiscreteMatchRecord,
    paths: PathSet,
    truth: MatchHalf,
    events: Sequence[Event] | None = None,
) -> HalfResult:
    """Score every in-phase and out-of-phase query time of one half.

    Query times where the truth momentarily lacks ten outfielders per team
    (substitution transitions) are skipped; more than 1% of them failing
    indicates broken inputs and raises.
    """
    events = truth.events if events is None else events
    frame_times = [fr.time for fr in record.frames]
    ev_frames = event_frame_times(events, frame_times)

    frame_errors: list[FrameError] = []
    rows: list[PredictionRow] = []
    skipped: list[float] = []

    def score_at(t: float, phase: str, prev_time: float | None) -> FrameError:
        snapshot, ages = snapshot_at(paths, t)
        fe = match_and_score(
            snapshot, _truth_outfield(truth, t), ages=_outfield_ages(snapshot, ages), phase=phase
        )
        at_event = phase == IN_PHASE and t in ev_frames
        # scores align with the snapshot's outfield players in order
        idx = 0
        for team in (HOME, AWAY):
            for path in paths.outfield[team]:
                s = fe.scores[idx]
                rows.append(
                    PredictionRow(
                        half_id=record.half_id,
                        time=t,
                        phase=phase,
                        provenance=s.provenance,
                        error_m=s.error_m,
                        seconds_to_obs=s.seconds_to_obs,
                        prev_frame_observed=(
                            prev_time is not None
                            and path.trajectory.observed_at(prev_time)
                        ),
                        at_event_frame=at_event,
                    )
                )
                idx += 1
        return fe

    for i, t in enumerate(frame_times):
        try:
            frame_errors.append(score_at(t, IN_PHASE, None))
        except TruthMismatchError:
            skipped.append(t)
        if i + 1 < len(frame_times):
            mid = t + 0.5 * (frame_times[i + 1] - t)
            try:
                score_at(mid, OUT_OF_PHASE, t)
            except TruthMismatchError:
                skipped.append(mid)

    if skipped:
        logger.warning(
            "half %d: skipped %d query times without full truth (substitutions?)",
            record.half_id,
            len(skipped),
        )
        if len(skipped) > 0.01 * (2 * len(frame_times)):
            raise ValueError(
                f"half {record.half_id}: {len(skipped)} query times lacked a full "
                "set of true outfielders; inputs look inconsistent"
            )
    return HalfResult(
        half_id=record.half_id,
        frame_errors=frame_errors,
        rows=rows,
        n_frames=len(frame_times),
    )


def _outfield_ages(snapshot: EnrichedFrame, ages: Sequence[float]) -> list[float]:
    """Ages for outfielders in the order match_and_score walks them."""
    out = []
    for team in (HOME, AWAY):
        for p, age in zip(snapshot.players, ages):
            if p.tag.team == team and not p.tag.is_goalkeeper:
                out.append(age)
    return out


# --- aggregation -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CurveBucket:
    bucket_s: float
    mean_m: float
    p12_5: float
    p87_5: float
    p2_5: float
    p97_5: float
    n: int


@dataclass
class ErrorReport:
    mean_all_in_phase: float
    mean_offcam_in_phase: float
    median_offcam_in_phase: float
    mean_all_out_of_phase: float
    mean_prev_frame_observed: float
    mean_offcam_event_frames: float
    curve: list[CurveBucket]
    n_frames: int
    n_predictions: int
    per_half: dict[int, dict[str, float]] = field(default_factory=dict)


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def _headline(rows: list[PredictionRow]) -> dict[str, float]:
    in_all = [r.error_m for r in rows if r.phase == IN_PHASE]
    in_off = [r.error_m for r in rows if r.phase == IN_PHASE and r.provenance == "estimated"]
    out_all = [r.error_m for r in rows if r.phase == OUT_OF_PHASE]
    prev = [r.error_m for r in rows if r.phase == OUT_OF_PHASE and r.prev_frame_observed]
    ev_off = [
        r.error_m
        for r in rows
        if r.phase == IN_PHASE and r.provenance == "estimated" and r.at_event_frame
    ]
    return {
        "mean_all_in_phase_m": _mean(in_all),
        "mean_offcam_in_phase_m": _mean(in_off),
        "median_offcam_in_phase_m": float(np.median(in_off)) if in_off else math.nan,
        "mean_all_out_of_phase_m": _mean(out_all),
        "mean_prev_frame_observed_m": _mean(prev),
        "mean_offcam_event_frames_m": _mean(ev_off),
        "n_predictions": float(
            sum(1 for r in rows if r.phase == IN_PHASE and r.provenance == "estimated")
        ),
    }


def build_report(results: Sequence[HalfResult]) -> ErrorReport:
    """Pool all halves into one report; per-half figures ride along."""
    rows = [r for res in results for r in res.rows]
    pooled = _headline(rows)

    buckets: dict[float, list[float]] = {}
    for r in rows:
        if not math.isfinite(r.seconds_to_obs):
            continue  # trajectory never observed; no occlusion age to bucket
        key = round(r.seconds_to_obs * 2.0) / 2.0
        buckets.setdefault(key, []).append(r.error_m)
    curve = []
    for key in sorted(buckets):
        vals = np.asarray(buckets[key])
        curve.append(
            CurveBucket(
                bucket_s=key,
                mean_m=float(vals.mean()),
                p12_5=float(np.percentile(vals, 12.5)),
                p87_5=float(np.percentile(vals, 87.5)),
                p2_5=float(np.percentile(vals, 2.5)),
                p97_5=float(np.percentile(vals, 97.5)),
                n=int(len(vals)),
            )
        )

    return ErrorReport(
        mean_all_in_phase=pooled["mean_all_in_phase_m"],
        mean_offcam_in_phase=pooled["mean_offcam_in_phase_m"],
        median_offcam_in_phase=pooled["median_offcam_in_phase_m"],
        mean_all_out_of_phase=pooled["mean_all_out_of_phase_m"],
        mean_prev_frame_observed=pooled["mean_prev_frame_observed_m"],
        mean_offcam_event_frames=pooled["mean_offcam_event_frames_m"],
        curve=curve,
        n_frames=sum(res.n_frames for res in results),
        n_predictions=int(pooled["n_predictions"]),
        per_half={res.half_id: _headline(res.rows) for res in results},
    )


def percentile_frames(
    frame_errors: Sequence[FrameError], percentiles: Sequence[float] = (25, 50, 75, 95)
) -> list[tuple[float, FrameError]]:
    """For each percentile of total squared frame error, the first (in time)
    frame whose error is closest to that percentile value."""
    if len(frame_errors) < 100:
        raise ValueError(f"need at least 100 frames, got {len(frame_errors)}")
    ordered = sorted(frame_errors, key=lambda fe: fe.time)
    values = np.asarray([fe.total_squared_error for fe in ordered])
    out = []
    for pct in percentiles:
        target = float(np.percentile(values, pct))
        best = min(ordered, key=lambda fe: (abs(fe.total_squared_error - target), fe.time))
        out.append((pct, best))
    return out


# --- output files ------------------------------------------------------------


def _json_value(v):
    if isinstance(v, float):
        return None if math.isnan(v) else round(v, 4)
    return v


def write_report_json(report: ErrorReport, path: str | Path) -> None:
    import json

    doc = {
        "mean_all_in_phase_m": _json_value(report.mean_all_in_phase),
        "mean_offcam_in_phase_m": _json_value(report.mean_offcam_in_phase),
        "median_offcam_in_phase_m": _json_value(report.median_offcam_in_phase),
        "mean_all_out_of_phase_m": _json_value(report.mean_all_out_of_phase),
        "mean_prev_frame_observed_m": _json_value(report.mean_prev_frame_observed),
        "mean_offcam_event_frames_m": _json_value(report.mean_offcam_event_frames),
        "n_frames": report.n_frames,
        "n_predictions": report.n_predictions,
        "per_half": {
            str(h): {k: _json_value(v) for k, v in stats.items()}
            for h, stats in sorted(report.per_half.items())
        },
        "curve": [
            {
                "bucket_s": b.bucket_s,
                "mean_m": _json_value(b.mean_m),
                "p12_5_m": _json_value(b.p12_5),
                "p87_5_m": _json_value(b.p87_5),
                "p2_5_m": _json_value(b.p2_5),
                "p97_5_m": _json_value(b.p97_5),
                "n": b.n,
            }
            for b in report.curve
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf8")


def write_curve_csv(report: ErrorReport, path: str | Path) -> None:
    lines = ["bucket_s,mean_m,p12.5,p87.5,p2.5,p97.5,n"]
    for b in report.curve:
        lines.append(
            f"{b.bucket_s:.1f},{b.mean_m:.4f},{b.p12_5:.4f},{b.p87_5:.4f},"
            f"{b.p2_5:.4f},{b.p97_5:.4f},{b.n}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf8")


def format_report(report: ErrorReport) -> str:
    def fmt(v: float) -> str:
        return "n/a" if math.isnan(v) else f"{v:6.2f} m"

    lines = [
        f"frames evaluated        : {report.n_frames}",
        f"off-camera predictions  : {report.n_predictions}",
        f"mean error, in phase    : {fmt(report.mean_all_in_phase)} (all players)",
        f"mean error, off camera  : {fmt(report.mean_offcam_in_phase)} (in phase)",
        f"median error, off camera: {fmt(report.median_offcam_in_phase)} (in phase)",
        f"mean error, out of phase: {fmt(report.mean_all_out_of_phase)} (all players)",
        f"mean error, seen 1s ago : {fmt(report.mean_prev_frame_observed)}",
        f"mean error at events    : {fmt(report.mean_offcam_event_frames)} (off camera)",
    ]
    return "\n".join(lines)


# --- pitch drawing -----------------------------------------------------------

_TEAM_FILL = {HOME: "#c8102e", AWAY: "#1f4e9c"}
_TEAM_EDGE = {HOME: "#7a0a1c", AWAY: "#102a54"}


def _f(v: float) -> str:
    return f"{v:.2f}"


def render_pitch_svg(frame: EnrichedFrame, annotations: Sequence[str] | None = None) -> str:
    """Deterministic SVG of one snapshot: pitch, discs, numerals, ball.

    ``annotations`` aligns with ``frame.players`` (typically the occlusion age
    in seconds); estimated players get dashed outlines.
    """
    if annotations is not None and len(annotations) != len(frame.players):
        raise ValueError("annotations must align with frame.players")
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="-4 -4 128 88" '
        'width="640" height="440">',
        '<rect x="-4" y="-4" width="128" height="88" fill="#2e7d32"/>',
        '<g fill="none" stroke="#ffffff" stroke-width="0.35">',
        '<rect x="0" y="0" width="120" height="80"/>',
        '<line x1="60" y1="0" x2="60" y2="80"/>',
        '<circle cx="60" cy="40" r="9.15"/>',
        '<rect x="0" y="19.84" width="16.5" height="40.32"/>',
        '<rect x="103.5" y="19.84" width="16.5" height="40.32"/>',
        '<rect x="0" y="30.84" width="5.5" height="18.32"/>',
        '<rect x="114.5" y="30.84" width="5.5" height="18.32"/>',
        "</g>",
    ]
    for i, player in enumerate(frame.players):
        pos = player.position
        fill = _TEAM_FILL[player.tag.team]
        edge = _TEAM_EDGE[player.tag.team]
        dash = ' stroke-dasharray="0.9,0.5"' if player.provenance == "estimated" else ""
        shape = "rect" if player.tag.is_goalkeeper else "circle"
        if shape == "circle":
            lines.append(
                f'<circle cx="{_f(pos.x)}" cy="{_f(pos.y)}" r="1.80" '
                f'fill="{fill}" stroke="{edge}" stroke-width="0.30"{dash}/>'
            )
        else:
            lines.append(
                f'<rect x="{_f(pos.x - 1.6)}" y="{_f(pos.y - 1.6)}" width="3.20" '
                f'height="3.20" fill="{fill}" stroke="{edge}" stroke-width="0.30"{dash}/>'
            )
        if annotations is not None and annotations[i]:
            lines.append(
                f'<text x="{_f(pos.x)}" y="{_f(pos.y + 0.6)}" fill="#ffffff" '
                f'font-size="1.7" text-anchor="middle" '
                f'font-family="sans-serif">{annotations[i]}</text>'
            )
    ball = frame.ball
    lines.append(
        f'<circle cx="{_f(ball.x)}" cy="{_f(ball.y)}" r="0.90" '
        'fill="#111111" stroke="#ffffff" stroke-width="0.25"/>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
