import math

import pytest

from synth import synth_half

from track_enrich.broadcast import DegradeConfig, degrade
from track_enrich.geometry import AWAY, HOME, PitchPoint, PlayerTag, Trajectory
from track_enrich.pipeline import (
    build_paths,
    enrich_frames,
    seconds_to_nearest_observation,
    snapshot_at,
)


@pytest.fixture(scope="module")
def degraded(model):
    half = synth_half(seconds=120.0, fps=5, seed=55)
    record = degrade(half, DegradeConfig(1.0, 30.0, 5))
    return half, record, build_paths(record, model, alpha=0.5)


class TestSnapshotAt:
    def test_shape_and_order(self, degraded):
        _, record, paths = degraded
        frame, ages = snapshot_at(paths, record.frames[3].time)
        assert len(frame.players) == 22
        assert len(ages) == 22
        teams = [p.tag.team for p in frame.players]
        assert teams == [HOME] * 11 + [AWAY] * 11
        assert frame.players[10].tag.is_goalkeeper
        assert frame.players[21].tag.is_goalkeeper

    def test_observed_positions_equal_visible(self, degraded):
        _, record, paths = degraded
        for fr in record.frames[1:10]:
            snap, _ = snapshot_at(paths, fr.time)
            visible = {(p.x, p.y) for _, p in fr.visible}
            for player in snap.players:
                if player.provenance == "observed":
                    assert (player.position.x, player.position.y) in visible

    def test_invented_seeds_are_estimated_with_positive_age(self, degraded):
        half, record, paths = degraded
        t0 = record.frames[0].time
        n_visible = len(record.frames[0].visible)
        snap, ages = snapshot_at(paths, t0)
        observed = [p for p in snap.players if p.provenance == "observed"]
        assert len(observed) == n_visible
        for player, age in zip(snap.players, ages):
            if player.provenance == "observed":
                assert age == 0.0
            else:
                assert age > 0.0

    def test_ball_interpolated_between_frames(self, degraded):
        _, record, paths = degraded
        t0, t1 = record.frames[0].time, record.frames[1].time
        mid = paths.ball_at((t0 + t1) / 2)
        b0, b1 = record.frames[0].ball, record.frames[1].ball
        assert mid.x == pytest.approx((b0.x + b1.x) / 2)
        assert mid.y == pytest.approx((b0.y + b1.y) / 2)
        assert paths.ball_at(t0) == b0


class TestSecondsToNearest:
    def _traj(self, seeded=False):
        traj = Trajectory(tag=PlayerTag(HOME), seeded=seeded)
        traj.append(5.0, PitchPoint(10, 10))
        traj.append(10.0, PitchPoint(12, 12))
        return traj

    def test_interior(self):
        assert seconds_to_nearest_observation(self._traj(), 8.0) == 2.0
        assert seconds_to_nearest_observation(self._traj(), 6.0) == 1.0

    def test_outside(self):
        assert seconds_to_nearest_observation(self._traj(), 13.5) == 3.5
        assert seconds_to_nearest_observation(self._traj(), 1.0) == 4.0

    def test_seed_does_not_count(self):
        traj = self._traj(seeded=True)
        assert seconds_to_nearest_observation(traj, 5.0) == 5.0
        assert seconds_to_nearest_observation(traj, 9.0) == 1.0

    def test_never_observed(self):
        traj = Trajectory(tag=PlayerTag(HOME), seeded=True)
        traj.append(5.0, PitchPoint(25, 10))
        assert math.isinf(seconds_to_nearest_observation(traj, 9.0))


class TestEnrichFrames:
    def test_grid_and_contract(self, degraded):
        _, record, paths = degraded
        frames = enrich_frames(paths, period=1.0)
        assert len(frames) == len(record.frames)  # record is on the same grid
        assert all(len(f.players) == 22 for f in frames)
        times = [f.time for f in frames]
        assert times == sorted(times)

    def test_coarser_period(self, degraded):
        _, record, paths = degraded
        frames = enrich_frames(paths, period=2.0)
        t0, t1 = record.frames[0].time, record.frames[-1].time
        want = math.floor(t1 / 2.0) - math.ceil(t0 / 2.0) + 1
        assert len(frames) == want
        assert all(f.time % 2.0 == 0.0 for f in frames)
