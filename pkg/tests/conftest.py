import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import synth_half  # noqa: E402

from track_enrich.forecaster import ball_grid_from_frames, fit  # noqa: E402


@pytest.fixture(scope="session")
def training_half():
    return synth_half(seconds=180.0, fps=5, seed=11, half_id=1)


@pytest.fixture(scope="session")
def model(training_half):
    trajs = [
        t
        for t in training_half.player_tracks.values()
        if not t.tag.is_goalkeeper
    ]
    ball = ball_grid_from_frames(training_half.frames)
    return fit([(trajs, ball)])


@pytest.fixture(scope="session")
def calm_half():
    return synth_half(seconds=200.0, fps=5, seed=23, half_id=1, calm=True)
