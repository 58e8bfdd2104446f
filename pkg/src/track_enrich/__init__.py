"""Continuous full-pitch player tracking estimates from discrete, team-labelled frames."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    AWAY,
    HOME,
    PITCH_LENGTH_M,
    PITCH_WIDTH_M,
    EnrichedFrame,
    EnrichedPlayer,
    MalformedInputError,
    ObservationFrame,
    PitchPoint,
    PlayerTag,
    Trajectory,
)
