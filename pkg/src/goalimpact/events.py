"""Domain types for play-by-play events and their numeric encoding.

The encoding contract shared by ingestion, training and valuation:

    [x, y, vx, vy, time_remain, score_diff, duration, angle]   z-scored
    [EV, SH, PP]                                               one-hot
    [outcome]                                                  +1 success / -1 failure
    [side]                                                     +1 Home / -1 Away
    [action]                                                   one-hot over the vocabulary

Vector width is therefore 13 + len(vocabulary) and is fixed for the
lifetime of a trained model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyDatasetError, UnknownActionError


class TeamSide(Enum):
    HOME = "H"
    AWAY = "A"

    @property
    def sign(self) -> float:
        return 1.0 if self is TeamSide.HOME else -1.0

    def other(self) -> "TeamSide":
        return TeamSide.AWAY if self is TeamSide.HOME else TeamSide.HOME


class Manpower(Enum):
    EV = 0
    SH = 1
    PP = 2

    def flipped(self) -> "Manpower":
        """Same situation seen from the other team (PP <-> SH)."""
        if self is Manpower.PP:
            return Manpower.SH
        if self is Manpower.SH:
            return Manpower.PP
        return Manpower.EV


class Outcome(Enum):
    SUCCESS = 1
    FAILURE = -1


#: Default 13-name action vocabulary; configurable via a vocabulary file
#: (one name per line, index = line number).
DEFAULT_ACTIONS = (
    "shot",
    "block",
    "assist",
    "pass",
    "carry",
    "lpr",
    "check",
    "goal",
    "dump-in",
    "dump-out",
    "reception",
    "faceoff",
    "puck-protection",
)

#: Names of the z-scored continuous features, in vector order.
CONTINUOUS_FEATURES = (
    "x",
    "y",
    "vx",
    "vy",
    "time_remain",
    "score_diff",
    "duration",
    "angle",
)

N_CONTINUOUS = len(CONTINUOUS_FEATURES)


class ActionVocabulary:
    """Ordered action-name list; the index of a name is its one-hot slot.

    The ordering is persisted with every checkpoint, so a model can only be
    applied to data encoded with the identical vocabulary.
    """

    def __init__(self, names: Sequence[str] = DEFAULT_ACTIONS):
        names = [str(n).strip().lower() for n in names]
        if not names:
            raise ValueError("vocabulary must contain at least one action")
        if len(set(names)) != len(names):
            raise ValueError("vocabulary contains duplicate action names")
        self.names = tuple(names)
        self._index = {n: i for i, n in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ActionVocabulary) and self.names == other.names

    def index(self, name: str) -> int:
        try:
            return self._index[name.strip().lower()]
        except KeyError:
            raise UnknownActionError(
                f"unknown action {name!r}; vocabulary: {', '.join(self.names)}"
            ) from None

    def __contains__(self, name: str) -> bool:
        return name.strip().lower() in self._index

    @classmethod
    def from_file(cls, path) -> "ActionVocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            names = [line.strip() for line in fh if line.strip()]
        return cls(names)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in self.names:
                fh.write(name + "\n")


@dataclass(frozen=True)
class Observation:
    """Per-event feature values, ranges as in the raw data.

    x, y are adjusted rink feet (negative x = acting player's defensive
    zone); velocity in feet/sec; time_remain seconds; angle radians.
    """

    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    time_remain: float = 0.0
    score_diff: float = 0.0
    manpower: Manpower = Manpower.EV
    duration: float = 0.0
    outcome: Outcome = Outcome.SUCCESS
    angle: float = 0.0
    side: TeamSide = TeamSide.HOME

    def continuous(self) -> np.ndarray:
        return np.array(
            [
                self.x,
                self.y,
                self.vx,
                self.vy,
                self.time_remain,
                self.score_diff,
                self.duration,
                self.angle,
            ],
            dtype=np.float64,
        )


@dataclass
class Event:
    """One play-by-play record: raw columns plus derived features."""

    game_id: int
    player_id: int
    team_id: int
    game_time: float
    action: str
    obs: Observation
    possession: TeamSide
    play_number: int = 1
    goal_flag: Optional[TeamSide] = None


#: Terminal marker for an episode that ends with the game instead of a goal.
NEITHER = "neither"


def goal_vector(terminal: Optional[TeamSide]) -> np.ndarray:
    """1-of-3 indicator (home, away, neither) of which team scored.

    ``terminal`` is the scoring side, NEITHER for a goalless game end, or
    None for a non-terminal step (all-zero vector).
    """
    if terminal is None:
        return np.zeros(3, dtype=np.float64)
    if terminal == NEITHER:
        return np.array([0.0, 0.0, 1.0])
    if terminal is TeamSide.HOME:
        return np.array([1.0, 0.0, 0.0])
    if terminal is TeamSide.AWAY:
        return np.array([0.0, 1.0, 0.0])
    raise ValueError(f"bad terminal marker: {terminal!r}")


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature mean/std of the continuous slots, fitted on training data.

    Zero-variance features keep their mean and get std 1 so scaling stays
    well-defined.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != (N_CONTINUOUS,) or self.std.shape != (N_CONTINUOUS,):
            raise ValueError("scaler must cover exactly the continuous features")
        if not (np.all(np.isfinite(self.mean)) and np.all(self.std > 0)):
            raise ValueError("scaler statistics must be finite with std > 0")

    @classmethod
    def identity(cls) -> "FeatureScaler":
        return cls(mean=np.zeros(N_CONTINUOUS), std=np.ones(N_CONTINUOUS))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


def fit_scaler(events: Iterable[Event]) -> FeatureScaler:
    """Population mean/std of the continuous features over an event stream.

    Degenerate (zero-variance) features get std 1. Raises on an empty
    stream.
    """
    n = 0
    mean = np.zeros(N_CONTINUOUS)
    m2 = np.zeros(N_CONTINUOUS)
    for ev in events:
        n += 1
        x = ev.obs.continuous()
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    if n == 0:
        raise EmptyDatasetError("cannot fit a scaler on an empty event stream")
    var = m2 / n  # population variance
    std = np.sqrt(var)
    std[~(std > 1e-12)] = 1.0
    return FeatureScaler(mean=mean, std=std)


DEFAULT_VOCABULARY = ActionVocabulary()


def encoding_width(vocabulary: ActionVocabulary) -> int:
    return N_CONTINUOUS + 3 + 1 + 1 + len(vocabulary)


# Slot offsets within an encoded step.
MANPOWER_OFFSET = N_CONTINUOUS
OUTCOME_OFFSET = N_CONTINUOUS + 3
SIDE_OFFSET = N_CONTINUOUS + 4
ACTION_OFFSET = N_CONTINUOUS + 5


def encode_step(
    event: Event,
    scaler: FeatureScaler,
    vocabulary: ActionVocabulary = DEFAULT_VOCABULARY,
) -> np.ndarray:
    """Deterministic fixed-width vector for one event.

    Raises UnknownActionError when the event's action is not in the
    vocabulary.
    """
    action_idx = vocabulary.index(event.action)
    vec = np.zeros(encoding_width(vocabulary), dtype=np.float64)
    vec[:N_CONTINUOUS] = scaler.transform(event.obs.continuous())
    vec[MANPOWER_OFFSET + event.obs.manpower.value] = 1.0
    vec[OUTCOME_OFFSET] = float(event.obs.outcome.value)
    vec[SIDE_OFFSET] = event.obs.side.sign
    vec[ACTION_OFFSET + action_idx] = 1.0
    if not np.all(np.isfinite(vec)):
        bad = np.where(~np.isfinite(vec))[0]
        raise ValueError(f"non-finite encoded slots {bad.tolist()} for event {event}")
    return vec


def goal_angle(x: float, y: float) -> float:
    """Angle between the puck and the goal in the actor's adjusted frame.

    Goal line at adjusted x = 89; at or beyond it the angle saturates to
    +/- pi/2 by the sign of y.
    """
    if x >= 89.0:
        return math.pi / 2.0 * float(np.sign(y))
    return math.atan(abs(y) / (89.0 - x))
