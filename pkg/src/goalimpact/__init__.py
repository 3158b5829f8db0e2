"""Next-goal action-value learning and goal-impact player ratings."""

__version__ = "0.1.0"

from .events import (  # noqa: F401
    ActionVocabulary,
    DEFAULT_ACTIONS,
    DEFAULT_VOCABULARY,
    Event,
    FeatureScaler,
    Manpower,
    NEITHER,
    Observation,
    Outcome,
    TeamSide,
    encode_step,
    encoding_width,
    fit_scaler,
    goal_vector,
)
