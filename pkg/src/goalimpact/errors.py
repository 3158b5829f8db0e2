"""Exception hierarchy. CLI maps these onto exit codes (see cli.py)."""


class GoalImpactError(Exception):
    """Base class for all package errors."""


class SchemaError(GoalImpactError):
    """A required CSV column is missing or the schema map is invalid."""


class RowParseError(GoalImpactError):
    """A CSV row could not be converted to an event."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line

    def __str__(self):
        loc = ""
        if self.path is not None:
            loc = f"{self.path}:{self.line}: " if self.line is not None else f"{self.path}: "
        return loc + super().__str__()


class UnknownActionError(GoalImpactError):
    """An action name is not present in the active vocabulary."""


class EmptyDatasetError(GoalImpactError):
    """An operation that needs at least one record received none."""


class CheckpointError(GoalImpactError):
    """Base class for checkpoint read failures."""


class CorruptCheckpointError(CheckpointError):
    """Magic string missing or file truncated."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class ShapeMismatchError(CheckpointError):
    """Stored weights disagree with the declared config or vocabulary."""


class SpecValidationError(GoalImpactError):
    """A simulator spec fails its stochasticity checks."""


class DegenerateInputError(GoalImpactError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class NumericalError(GoalImpactError):
    """Training or gradient checking hit a non-finite or failing value."""


class ConfigError(GoalImpactError):
    """Run configuration file contains unknown keys or bad values."""
