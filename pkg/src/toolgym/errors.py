"""Error taxonomy shared across the package.

Every error carries a stable ``error_kind`` string that is used verbatim on
the wire (HTTP error bodies, tool observations) and by the reward engine to
distinguish validation failures.
"""


class ToolGymError(Exception):
    """Base class; ``error_kind`` is the wire-stable identifier."""

    error_kind = "ToolGymError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.error_kind)
        self.message = message or self.error_kind


class InvalidDimension(ToolGymError):
    error_kind = "InvalidDimension"


class OutOfBounds(ToolGymError):
    error_kind = "OutOfBounds"


class DegeneratePath(ToolGymError):
    error_kind = "DegeneratePath"


class ShapeMismatch(ToolGymError):
    error_kind = "ShapeMismatch"


class InfeasibleConfig(ToolGymError):
    error_kind = "InfeasibleConfig"


class NoPath(ToolGymError):
    error_kind = "NoPath"


class InvalidAnswer(ToolGymError):
    error_kind = "InvalidAnswer"


class InvalidArgument(ToolGymError):
    error_kind = "InvalidArgument"


class TargetNotFound(ToolGymError):
    error_kind = "TargetNotFound"


class OracleUnavailable(ToolGymError):
    error_kind = "OracleUnavailable"


class UnknownTool(ToolGymError):
    error_kind = "UnknownTool"


class UnknownParam(ToolGymError):
    error_kind = "UnknownParam"


class MissingParam(ToolGymError):
    error_kind = "MissingParam"


class BadValue(ToolGymError):
    error_kind = "BadValue"


class BadImageRef(ToolGymError):
    error_kind = "BadImageRef"


class DegenerateGroup(ToolGymError):
    error_kind = "DegenerateGroup"


class MissingReference(ToolGymError):
    error_kind = "MissingReference"


class UnmappedIdentifier(ToolGymError):
    error_kind = "UnmappedIdentifier"


class BlueprintError(ToolGymError):
    error_kind = "BlueprintError"


class InstantiationError(ToolGymError):
    error_kind = "InstantiationError"


class NoSuchEpisode(ToolGymError):
    error_kind = "NoSuchEpisode"


class EpisodeFinished(ToolGymError):
    error_kind = "EpisodeFinished"


class Busy(ToolGymError):
    error_kind = "Busy"


class Unavailable(ToolGymError):
    error_kind = "Unavailable"
