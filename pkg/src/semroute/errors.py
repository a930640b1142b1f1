"""Exception hierarchy shared across the package."""


class SemrouteError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(SemrouteError, ValueError):
    """Non-finite, negative, or otherwise out-of-contract input."""


class ShapeError(SemrouteError, ValueError):
    """Dimension or length mismatch between operands."""


class DegenerateVectorError(SemrouteError, ValueError):
    """A zero-norm vector where a direction is required."""


class InvalidDistributionError(SemrouteError, ValueError):
    """A vector that should be a probability distribution is not."""


class InsufficientVariantsError(SemrouteError, ValueError):
    """Fewer than two paraphrase variants supplied for a variance estimate."""


class InvalidRoutingError(SemrouteError, ValueError):
    """Empty or out-of-range expert selection."""


class MissingCueError(SemrouteError, KeyError):
    """Teacher-mode scoring requested for an option with no cues."""

    def __init__(self, sample_id, option_id):
        super().__init__(f"no cues for sample {sample_id!r}, option {option_id}")
        self.sample_id = sample_id
        self.option_id = option_id


class CueFileError(SemrouteError, ValueError):
    """Cue file violates the line-oriented JSON schema."""


class RegenerationFailedError(SemrouteError, RuntimeError):
    """Cue regeneration loop aborted; carries the best candidate seen."""

    def __init__(self, message, best_candidate=None):
        super().__init__(message)
        self.best_candidate = best_candidate


class ProbeFailureError(SemrouteError, RuntimeError):
    """Finite-difference probe produced a non-finite loss."""

    def __init__(self, param_name, detail=""):
        super().__init__(f"non-finite loss while probing parameter {param_name!r} {detail}".rstrip())
        self.param_name = param_name


class DivergenceError(SemrouteError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, step, breakdown=None):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.breakdown = breakdown


class DataError(SemrouteError, ValueError):
    """Dataset or checkpoint file is malformed or inconsistent."""
