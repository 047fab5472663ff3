"""Exception types and documented process exit codes."""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_INVARIANT_VIOLATION = 3


class PerturbkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PerturbkitError):
    """Invalid configuration value, unknown key, or unresolvable artifact."""


class DegenerateInputError(PerturbkitError):
    """Numerically degenerate input (e.g. a zero vector reaching vector math)."""


class ContractViolation(PerturbkitError):
    """A documented call contract was broken (e.g. unnormalized features)."""


class InvariantViolation(PerturbkitError):
    """A runtime invariant failed (frozen-weight drift, budget overshoot, ...)."""


class UnknownClassError(PerturbkitError, KeyError):
    """Class name not present in the experiment vocabulary."""


class SamplerError(PerturbkitError):
    """Few-shot sampling could not satisfy the requested shot count."""


class DataError(PerturbkitError):
    """Dataset loading failed; message carries the itemized problem list."""


class CheckpointError(PerturbkitError):
    """Checkpoint missing, corrupted, or from an incompatible format version."""


class TrainingAborted(PerturbkitError):
    """Training stopped on a non-finite loss; carries the last good state."""

    def __init__(self, message, last_good_path=None):
        super().__init__(message)
        self.last_good_path = last_good_path
