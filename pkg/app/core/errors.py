"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class LossnetError(Exception):
    """Base class for all expected failures."""

    exit_code = 1


class ConfigError(LossnetError):
    """Invalid or missing configuration."""

    exit_code = 2


class ParameterError(ConfigError):
    """Invalid model hyperparameters."""


class UsageError(LossnetError):
    """Invalid command usage or an operation that cannot be carried out as requested."""

    exit_code = 2


class UnsplittableClassError(UsageError):
    """A class has too few rows to appear on both sides of a split."""


class FoldConstructionError(UsageError):
    """Cross-validation folds cannot all contain every class."""


class InputParseError(LossnetError):
    """Malformed input file."""

    exit_code = 3

    def __init__(self, message: str, path=None, offset=None):
        self.path = path
        self.offset = offset
        parts = [message]
        if path is not None:
            parts.append(f"file: {path}")
        if offset is not None:
            parts.append(f"byte offset: {offset}")
        super().__init__(" | ".join(parts))


class NoRttReferenceError(InputParseError):
    """Trace holds no acknowledged packet, so no RTT reference exists."""

    def __init__(self, message: str = "no RTT reference: trace contains zero acknowledged packets"):
        super().__init__(message)


class SchemaMismatchError(LossnetError):
    """Feature schema of a model and its input disagree."""

    exit_code = 4

    def __init__(self, message: str, missing=(), unexpected=()):
        self.missing = tuple(missing)
        self.unexpected = tuple(unexpected)
        details = []
        if self.missing:
            details.append(f"missing: {', '.join(self.missing)}")
        if self.unexpected:
            details.append(f"unexpected: {', '.join(self.unexpected)}")
        super().__init__(message + (f" ({'; '.join(details)})" if details else ""))


class DivergenceError(LossnetError):
    """Numeric training diverged."""

    exit_code = 5

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(
            f"training diverged at iteration {iteration} (loss={loss}); lower the learning rate"
        )
