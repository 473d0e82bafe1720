class OfframpError(Exception):
    """Base class for offramp exceptions."""

    def __init__(self, error_message: str | None):
        """Create an exception with an optional error_message."""
        self.error_message = error_message
        super().__init__(error_message)


# Contract violations
class ContractError(OfframpError):
    """Raised when an operation is called outside its pre-conditions."""

    pass


class ShapeError(ContractError):
    """Raised when tensor dimensions do not line up."""

    def __init__(self, operation: str, *shapes: tuple[int, ...]):
        self.operation = operation
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(shape)) for shape in shapes)
        super().__init__(f"{operation}: dimension mismatch {rendered}")


class ExitAssignmentError(ContractError):
    """Raised when an exit assignment does not fit the decoder."""

    def __init__(self, error_message: str, exits: list[int] | None = None):
        self.exits = exits
        super().__init__(error_message)


class ProbabilityError(ContractError):
    """Raised when a distribution is not a valid probability vector."""

    pass


## Vocabulary and data
class TokenIndexError(OfframpError, IndexError):
    """Raised when a token id falls outside the vocabulary."""

    def __init__(self, token_id: int, vocab_size: int):
        self.token_id = token_id
        self.vocab_size = vocab_size
        super().__init__(f"Token id {token_id} outside vocabulary of size {vocab_size}")


class EmptyCorpusError(OfframpError):
    """Raised when a corpus yields no usable documents."""

    pass


class ConfigurationError(OfframpError):
    """Raised when a run configuration is invalid or incomplete."""

    pass


# Persistence
class CheckpointError(OfframpError):
    """Base class for checkpoint container errors."""

    pass


class CheckpointFormatError(CheckpointError):
    """Raised when a checkpoint file is corrupt or truncated."""

    def __init__(self, error_message: str, offset: int):
        self.offset = offset
        super().__init__(f"{error_message} (at byte offset {offset})")


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written by an unsupported format version."""

    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"Checkpoint format version {found} is not supported (expected {expected})")


# Training
class TrainingDivergedError(OfframpError):
    """Raised when the training loss stops being finite."""

    def __init__(self, step: int, loss: float, last_finite_loss: float | None):
        self.step = step
        self.loss = loss
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"Loss diverged at step {step}: got {loss}, last finite loss was {last_finite_loss}. "
            "Lower the learning rate or tighten clip_norm."
        )
