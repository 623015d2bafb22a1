"""Exception types shared across the package."""


class SintomaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SintomaError):
    """Invalid run configuration (bad key, missing path, bad value)."""


class ParseError(SintomaError):
    """A data file could not be parsed.

    Carries file/line context in the message so CLI users can locate the
    offending row.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        ctx = ""
        if path is not None:
            ctx = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(ctx + message)
        self.path = path
        self.line = line


class MisalignedMention(SintomaError):
    """A mention boundary falls strictly inside a token."""


class OverlappingMentions(SintomaError):
    """Two mentions overlap where non-overlapping input is required."""


class InvalidTagSequence(SintomaError):
    """A tag sequence violates IOB2 validity (strict mode only)."""


class DimensionMismatch(SintomaError):
    """Array shapes do not agree."""


class EmptyDataset(SintomaError):
    """Training requires at least one sentence."""


class DegenerateAlias(SintomaError):
    """No valid single-character edit exists for a rare concept's aliases."""


class ZeroVector(SintomaError):
    """Cosine similarity is undefined for zero-norm vectors."""


class EmptyStore(SintomaError):
    """Nearest-neighbor search over an empty embedding store."""


class EmptyMention(SintomaError):
    """A mention with no tokens cannot be windowed or embedded."""


class EmptyText(SintomaError):
    """The stub embedder needs at least one character of text."""


class EmptyValidation(SintomaError):
    """Grid search requires a non-empty validation set."""


class MissingPrediction(SintomaError):
    """Linking evaluation found gold mentions without a prediction."""

    def __init__(self, uncovered):
        self.uncovered = list(uncovered)
        preview = ", ".join(str(m) for m in self.uncovered[:5])
        more = "" if len(self.uncovered) <= 5 else f" (+{len(self.uncovered) - 5} more)"
        super().__init__(f"{len(self.uncovered)} gold mentions lack predictions: {preview}{more}")


class EmbedderError(SintomaError):
    """An embedding backend failed; message carries mention context."""


class IoError(SintomaError):
    """A referenced file or directory is missing or unreadable."""
