"""Exception types shared across the package."""


class RfSearchError(Exception):
    """Base class for all package errors."""


# --- tree ---------------------------------------------------------------


class EmptyTree(RfSearchError):
    """Raised when an operation needs at least one evaluated node."""


class EliteEmpty(RfSearchError):
    """Raised when sampling from an empty elite set."""


# --- expansion / prompts -------------------------------------------------


class ZeroActions(RfSearchError):
    """All per-expansion action counts are zero."""


class MissingFeedback(RfSearchError):
    """A prompt context node has no training feedback attached."""


# --- designer ------------------------------------------------------------


class TransportError(RfSearchError):
    """Designer backend failed after exhausting transport retries."""


class ParseError(RfSearchError):
    """Designer response contained no usable code block."""


class NoScore(RfSearchError):
    """Self-verify response contained no bracketed decimal."""


class RetryExhausted(RfSearchError):
    """Repair loop hit the configured revision limit."""


# --- DSL -----------------------------------------------------------------


class DslSyntaxError(RfSearchError):
    """Reward program failed to parse; carries line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownVariable(RfSearchError):
    """Reward program references variables outside the task vocabulary."""

    def __init__(self, names):
        self.names = tuple(names)
        super().__init__(f"unknown variable(s): {', '.join(self.names)}")


class MissingBinding(RfSearchError):
    """Evaluation bindings do not cover every referenced variable."""


# --- evaluation ----------------------------------------------------------


class DimensionMismatch(RfSearchError):
    """Genome length does not match the landscape dimension."""


# --- orchestrator --------------------------------------------------------


class AllInitFailed(RfSearchError):
    """Every initialization node failed after exhausting repairs."""


# --- persistence ---------------------------------------------------------


class VersionMismatch(RfSearchError):
    """Checkpoint schema version is not supported."""


class CorruptCheckpoint(RfSearchError):
    """Checkpoint failed to parse or its content hash does not match."""


class ConfigError(RfSearchError):
    """Run configuration is missing, malformed, or inconsistent."""
