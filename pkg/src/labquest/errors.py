"""Exception types shared across the package."""

from __future__ import annotations


class LabQuestError(Exception):
    """Base class for all package errors."""


class LexiconTooSmall(LabQuestError):
    """A lexicon kind has fewer names than a sample requires."""


class UnknownSchemaType(LabQuestError):
    """An annotation entity type has no mapping to an engine kind."""


class PreconditionViolated(LabQuestError):
    """An action was applied to a state where its preconditions fail."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class GenerationFailed(LabQuestError):
    """Quest generation exceeded its retry budget."""


class ReplayFailed(LabQuestError):
    """An action sequence could not be replayed from its start state."""

    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


class MissingTemplate(LabQuestError):
    """A surface verb has no realization pattern."""

    def __init__(self, verb: str):
        super().__init__(f"no surface template for verb {verb}")
        self.verb = verb


class ParseError(LabQuestError):
    """A command line could not be parsed into a grounded action."""

    def __init__(self, token: str, message: str | None = None):
        super().__init__(message or f"cannot parse token {token!r}")
        self.token = token


class EpisodeOver(LabQuestError):
    """step() was called after the episode finished."""


class CorruptGame(LabQuestError):
    """A game's stored reference sequence does not replay to its goal."""


class SchemaViolation(LabQuestError):
    """A serialized document does not match the expected schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptyReference(LabQuestError):
    """A score was requested for a game with no reference sequence."""


class BudgetExhausted(LabQuestError):
    """Search hit its node budget before reaching the goal."""


class ConversionError(LabQuestError):
    """An annotated document could not be converted into a game."""


class UnmappableRelation(ConversionError):
    """An annotation relation type has no action mapping."""


class CyclicOperationOrder(ConversionError):
    """Operation ordering relations in a document form a cycle."""


class InsufficientEntities(LabQuestError):
    """Tagged text lacks the minimum entities needed to build a game."""
