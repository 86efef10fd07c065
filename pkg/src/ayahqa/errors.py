"""Error types shared across the pipeline.

Data problems (bad files, broken invariants) raise subclasses of
:class:`AyahQaError`; the CLI maps them to exit code 1. Programming errors
stay ordinary Python exceptions.
"""

from __future__ import annotations


class AyahQaError(Exception):
    """Base class for all data and protocol errors raised by this package."""


class MalformedIdError(AyahQaError):
    """Passage id string does not have the surah:start-end shape."""


class IdRangeError(AyahQaError):
    """Passage id fields are outside the valid chapter/verse ranges."""


class ParseError(AyahQaError):
    """A file record could not be parsed; carries path and line diagnostics."""

    def __init__(self, message: str, *, path: str | None = None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line_no is not None:
                prefix += f"{line_no}:"
            prefix += " "
        elif line_no is not None:
            prefix = f"line {line_no}: "
        super().__init__(prefix + message)


class AlignmentError(AyahQaError):
    """The Arabic and English corpus files do not share the same id set."""


class DuplicateIdError(AyahQaError):
    """The same passage id appears more than once in a corpus file."""


class PassageNotFoundError(AyahQaError):
    """Lookup of a passage id that is not in the corpus."""


class InvariantViolationError(AyahQaError):
    """A record violates a structural invariant; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DuplicateJudgmentError(AyahQaError):
    """The same (question, passage) pair is judged twice."""


class EmptyAfterCleaningError(AyahQaError):
    """Question text is empty once whitespace and stray marks are removed."""


class ProviderError(AyahQaError):
    """A translation/paraphrase provider failed after bounded retries."""


class DuplicateParaphraseError(AyahQaError):
    """A paraphrase provider returned non-distinct outputs."""


class TransportError(AyahQaError):
    """Remote scoring endpoint unreachable or erroring after retries."""


class ProtocolError(AyahQaError):
    """Remote scoring endpoint answered, but the payload breaks the contract."""


class FixtureMissingQuestionError(AyahQaError):
    """Fixture scorer has no recorded scores for the requested question."""


class MissingTranslationError(AyahQaError):
    """An operation needed English text that has not been filled in yet."""


class ZeroRelevantError(AyahQaError):
    """A rank-sensitive metric was asked about a question with no relevant passages."""


class UnknownQuestionError(AyahQaError):
    """A run or judgment references a question id absent from the dataset."""


class QuestionSetMismatchError(AyahQaError):
    """Two reports being compared do not cover the same questions."""
