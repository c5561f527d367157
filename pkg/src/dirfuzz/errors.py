"""Exception and warning types shared across the package."""

from __future__ import annotations


class DirfuzzError(Exception):
    """Base class for every error raised by dirfuzz."""


# -- call graph ---------------------------------------------------------------


class ParseError(DirfuzzError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(DirfuzzError):
    pass


class OverlapError(ValidationError):
    pass


# -- analysis -----------------------------------------------------------------


class TargetUnknown(DirfuzzError):
    pass


class PathExplosion(DirfuzzError):
    pass


# -- choice table -------------------------------------------------------------


class EmptySyscallSet(DirfuzzError):
    pass


class NegativeWeight(DirfuzzError):
    pass


class ZeroRow(DirfuzzError):
    pass


class UnknownSyscall(DirfuzzError):
    pass


# -- kernel / engine ----------------------------------------------------------


class SpecError(DirfuzzError):
    pass


class VerificationFailed(DirfuzzError):
    pass


# -- llm interface ------------------------------------------------------------


class LlmError(DirfuzzError):
    """Any failure on the guidance path; campaigns treat it as a no-op round."""


class NothingParsed(LlmError):
    pass


class TransportError(LlmError):
    pass


class TranscriptExhausted(LlmError):
    pass


class BudgetExceeded(LlmError):
    pass


class EmptyCallingCode(UserWarning):
    pass


class NoCases(UserWarning):
    pass


class FanoutRejected(DirfuzzError):
    pass
