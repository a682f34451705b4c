# errors.py - exception hierarchy shared by the framework, domains and CLI
from __future__ import annotations


class XdhhError(Exception):
    """Root of every error raised by this package."""


# ---------- domain barrier ----------
class DomainError(XdhhError):
    """A single barrier call failed; the run itself may continue."""


class NoInstanceLoaded(DomainError):
    pass


class IndexOutOfRange(DomainError):
    pass


class UninitializedSlot(DomainError):
    pass


class WrongArity(DomainError):
    pass


class UnknownHeuristic(DomainError):
    pass


class InvalidParameter(DomainError, ValueError):
    pass


class NoMoveAvailable(DomainError):
    """Raised inside a heuristic when it has nothing to change.

    The barrier catches it and writes an unchanged copy of the source.
    """


class NoBrokenClause(NoMoveAvailable):
    pass


# ---------- instance files ----------
class InstanceFormatError(XdhhError, ValueError):
    pass


class MalformedHeader(InstanceFormatError):
    pass


class LiteralOutOfRange(InstanceFormatError):
    pass


class UnterminatedClause(InstanceFormatError):
    pass


class EmptyClause(InstanceFormatError):
    pass


# ---------- runs ----------
class BudgetEmpty(XdhhError, ValueError):
    pass


class UnsupportedDomain(XdhhError):
    pass


class RunFailed(XdhhError):
    """A domain error escaped an algorithm; carries run context."""

    def __init__(self, message: str, context: dict):
        super().__init__(f"{message} ({', '.join(f'{k}={v}' for k, v in context.items())})")
        self.context = context


# ---------- analysis / cli ----------
class MissingCell(XdhhError):
    pass


class EmptyCell(XdhhError, ValueError):
    pass


class PlanError(XdhhError):
    pass
