"""Exception types raised across the package."""
from __future__ import annotations



class HasseNetError(Exception):
    """Base class for all library errors."""


# network model
class EmptyNetwork(HasseNetError, ValueError):
    pass


class DanglingEdge(HasseNetError, ValueError):
    pass


class SelfLoop(HasseNetError, ValueError):
    pass


class DuplicateEdge(HasseNetError, ValueError):
    pass


class OverlappingBlocks(HasseNetError, ValueError):
    pass


class UncoveredNode(HasseNetError, ValueError):
    pass


class DisconnectedGraph(HasseNetError, ValueError):
    pass


class BadParams(HasseNetError, ValueError):
    pass


# dense / stabilizer engines
class BadAmplitudes(HasseNetError, ValueError):
    pass


class QubitNotFresh(HasseNetError, ValueError):
    pass


class DimensionMismatch(HasseNetError, ValueError):
    pass


class SubsetTooLarge(HasseNetError, ValueError):
    pass


class SubsetMismatch(HasseNetError, ValueError):
    pass


class OverlappingSubsets(HasseNetError, ValueError):
    pass


class TooLarge(HasseNetError, ValueError):
    pass


class BadCut(HasseNetError, ValueError):
    pass


class BadIndex(HasseNetError, IndexError):
    pass


# causal trace
class UnknownCause(HasseNetError, KeyError):
    pass


class UnknownEvent(HasseNetError, KeyError):
    pass


class CycleDetected(HasseNetError, ValueError):
    pass


class InvalidTrace(HasseNetError, ValueError):
    pass


# ledger / protocols
class InsufficientBalance(HasseNetError, ValueError):
    pass


class NoSharedEntanglement(HasseNetError, ValueError):
    pass


class MissingPair(NoSharedEntanglement):
    pass


class MissingGHZ(NoSharedEntanglement):
    pass


class NoFreeQubit(HasseNetError, ValueError):
    pass


class NotNeighbors(HasseNetError, ValueError):
    pass


class CapacityExceeded(HasseNetError, ValueError):
    pass


class IllegalChannelUse(HasseNetError, ValueError):
    pass


class ScheduleDisconnected(UserWarning):
    """Scrambling schedule cannot carry information from R to every node."""


# scenario files
class ParseError(HasseNetError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class SemanticError(HasseNetError, ValueError):
    pass
