"""Exception taxonomy shared across the package."""


class StylomarkError(Exception):
    """Base class for all package errors."""


class IngestError(StylomarkError):
    """A data file (norms, labels, seeds, corpus) failed validation."""


class KeyDerivationError(StylomarkError):
    """A key could not be derived from a sentence (e.g. no words)."""


class TransportError(StylomarkError):
    """A remote call failed at the network level."""


class ProtocolError(StylomarkError):
    """A remote peer sent a malformed or rule-violating response."""


class GenerationError(StylomarkError):
    """Generation aborted; carries the partial trace for debugging."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StatisticError(StylomarkError):
    """A statistical routine received invalid input (e.g. empty z list)."""


class InsufficientTextError(StylomarkError):
    """The input segments into too few sentences to test."""


class AttackError(StylomarkError):
    """An attack could not be completed; the run is marked incomplete."""


class MetricsError(StylomarkError):
    """Metric computation was asked for an empty or inconsistent slice."""
