"""Exception types shared across the engine.

Every error raised by library code derives from EvisynthError so the API
layer can map them to structured HTTP responses in one place.
"""

from __future__ import annotations


class EvisynthError(Exception):
    """Base class for all engine errors."""


# corpus
class UnknownFormat(EvisynthError):
    pass


class EmptyPayload(EvisynthError):
    pass


class InvalidRubric(EvisynthError):
    pass


# embedkit
class ProviderUnavailable(EvisynthError):
    pass


class BadWindowParams(EvisynthError):
    pass


class DimsMismatch(EvisynthError):
    pass


class EmptyIndex(EvisynthError):
    pass


class DegenerateQuery(EvisynthError):
    pass


# screener
class EmptyAbstract(EvisynthError):
    pass


class UnknownModel(EvisynthError):
    pass


class EmptyDataset(EvisynthError):
    pass


class NonFiniteLoss(EvisynthError):
    pass


# topicmill
class TooFewDocuments(EvisynthError):
    pass


class EmptyTopic(EvisynthError):
    pass


# graphcore
class UnknownEndpoint(EvisynthError):
    pass


class UnknownEntity(EvisynthError):
    pass


# ragflow
class EmptyQuery(EvisynthError):
    pass


class GraderUnavailable(EvisynthError):
    pass


class BackendDown(EvisynthError):
    pass


class StorageFull(EvisynthError):
    pass


# evalkit
class EmptyCounts(EvisynthError):
    pass


class EmptyInput(EvisynthError):
    pass


# servicehub
class NotInitialized(EvisynthError):
    pass


class PortInUse(EvisynthError):
    pass


class BadConfig(EvisynthError):
    pass


class DecisionConflict(EvisynthError):
    pass
