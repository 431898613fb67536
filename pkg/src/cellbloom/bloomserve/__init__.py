from .store import (
    AggregatedLabel,
    AnnotationRecord,
    AnnotationStore,
    AnnotationTask,
    DuplicateVoteError,
    InvalidClassError,
    TaskClosedError,
    UnknownTaskError,
)
from .tasks import create_tasks

__all__ = [
    "AggregatedLabel",
    "AnnotationRecord",
    "AnnotationStore",
    "AnnotationTask",
    "DuplicateVoteError",
    "InvalidClassError",
    "TaskClosedError",
    "UnknownTaskError",
    "create_tasks",
]
