"""Message bus carrying training and sweep progress events."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional
import json
import logging

import numpy as np


logger = logging.getLogger(__name__)

TRAINING_TOPIC = "training.events"
SWEEP_TOPIC = "sweep.events"


class EventType(str, Enum):
    """Event types published by the harness."""
    RUN_STARTED = "run.started"
    TRAIN_ITERATION = "train.iteration"
    CHECKPOINT_WRITTEN = "checkpoint.written"
    RUN_FINISHED = "run.finished"
    SWEEP_CELL_COMPLETED = "sweep.cell.completed"
    SWEEP_COMPLETED = "sweep.completed"


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


@dataclass
class Message:
    """Event published on the bus."""

    event_type: str
    payload: Dict[str, Any]
    timestamp: datetime
    source: str
    correlation_id: Optional[str] = None

    def to_json(self) -> str:
        """Serialize message to JSON; numpy scalars and arrays become plain numbers."""
        data = {
            "event_type": self.event_type,
            "payload": self.payload,
            "timestamp": self.timestamp.isoformat(),
            "source": self.source,
            "correlation_id": self.correlation_id,
        }
        return json.dumps(data, default=_to_builtin)

    @classmethod
    def from_json(cls, json_str: str) -> "Message":
        """Deserialize message from JSON."""
        data = json.loads(json_str)
        data["timestamp"] = datetime.fromisoformat(data["timestamp"])
        return cls(**data)


class MessageBus(ABC):
    """Abstract publish/subscribe channel."""

    @abstractmethod
    def publish(self, topic: str, message: Message) -> None:
        """Publish a message to a topic."""

    @abstractmethod
    def subscribe(self, topic: str, handler: Callable[[Message], None]) -> None:
        """Subscribe to a topic with a message handler."""

    @abstractmethod
    def unsubscribe(self, topic: str, handler: Optional[Callable[[Message], None]] = None) -> None:
        """Drop one handler of a topic, or every handler when none is given."""

    @abstractmethod
    def close(self) -> None:
        """Release the bus."""


class InMemoryMessageBus(MessageBus):
    """
    Synchronous in-process bus.

    Handlers run in subscription order inside ``publish``, so a subscriber that
    records rows sees them in publication order.
    """

    def __init__(self) -> None:
        self._subscribers: Dict[str, List[Callable[[Message], None]]] = {}

    def publish(self, topic: str, message: Message) -> None:
        """Deliver a message to every subscriber of a topic."""
        handlers = self._subscribers.get(topic, [])
        logger.debug(f"Publishing {message.event_type} to {topic} ({len(handlers)} handlers)")
        for handler in handlers:
            handler(message)

    def subscribe(self, topic: str, handler: Callable[[Message], None]) -> None:
        """Subscribe to a topic."""
        self._subscribers.setdefault(topic, []).append(handler)

    def unsubscribe(self, topic: str, handler: Optional[Callable[[Message], None]] = None) -> None:
        """Unsubscribe one handler, or the whole topic when handler is None."""
        if handler is None:
            self._subscribers.pop(topic, None)
            return
        handlers = self._subscribers.get(topic, [])
        if handler in handlers:
            handlers.remove(handler)
        if not handlers:
            self._subscribers.pop(topic, None)

    def close(self) -> None:
        """Close the bus (drops all subscribers)."""
        self._subscribers.clear()

    def subscriber_count(self, topic: str) -> int:
        return len(self._subscribers.get(topic, []))


def make_message(
    event_type: EventType,
    payload: Dict[str, Any],
    source: str,
    correlation_id: Optional[str] = None,
) -> Message:
    """Build a message stamped with the current time."""
    return Message(
        event_type=event_type.value,
        payload=payload,
        timestamp=datetime.now(),
        source=source,
        correlation_id=correlation_id,
    )
