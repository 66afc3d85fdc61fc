"""Base class for graph-orchestrated experiment workflows built on LangGraph."""

import uuid
from abc import ABC, abstractmethod
from datetime import datetime
from typing import Any, Dict, Optional, TypedDict
import logging

from crutchgait.shared.message_bus import Message, MessageBus


logger = logging.getLogger(__name__)


class WorkflowState(TypedDict, total=False):
    """Base state carried through a workflow graph."""
    task_id: str
    context: Dict[str, Any]
    result: Optional[Dict[str, Any]]
    error: Optional[str]


class BaseWorkflow(ABC):
    """Workflow whose steps are nodes of a compiled StateGraph."""

    def __init__(
        self,
        message_bus: MessageBus,
        workflow_id: Optional[str] = None,
        workflow_type: str = "base",
    ):
        """
        Initialize the workflow.

        Args:
            message_bus: Message bus for publishing progress events
            workflow_id: Unique identifier for this workflow instance
            workflow_type: Kind of workflow (for logging and event sources)
        """
        self.message_bus = message_bus
        self.workflow_id = workflow_id or f"{workflow_type}-{uuid.uuid4().hex[:8]}"
        self.workflow_type = workflow_type
        self.graph = self._build_graph()
        logger.info(f"{workflow_type.title()} workflow initialized: {self.workflow_id}")

    @abstractmethod
    def _build_graph(self) -> Any:
        """
        Build the workflow's execution graph.

        Returns:
            Compiled StateGraph
        """

    def publish_event(self, event_type: str, payload: Dict[str, Any], topic: str) -> None:
        """
        Publish an event to the message bus.

        Args:
            event_type: Type of event
            payload: Event payload
            topic: Topic to publish to
        """
        message = Message(
            event_type=event_type,
            payload=payload,
            timestamp=datetime.now(),
            source=self.workflow_id,
        )
        self.message_bus.publish(topic, message)
        logger.debug(f"Published {event_type} event to {topic}")

    def execute(self, initial_state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run the graph from an initial state.

        Args:
            initial_state: Initial state for execution

        Returns:
            Final state after execution
        """
        logger.info(f"Executing workflow {self.workflow_id} for task {initial_state.get('task_id')}")
        try:
            final_state = self.graph.invoke(initial_state)
        except Exception as e:
            logger.error(f"Workflow {self.workflow_id} failed: {e}")
            raise
        if final_state.get("error"):
            logger.error(f"Workflow {self.workflow_id} finished with error: {final_state['error']}")
        else:
            logger.info(f"Workflow {self.workflow_id} completed")
        return final_state
