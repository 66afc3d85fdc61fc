"""Pytest configuration and fixtures."""

from typing import Callable

import pytest

from crutchgait.engines.model import Joint, Link, RobotModel, build_subject_model
from crutchgait.shared.config import ModelConfig, SubjectMeasurements
from crutchgait.shared.message_bus import InMemoryMessageBus


@pytest.fixture
def message_bus():
    """Provide an in-memory message bus for testing."""
    bus = InMemoryMessageBus()
    yield bus
    bus.close()


@pytest.fixture(scope="session")
def subject_model() -> RobotModel:
    """Full human-exoskeleton-crutch model of the reference subject."""
    return build_subject_model(SubjectMeasurements(), ModelConfig())


def make_pendulum(
    mass: float = 1.0, length: float = 1.0, com: float = 0.5, gravity: float = 9.81
) -> RobotModel:
    """Uniform rod hinged at the world origin."""
    rod = Link(
        name="rod",
        length=length,
        mass=mass,
        inertia_about_com=mass * length**2 / 12.0,
        com_offset=com,
        parent_joint="hinge",
    )
    hinge = Joint("hinge", coordinate=0, link=0, lower=-10.0, upper=10.0, torque_limit=1.0)
    return RobotModel(links=(rod,), joints=(hinge,), gravity=gravity, floating_base=False)


@pytest.fixture
def pendulum_factory() -> Callable[..., RobotModel]:
    """Builder of single-pendulum reductions of the engine."""
    return make_pendulum
