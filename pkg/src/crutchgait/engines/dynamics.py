"""Planar rigid-body dynamics with penalty ground contact and semi-implicit stepping."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from crutchgait.engines.model import (
    LinkFrames,
    RobotModel,
    com_jacobians,
    forward_kinematics,
    point_jacobians,
    point_bias_accelerations,
    sphere_world_centers,
)
from crutchgait.shared.errors import SimulationDivergedError
from crutchgait.shared.models import ContactForce, SimState


logger = logging.getLogger(__name__)

GROUND_LEVEL = 0.0


@dataclass(frozen=True)
class ContactTerms:
    """Per-sphere contact quantities for one state."""
    displacement: np.ndarray
    rate: np.ndarray
    normal: np.ndarray
    slip: np.ndarray
    friction_gain: np.ndarray
    jacobians: np.ndarray

    @property
    def tangential(self) -> np.ndarray:
        return -self.friction_gain * self.slip


@dataclass(frozen=True)
class _Terms:
    frames: LinkFrames
    com_jac: np.ndarray
    mass_matrix: np.ndarray
    bias: np.ndarray


def _check_state(model: RobotModel, q: np.ndarray, qd: np.ndarray) -> None:
    if np.shape(q) != (model.dof,) or np.shape(qd) != (model.dof,):
        raise ValueError(
            f"expected q and qd of length {model.dof}, got {np.shape(q)} and {np.shape(qd)}"
        )


def _inertial_terms(model: RobotModel, q: np.ndarray, qd: np.ndarray) -> _Terms:
    frames = forward_kinematics(model, q)
    jac = com_jacobians(model, frames)
    mass = np.einsum("i,iad,iae->de", model.masses, jac, jac)
    rot = model.angular_jacobian
    mass += rot.T @ (model.inertias[:, None] * rot)
    mass = 0.5 * (mass + mass.T)
    links = np.arange(len(model.links))
    accel = point_bias_accelerations(model, frames, qd, links, frames.coms)
    accel[:, 1] += model.gravity
    bias = np.einsum("i,iad,ia->d", model.masses, jac, accel)
    return _Terms(frames=frames, com_jac=jac, mass_matrix=mass, bias=bias)


def mass_matrix(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """
    Joint-space inertia matrix of the planar tree.

    Args:
        model: Body model
        q: Generalized positions

    Returns:
        Symmetric positive-definite (dof × dof) matrix
    """
    q = np.asarray(q, dtype=float)
    return _inertial_terms(model, q, np.zeros(model.dof)).mass_matrix


def bias_forces(model: RobotModel, q: np.ndarray, qd: np.ndarray) -> np.ndarray:
    """
    Coriolis, centrifugal and gravity generalized forces.

    The equations of motion read ``M(q) q̈ + bias(q, q̇) = τ``.
    """
    q, qd = np.asarray(q, dtype=float), np.asarray(qd, dtype=float)
    _check_state(model, q, qd)
    return _inertial_terms(model, q, qd).bias


def contact_terms(model: RobotModel, frames: LinkFrames, qd: np.ndarray) -> ContactTerms:
    """Penetration, normal force and regularized friction at every sphere's lowest point."""
    centers = sphere_world_centers(model, frames)
    radii = model.sphere_radii
    bottoms = centers - np.stack([np.zeros_like(radii), radii], axis=-1)
    jac = point_jacobians(model, frames, model.sphere_links, bottoms)
    velocity = np.einsum("kad,d->ka", jac, qd)
    displacement = np.maximum(0.0, GROUND_LEVEL - bottoms[:, 1])
    touching = displacement > 0.0
    rate = np.where(touching, -velocity[:, 1], 0.0)
    normal = np.where(
        touching,
        np.maximum(0.0, model.sphere_stiffness * displacement + model.sphere_damping * rate),
        0.0,
    )
    gain = model.friction_coefficient * normal / np.maximum(
        np.abs(velocity[:, 0]), model.friction_velocity
    )
    return ContactTerms(
        displacement=displacement,
        rate=rate,
        normal=normal,
        slip=velocity[:, 0],
        friction_gain=gain,
        jacobians=jac,
    )


def contact_forces(model: RobotModel, q: np.ndarray, qd: np.ndarray) -> List[ContactForce]:
    """
    Ground reaction on each contact sphere.

    Args:
        model: Body model
        q: Generalized positions
        qd: Generalized velocities

    Returns:
        One ContactForce per sphere in model order
    """
    q, qd = np.asarray(q, dtype=float), np.asarray(qd, dtype=float)
    _check_state(model, q, qd)
    terms = contact_terms(model, forward_kinematics(model, q), qd)
    tangential = terms.tangential
    return [
        ContactForce(
            sphere=sphere.name,
            normal=float(terms.normal[i]),
            tangential=float(tangential[i]),
            displacement=float(terms.displacement[i]),
            rate=float(terms.rate[i]),
        )
        for i, sphere in enumerate(model.contact_spheres)
    ]


def limit_excess(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Signed amount by which each joint angle lies outside its anatomical range."""
    angles = q[model.joint_coordinates]
    return np.maximum(0.0, angles - model.joint_upper) + np.minimum(0.0, angles - model.joint_lower)


def clamp_torques(model: RobotModel, torques: np.ndarray) -> np.ndarray:
    """Clip joint torques to the model's limits."""
    torques = np.asarray(torques, dtype=float).reshape(-1)
    if torques.shape != (model.n_joints,):
        raise ValueError(f"expected {model.n_joints} torques, got {torques.shape[0]}")
    return np.clip(torques, -model.torque_limits, model.torque_limits)


def _applied_forces(
    model: RobotModel, q: np.ndarray, torques: np.ndarray, contacts: ContactTerms
) -> np.ndarray:
    generalized = np.zeros(model.dof)
    generalized[model.joint_coordinates] = torques - model.limit_stiffness * limit_excess(model, q)
    if len(model.contact_spheres):
        generalized += contacts.jacobians[:, 1, :].T @ contacts.normal
    return generalized


def forward_dynamics(model: RobotModel, state: SimState, torques: np.ndarray) -> np.ndarray:
    """
    Generalized accelerations for the current state, all forces explicit.

    Args:
        model: Body model
        state: Current state
        torques: Joint torques (clamped to limits)

    Returns:
        q̈ of length dof
    """
    q, qd = state.q, state.qd
    _check_state(model, q, qd)
    tau = clamp_torques(model, torques)
    terms = _inertial_terms(model, q, qd)
    contacts = contact_terms(model, terms.frames, qd)
    generalized = _applied_forces(model, q, tau, contacts)
    if len(model.contact_spheres):
        generalized += contacts.jacobians[:, 0, :].T @ contacts.tangential
    active = limit_excess(model, q) != 0.0
    coords = model.joint_coordinates[active]
    generalized[coords] -= model.limit_damping * qd[coords]
    return np.linalg.solve(terms.mass_matrix, generalized - terms.bias)


def initial_state(
    model: RobotModel, q: np.ndarray, qd: Optional[np.ndarray] = None, time: float = 0.0
) -> SimState:
    """Build a state with contact coordinates consistent with (q, qd)."""
    q = np.array(q, dtype=float)
    qd = np.zeros(model.dof) if qd is None else np.array(qd, dtype=float)
    _check_state(model, q, qd)
    contacts = contact_terms(model, forward_kinematics(model, q), qd)
    return SimState(
        q=q,
        qd=qd,
        contact_disp=contacts.displacement,
        contact_rate=contacts.rate,
        last_torques=np.zeros(model.n_joints),
        time=time,
    )


def step(model: RobotModel, state: SimState, torques: np.ndarray, dt: float) -> SimState:
    """
    Advance the simulation by one timestep.

    Velocities are updated first and positions use the new velocities. Contact
    springs and joint-limit springs are explicit; contact damping, friction and
    joint-limit damping are integrated linearly-implicitly.

    Args:
        model: Body model
        state: Current state (not modified)
        torques: Joint torques, clipped to the model's limits
        dt: Timestep in seconds

    Returns:
        Next state

    Raises:
        ValueError: If dt is not positive or dimensions mismatch
        SimulationDivergedError: If the next state is not finite
    """
    if not dt > 0.0:
        raise ValueError(f"timestep must be positive, got {dt}")
    q, qd = state.q, state.qd
    _check_state(model, q, qd)
    tau = clamp_torques(model, torques)

    terms = _inertial_terms(model, q, qd)
    contacts = contact_terms(model, terms.frames, qd)
    lhs = terms.mass_matrix.copy()
    generalized = np.zeros(model.dof)
    excess = limit_excess(model, q)
    generalized[model.joint_coordinates] = tau - model.limit_stiffness * excess

    if len(model.contact_spheres):
        normal_jac = contacts.jacobians[:, 1, :]
        slip_jac = contacts.jacobians[:, 0, :]
        # damping acts only on spheres whose normal force is not clamped to zero
        loaded = contacts.normal > 0.0
        damping = np.where(loaded, model.sphere_damping, 0.0)
        spring = np.where(loaded, model.sphere_stiffness * contacts.displacement, 0.0)
        generalized += normal_jac.T @ spring
        lhs += dt * (normal_jac.T * damping) @ normal_jac
        lhs += dt * (slip_jac.T * contacts.friction_gain) @ slip_jac

    coords = model.joint_coordinates[excess != 0.0]
    lhs[coords, coords] += dt * model.limit_damping

    rhs = terms.mass_matrix @ qd + dt * (generalized - terms.bias)
    with np.errstate(all="ignore"):
        try:
            qd_next = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as e:
            raise SimulationDivergedError(f"singular system at t={state.time:.4f}s") from e
        q_next = q + dt * qd_next

    if not (np.all(np.isfinite(qd_next)) and np.all(np.isfinite(q_next))):
        raise SimulationDivergedError(f"non-finite state at t={state.time + dt:.4f}s")
    following = contact_terms(model, forward_kinematics(model, q_next), qd_next)
    next_state = SimState(
        q=q_next,
        qd=qd_next,
        contact_disp=following.displacement,
        contact_rate=following.rate,
        last_torques=tau,
        time=state.time + dt,
    )
    if not next_state.is_finite():
        raise SimulationDivergedError(f"non-finite contact state at t={next_state.time:.4f}s")
    return next_state


def mechanical_energy(model: RobotModel, q: np.ndarray, qd: np.ndarray) -> float:
    """Kinetic plus gravitational and joint-limit spring potential energy."""
    q, qd = np.asarray(q, dtype=float), np.asarray(qd, dtype=float)
    _check_state(model, q, qd)
    terms = _inertial_terms(model, q, qd)
    kinetic = 0.5 * qd @ terms.mass_matrix @ qd
    potential = model.gravity * float(model.masses @ terms.frames.coms[:, 1])
    potential += 0.5 * model.limit_stiffness * float(np.sum(limit_excess(model, q) ** 2))
    return float(kinetic + potential)


def mirror_state(model: RobotModel, state: SimState) -> SimState:
    """Relabel a state left to right."""
    return SimState(
        q=state.q[model.mirror_permutation],
        qd=state.qd[model.mirror_permutation],
        contact_disp=state.contact_disp[model.sphere_mirror_permutation],
        contact_rate=state.contact_rate[model.sphere_mirror_permutation],
        last_torques=state.last_torques[model.joint_mirror_permutation],
        time=state.time,
    )


SPHERE_COLUMNS: Dict[str, str] = {
    "foot_l": "d_fl",
    "foot_r": "d_fr",
    "crutch_l": "d_cl",
    "crutch_r": "d_cr",
}


class TrajectoryRecorder:
    """Collects states and dumps them as a per-step CSV."""

    def __init__(self, model: RobotModel):
        self.model = model
        joints = range(model.n_joints)
        base = ["qx", "qz", "pitch"] if model.floating_base else []
        self.columns = (
            ["time"]
            + base
            + [f"j{i}" for i in joints]
            + [f"dj{i}" for i in joints]
            + [SPHERE_COLUMNS.get(s.name, f"d_{s.name}") for s in model.contact_spheres]
            + [f"tau{i}" for i in joints]
        )
        self._rows: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._rows)

    def record(self, state: SimState) -> None:
        joints = self.model.joint_coordinates
        base = state.q[:3] if self.model.floating_base else np.empty(0)
        self._rows.append(np.concatenate([
            [state.time], base, state.q[joints], state.qd[joints],
            state.contact_disp, state.last_torques,
        ]))

    def to_frame(self) -> pd.DataFrame:
        data = np.array(self._rows).reshape(-1, len(self.columns))
        return pd.DataFrame(data, columns=self.columns)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.12g")
        logger.info(f"Wrote trajectory dump with {len(self)} rows to {path}")
        return path
