"""
Planar human-exoskeleton-crutch body model.

The model is a generic planar kinematic tree. Every link rotates about the
sagittal-plane normal; the root link either floats (coordinates x, z, pitch)
or is hinged at a fixed world point. All link and joint angles share one
sign convention: a positive rotation turns the link's +x axis downwards, so a
positive pitch leans the trunk forward and a positive knee angle swings the
shank backwards.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from crutchgait.shared.config import ModelConfig, SubjectMeasurements, validate_measurements


logger = logging.getLogger(__name__)

Vec2 = Tuple[float, float]

DOWN: Vec2 = (0.0, -1.0)
UP: Vec2 = (0.0, 1.0)

BASE_COORDINATES = ("base_x", "base_z", "pitch")
JOINT_NAMES = (
    "ankle_l", "knee_l", "hip_l",
    "ankle_r", "knee_r", "hip_r",
    "shoulder_l", "arm_l",
    "shoulder_r", "arm_r",
)
EXO_JOINT_COUNT = 6
CONTACT_NAMES = ("foot_l", "foot_r", "crutch_l", "crutch_r")


@dataclass(frozen=True)
class Link:
    """
    Rigid planar segment.

    ``mass`` is the human part of the segment; ``exo_mass`` is hardware
    (exoskeleton cuffs, crutch) rigidly attached to it. ``com_offset`` and
    ``inertia_about_com`` describe the combined body along ``axis``.
    """
    name: str
    length: float
    mass: float
    inertia_about_com: float
    com_offset: float
    parent_joint: str
    parent: int = -1
    axis: Vec2 = DOWN
    joint_origin: Vec2 = (0.0, 0.0)
    exo_mass: float = 0.0

    def __post_init__(self) -> None:
        for attr in ("length", "mass", "inertia_about_com", "exo_mass"):
            if getattr(self, attr) < 0.0:
                raise ValueError(f"link {self.name}: {attr} must be non-negative")

    @property
    def total_mass(self) -> float:
        return self.mass + self.exo_mass

    @property
    def com_local(self) -> np.ndarray:
        return self.com_offset * np.asarray(self.axis, dtype=float)


@dataclass(frozen=True)
class Joint:
    """Revolute joint driving one generalized coordinate."""
    name: str
    coordinate: int
    link: int
    lower: float
    upper: float
    torque_limit: float


@dataclass(frozen=True)
class ContactSphere:
    """Ground-contact sphere rigidly attached to a link."""
    name: str
    link: int
    center: Vec2
    radius: float
    stiffness: float
    damping: float


@dataclass(frozen=True)
class LinkFrames:
    """World pose of every link for one configuration."""
    angles: np.ndarray
    pivots: np.ndarray
    coms: np.ndarray


@dataclass(frozen=True)
class RobotModel:
    """Immutable planar tree with joints, contact spheres and physical constants."""

    links: Tuple[Link, ...]
    joints: Tuple[Joint, ...]
    contact_spheres: Tuple[ContactSphere, ...] = ()
    gravity: float = 9.81
    floating_base: bool = True
    friction_coefficient: float = 0.8
    friction_velocity: float = 0.05
    limit_stiffness: float = 200.0
    limit_damping: float = 5.0

    def __post_init__(self) -> None:
        if not self.links:
            raise ValueError("model needs at least one link")
        for index, link in enumerate(self.links):
            if index == 0 and link.parent != -1:
                raise ValueError("link 0 must be the root")
            if index > 0 and not 0 <= link.parent < index:
                raise ValueError(f"link {link.name}: parent must precede it")
        driven = [joint.link for joint in self.joints]
        expected = list(range(1 if self.floating_base else 0, len(self.links)))
        if sorted(driven) != expected:
            raise ValueError("every non-floating link needs exactly one joint")
        coordinates = sorted(joint.coordinate for joint in self.joints)
        offset = len(BASE_COORDINATES) if self.floating_base else 0
        if coordinates != list(range(offset, offset + len(self.joints))):
            raise ValueError("joint coordinates must be contiguous after the base")
        for sphere in self.contact_spheres:
            if not 0 <= sphere.link < len(self.links):
                raise ValueError(f"sphere {sphere.name} is attached to an unknown link")

    @property
    def dof(self) -> int:
        offset = len(BASE_COORDINATES) if self.floating_base else 0
        return offset + len(self.joints)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def total_mass(self) -> float:
        """Mass of everything simulated, exoskeleton and crutches included."""
        return float(self.masses.sum())

    @property
    def human_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    @cached_property
    def joint_coordinates(self) -> np.ndarray:
        return np.array([joint.coordinate for joint in self.joints], dtype=int)

    @cached_property
    def link_coordinates(self) -> np.ndarray:
        coords = np.empty(len(self.links), dtype=int)
        for joint in self.joints:
            coords[joint.link] = joint.coordinate
        if self.floating_base:
            coords[0] = BASE_COORDINATES.index("pitch")
        return coords

    @cached_property
    def parents(self) -> np.ndarray:
        return np.array([link.parent for link in self.links], dtype=int)

    @cached_property
    def ancestor_mask(self) -> np.ndarray:
        """mask[i, k] is True when link k is link i or one of its ancestors."""
        n = len(self.links)
        mask = np.eye(n, dtype=bool)
        for index in range(1, n):
            mask[index] |= mask[self.parents[index]]
        return mask

    @cached_property
    def angular_jacobian(self) -> np.ndarray:
        """Constant map from generalized velocities to absolute link angular rates."""
        jac = np.zeros((len(self.links), self.dof))
        jac[:, self.link_coordinates] = self.ancestor_mask
        return jac

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([link.total_mass for link in self.links])

    @cached_property
    def inertias(self) -> np.ndarray:
        return np.array([link.inertia_about_com for link in self.links])

    @cached_property
    def com_locals(self) -> np.ndarray:
        return np.array([link.com_local for link in self.links]).reshape(-1, 2)

    @cached_property
    def origins(self) -> np.ndarray:
        return np.array([link.joint_origin for link in self.links], dtype=float)

    @cached_property
    def torque_limits(self) -> np.ndarray:
        return np.array([joint.torque_limit for joint in self.joints])

    @cached_property
    def joint_lower(self) -> np.ndarray:
        return np.array([joint.lower for joint in self.joints])

    @cached_property
    def joint_upper(self) -> np.ndarray:
        return np.array([joint.upper for joint in self.joints])

    @cached_property
    def sphere_links(self) -> np.ndarray:
        return np.array([sphere.link for sphere in self.contact_spheres], dtype=int)

    @cached_property
    def sphere_centers(self) -> np.ndarray:
        return np.array([sphere.center for sphere in self.contact_spheres], dtype=float).reshape(-1, 2)

    @cached_property
    def sphere_radii(self) -> np.ndarray:
        return np.array([sphere.radius for sphere in self.contact_spheres])

    @cached_property
    def sphere_stiffness(self) -> np.ndarray:
        return np.array([sphere.stiffness for sphere in self.contact_spheres])

    @cached_property
    def sphere_damping(self) -> np.ndarray:
        return np.array([sphere.damping for sphere in self.contact_spheres])

    @cached_property
    def coordinate_names(self) -> Tuple[str, ...]:
        base = BASE_COORDINATES if self.floating_base else ()
        ordered = sorted(self.joints, key=lambda joint: joint.coordinate)
        return base + tuple(joint.name for joint in ordered)

    @cached_property
    def mirror_permutation(self) -> np.ndarray:
        """Coordinate permutation swapping every *_l coordinate with its *_r twin."""
        return _swap_sides(self.coordinate_names)

    @cached_property
    def joint_mirror_permutation(self) -> np.ndarray:
        return _swap_sides([joint.name for joint in self.joints])

    @cached_property
    def sphere_mirror_permutation(self) -> np.ndarray:
        return _swap_sides([sphere.name for sphere in self.contact_spheres])

    def joint_index(self, name: str) -> int:
        for index, joint in enumerate(self.joints):
            if joint.name == name:
                return index
        raise KeyError(f"unknown joint: {name}")

    def sphere_index(self, name: str) -> int:
        for index, sphere in enumerate(self.contact_spheres):
            if sphere.name == name:
                return index
        raise KeyError(f"unknown contact sphere: {name}")


def _swap_sides(names: Sequence[str]) -> np.ndarray:
    lookup = {name: index for index, name in enumerate(names)}
    perm = np.arange(len(names))
    for index, name in enumerate(names):
        if name.endswith("_l") or name.endswith("_r"):
            twin = name[:-1] + ("r" if name.endswith("_l") else "l")
            if twin in lookup:
                perm[index] = lookup[twin]
    return perm


def rotate(vectors: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotate planar (x, z) vectors by angles about +y (positive turns +x towards -z)."""
    vectors = np.asarray(vectors, dtype=float)
    c, s = np.cos(angles), np.sin(angles)
    x, z = vectors[..., 0], vectors[..., 1]
    return np.stack([x * c + z * s, -x * s + z * c], axis=-1)


def perpendicular(vectors: np.ndarray) -> np.ndarray:
    """Derivative of ``rotate`` with respect to the angle, applied to rotated vectors."""
    return np.stack([vectors[..., 1], -vectors[..., 0]], axis=-1)


def _check_q(model: RobotModel, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise ValueError(f"expected {model.dof} generalized coordinates, got shape {q.shape}")
    return q


def forward_kinematics(model: RobotModel, q: np.ndarray) -> LinkFrames:
    """
    Compute absolute link angles, joint pivots and CoM positions.

    Args:
        model: Body model
        q: Generalized positions

    Returns:
        LinkFrames with one row per link
    """
    q = _check_q(model, q)
    n = len(model.links)
    relative = q[model.link_coordinates]
    angles = np.empty(n)
    pivots = np.empty((n, 2))
    for index in range(n):
        parent = model.parents[index]
        if parent < 0:
            angles[index] = relative[index]
            pivots[index] = q[:2] if model.floating_base else model.origins[index]
        else:
            angles[index] = angles[parent] + relative[index]
            pivots[index] = pivots[parent] + rotate(model.origins[index], angles[parent])
    coms = pivots + rotate(model.com_locals, angles)
    return LinkFrames(angles=angles, pivots=pivots, coms=coms)


def point_jacobians(
    model: RobotModel,
    frames: LinkFrames,
    link_indices: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """
    Translational Jacobians of world points rigidly attached to links.

    Args:
        model: Body model
        frames: Kinematics of the current configuration
        link_indices: Link carrying each point, shape (K,)
        points: World positions, shape (K, 2)

    Returns:
        Array of shape (K, 2, dof)
    """
    link_indices = np.asarray(link_indices, dtype=int)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    jac = np.zeros((len(link_indices), 2, model.dof))
    if model.floating_base:
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
    mask = model.ancestor_mask[link_indices]
    lever = points[:, None, :] - frames.pivots[None, :, :]
    columns = perpendicular(lever) * mask[..., None]
    jac[:, :, model.link_coordinates] += np.swapaxes(columns, 1, 2)
    return jac


def absolute_rates(model: RobotModel, qd: np.ndarray) -> np.ndarray:
    """Absolute angular velocity of every link."""
    return model.angular_jacobian @ qd


def point_bias_accelerations(
    model: RobotModel,
    frames: LinkFrames,
    qd: np.ndarray,
    link_indices: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """Velocity-product term dJ/dt·qd of attached points, shape (K, 2)."""
    omega_sq = absolute_rates(model, qd) ** 2
    parent_sq = np.where(model.parents >= 0, omega_sq[np.maximum(model.parents, 0)], 0.0)
    increments = omega_sq - parent_sq
    mask = model.ancestor_mask[np.asarray(link_indices, dtype=int)].astype(float)
    lever = np.asarray(points, dtype=float).reshape(-1, 2)[:, None, :] - frames.pivots[None, :, :]
    return -np.einsum("kn,n,kna->ka", mask, increments, lever)


def com_jacobians(model: RobotModel, frames: LinkFrames) -> np.ndarray:
    """Jacobians of every link CoM, shape (n_links, 2, dof)."""
    return point_jacobians(model, frames, np.arange(len(model.links)), frames.coms)


def total_com(model: RobotModel, q: np.ndarray) -> Tuple[float, float]:
    """
    Mass-weighted mean of link CoM world positions.

    Args:
        model: Body model
        q: Generalized positions

    Returns:
        (x, z) of the system centre of mass in metres
    """
    frames = forward_kinematics(model, q)
    com = model.masses @ frames.coms / model.total_mass
    return float(com[0]), float(com[1])


def com_jacobian(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Jacobian (2 × dof) of the system centre of mass."""
    frames = forward_kinematics(model, q)
    return np.einsum("i,iad->ad", model.masses, com_jacobians(model, frames)) / model.total_mass


def aggregate_inertia(model: RobotModel, q: np.ndarray) -> float:
    """
    Planar moment of inertia of all links about the system CoM.

    Args:
        model: Body model
        q: Generalized positions

    Returns:
        Inertia in kg·m² (parallel-axis theorem per link)
    """
    frames = forward_kinematics(model, q)
    com = model.masses @ frames.coms / model.total_mass
    offsets = frames.coms - com
    return float(model.inertias.sum() + model.masses @ np.sum(offsets**2, axis=1))


def mirror_coordinates(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Swap left and right coordinates of a position or velocity vector."""
    return _check_q(model, q)[model.mirror_permutation]


def sphere_world_centers(model: RobotModel, frames: LinkFrames) -> np.ndarray:
    """World centres of all contact spheres, shape (S, 2)."""
    idx = model.sphere_links
    return frames.pivots[idx] + rotate(model.sphere_centers, frames.angles[idx])


def _solve_reach(lever: np.ndarray, height: float) -> float:
    """Rotation that lowers a lever hanging from a pivot by exactly ``height``, tip forward."""
    a, b = float(lever[0]), float(lever[1])
    reach = float(np.hypot(a, b))
    phase = float(np.arctan2(a, b))
    base = float(np.arccos(np.clip(-height / reach, -1.0, 1.0)))
    candidates = [base - phase, -base - phase]
    candidates = [float(np.arctan2(np.sin(c), np.cos(c))) for c in candidates]
    return max(candidates, key=lambda s: a * np.cos(s) + b * np.sin(s))


def nominal_pose(model: RobotModel) -> np.ndarray:
    """
    Standing pose: trunk upright, legs straight, feet just touching the ground,
    arms straight with each crutch tip just touching the ground ahead.

    Returns:
        Generalized positions of the pose
    """
    q = np.zeros(model.dof)
    if not model.floating_base or not model.contact_spheres:
        return q
    frames = forward_kinematics(model, q)
    centers = sphere_world_centers(model, frames)
    feet = [i for i, s in enumerate(model.contact_spheres) if s.name.startswith("foot")]
    support = feet or list(range(len(model.contact_spheres)))
    q[1] = -min(centers[i, 1] - model.sphere_radii[i] for i in support)

    for index, sphere in enumerate(model.contact_spheres):
        if not sphere.name.startswith("crutch"):
            continue
        frames = forward_kinematics(model, q)
        chain = sphere.link
        while model.parents[chain] > 0:
            chain = model.parents[chain]
        center = sphere_world_centers(model, frames)[index]
        pivot = frames.pivots[chain]
        coordinate = model.link_coordinates[chain]
        q[coordinate] += _solve_reach(center - pivot, pivot[1] - sphere.radius)
    return q


def _cylinder(mass: float, length: float, radius: float) -> Tuple[float, float, float]:
    return mass, 0.5 * length, mass * (3.0 * radius**2 + length**2) / 12.0


def _combine(parts: Sequence[Tuple[float, float, float]]) -> Tuple[float, float, float]:
    """Merge (mass, com offset, inertia about own com) parts lying on one axis."""
    mass = sum(p[0] for p in parts)
    if mass == 0.0:
        return 0.0, 0.0, 0.0
    offset = sum(p[0] * p[1] for p in parts) / mass
    inertia = sum(p[2] + p[0] * (p[1] - offset) ** 2 for p in parts)
    return mass, offset, inertia


def build_subject_model(
    measurements: SubjectMeasurements,
    cfg: Optional[ModelConfig] = None,
) -> RobotModel:
    """
    Build the sagittal human-exoskeleton-crutch tree from measurements.

    Args:
        measurements: Anthropometric measurements of the subject
        cfg: Exoskeleton, crutch, contact and joint settings (defaults if None)

    Returns:
        RobotModel with 11 links, 10 joints and 4 contact spheres

    Raises:
        InvalidMeasurementsError: If the measurements are not positive or not
            vertically ordered
    """
    cfg = cfg or ModelConfig()
    m = measurements
    validate_measurements(m)

    fractions = cfg.mass_fractions.normalized()
    segment = {
        name: m.mass * fractions[name]
        for name in ("foot", "shank", "thigh", "upper_arm", "forearm")
    }
    trunk_mass = m.mass - 2.0 * sum(segment.values())

    thigh = m.hip_height - m.knee_height
    shank = m.knee_height - m.ankle_height
    torso = m.shoulder_height - m.hip_height
    head_and_trunk = m.height - m.hip_height
    arm = 0.5 * (m.arm_span - m.shoulder_width)
    upper_arm = cfg.upper_arm_ratio * arm
    forearm = arm - upper_arm
    sole = np.array([cfg.sole_forward_ratio * m.foot_size, -m.ankle_height])
    foot_length = float(np.hypot(*sole))
    foot_axis = (float(sole[0] / foot_length), float(sole[1] / foot_length))
    crutch_link = forearm + cfg.crutch_length
    r = cfg.contact_radius

    trunk_human = (
        trunk_mass,
        0.5 * head_and_trunk,
        trunk_mass * (head_and_trunk**2 + cfg.trunk_depth**2) / 12.0,
    )
    _, trunk_com, trunk_inertia = _combine([trunk_human, (cfg.exo_trunk_mass, cfg.exo_trunk_offset, 0.0)])
    _, thigh_com, thigh_inertia = _combine([
        _cylinder(segment["thigh"], thigh, cfg.thigh_radius),
        (cfg.exo_thigh_mass, 0.5 * thigh, cfg.exo_thigh_mass * thigh**2 / 12.0),
    ])
    _, shank_com, shank_inertia = _combine([
        _cylinder(segment["shank"], shank, cfg.shank_radius),
        (cfg.exo_shank_mass, 0.5 * shank, cfg.exo_shank_mass * shank**2 / 12.0),
    ])
    foot_inertia = segment["foot"] * (m.foot_size**2 + m.ankle_height**2) / 12.0
    _, upper_com, upper_inertia = _cylinder(segment["upper_arm"], upper_arm, cfg.upper_arm_radius)
    _, fore_com, fore_inertia = _combine([
        _cylinder(segment["forearm"], forearm, cfg.forearm_radius),
        (
            cfg.crutch_mass,
            forearm + 0.5 * cfg.crutch_length,
            cfg.crutch_mass * cfg.crutch_length**2 / 12.0,
        ),
    ])

    links: List[Link] = [
        Link("trunk", torso, trunk_mass, trunk_inertia, trunk_com, "floating_base",
             axis=UP, exo_mass=cfg.exo_trunk_mass),
    ]
    joint_links: Dict[str, int] = {}
    for side in ("l", "r"):
        base = len(links)
        links.extend([
            Link(f"thigh_{side}", thigh, segment["thigh"], thigh_inertia, thigh_com,
                 f"hip_{side}", parent=0, exo_mass=cfg.exo_thigh_mass),
            Link(f"shank_{side}", shank, segment["shank"], shank_inertia, shank_com,
                 f"knee_{side}", parent=base, joint_origin=(0.0, -thigh),
                 exo_mass=cfg.exo_shank_mass),
            Link(f"foot_{side}", foot_length, segment["foot"], foot_inertia, 0.5 * foot_length,
                 f"ankle_{side}", parent=base + 1, axis=foot_axis, joint_origin=(0.0, -shank)),
        ])
        joint_links.update({f"hip_{side}": base, f"knee_{side}": base + 1, f"ankle_{side}": base + 2})
    for side in ("l", "r"):
        base = len(links)
        links.extend([
            Link(f"upper_arm_{side}", upper_arm, segment["upper_arm"], upper_inertia, upper_com,
                 f"shoulder_{side}", parent=0, joint_origin=(0.0, torso)),
            Link(f"forearm_{side}", crutch_link, segment["forearm"], fore_inertia, fore_com,
                 f"arm_{side}", parent=base, joint_origin=(0.0, -upper_arm),
                 exo_mass=cfg.crutch_mass),
        ])
        joint_links.update({f"shoulder_{side}": base, f"arm_{side}": base + 1})

    joints = []
    for index, name in enumerate(JOINT_NAMES):
        settings = cfg.joints[name[:-2]]
        joints.append(Joint(
            name=name,
            coordinate=len(BASE_COORDINATES) + index,
            link=joint_links[name],
            lower=settings.lower,
            upper=settings.upper,
            torque_limit=settings.torque_limit,
        ))

    def sphere(name: str, link: str, center: Vec2) -> ContactSphere:
        index = next(i for i, candidate in enumerate(links) if candidate.name == link)
        return ContactSphere(name, index, center, r, cfg.contact_stiffness, cfg.contact_damping)

    foot_center = (float(sole[0]), float(sole[1] + r))
    spheres = (
        sphere("foot_l", "foot_l", foot_center),
        sphere("foot_r", "foot_r", foot_center),
        sphere("crutch_l", "forearm_l", (0.0, -(crutch_link - r))),
        sphere("crutch_r", "forearm_r", (0.0, -(crutch_link - r))),
    )

    model = RobotModel(
        links=tuple(links),
        joints=tuple(joints),
        contact_spheres=spheres,
        gravity=cfg.gravity,
        floating_base=True,
        friction_coefficient=cfg.friction_coefficient,
        friction_velocity=cfg.friction_velocity,
        limit_stiffness=cfg.limit_stiffness,
        limit_damping=cfg.limit_damping,
    )
    logger.info(
        f"Built subject model: {len(links)} links, {len(joints)} joints, "
        f"human mass {model.human_mass:.2f} kg, total mass {model.total_mass:.2f} kg"
    )
    return model


def format_parameter_table(model: RobotModel) -> str:
    """Render link, joint and contact parameters as plain-text tables."""
    links = pd.DataFrame([
        {
            "link": link.name,
            "parent": model.links[link.parent].name if link.parent >= 0 else "-",
            "joint": link.parent_joint,
            "length_m": link.length,
            "mass_kg": link.mass,
            "exo_mass_kg": link.exo_mass,
            "com_offset_m": link.com_offset,
            "inertia_kgm2": link.inertia_about_com,
        }
        for link in model.links
    ])
    joints = pd.DataFrame([
        {
            "joint": joint.name,
            "coordinate": joint.coordinate,
            "link": model.links[joint.link].name,
            "lower_rad": joint.lower,
            "upper_rad": joint.upper,
            "torque_limit_Nm": joint.torque_limit,
        }
        for joint in model.joints
    ])
    spheres = pd.DataFrame([
        {
            "sphere": s.name,
            "link": model.links[s.link].name,
            "center_x_m": s.center[0],
            "center_z_m": s.center[1],
            "radius_m": s.radius,
            "stiffness_N_per_m": s.stiffness,
            "damping_Ns_per_m": s.damping,
        }
        for s in model.contact_spheres
    ])
    header = (
        f"human mass {model.human_mass:.6f} kg, total mass {model.total_mass:.6f} kg, "
        f"gravity {model.gravity} m/s^2, dof {model.dof}"
    )
    sections = [header, "", "LINKS", links.to_string(index=False), "", "JOINTS",
                joints.to_string(index=False)]
    if not spheres.empty:
        sections += ["", "CONTACT SPHERES", spheres.to_string(index=False)]
    return "\n".join(sections) + "\n"
