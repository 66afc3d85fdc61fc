"""Shaped locomotion reward terms and their per-step composition."""

from typing import Sequence, Tuple

import numpy as np

from crutchgait.shared.config import RewardConfig
from crutchgait.shared.models import RewardBreakdown, RewardInputs


DEFAULT_REWARD = RewardConfig()

LegAngles = Tuple[float, float, float]


def r_walk(p_x_dot: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Gaussian bonus for tracking the desired forward CoM velocity."""
    return float(np.exp(-cfg.c_walk * (p_x_dot - cfg.v_des) ** 2))


def r_walk_straight(p_y: float) -> float:
    """Penalty on lateral drift."""
    return -abs(float(p_y))


def r_dont_fall(p_z: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Bonus while the base height stays strictly inside the allowed band."""
    return cfg.dont_fall_bonus if cfg.p_z_min < p_z < cfg.p_z_max else 0.0


def r_action(exo_torques: Sequence[float], cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Quadratic penalty on the exoskeleton joint torques."""
    torques = np.asarray(exo_torques, dtype=float)
    return -cfg.c_action * float(torques @ torques)


def r_orientation(a_z: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Quadratic penalty on trunk pitch away from the forward-lean target."""
    return -cfg.orientation_gain * (a_z - cfg.orientation_target) ** 2


def foot_flatness(a_z: float, leg: LegAngles) -> float:
    """Squared absolute foot angle: pitch plus hip, knee and ankle angles."""
    hip, knee, ankle = leg
    return (a_z + hip + knee + ankle) ** 2


def r_flat_contact(
    a_z: float,
    right: LegAngles,
    left: LegAngles,
    cfg: RewardConfig = DEFAULT_REWARD,
) -> float:
    """
    Penalty for feet that are not parallel to the ground.

    Args:
        a_z: Trunk pitch (rad)
        right: (hip, knee, ankle) of the right leg (rad)
        left: (hip, knee, ankle) of the left leg (rad)
        cfg: Reward constants

    Returns:
        -gain * (right flatness + left flatness)^2
    """
    total = foot_flatness(a_z, right) + foot_flatness(a_z, left)
    return -cfg.flat_contact_gain * total**2


def crutch_cost(d_r: float, d_l: float, weight: float, form: str = "linear") -> float:
    """
    Weighted crutch-tip compression, the ground reaction proxy.

    Shared by the crutch reaction reward and the evaluation metric.
    """
    if form == "linear":
        return weight * (d_r + d_l)
    if form == "squared":
        return weight * (d_r**2 + d_l**2)
    raise ValueError(f"Unsupported crutch cost form: {form}")


def r_crutch_reaction_force(d_r: float, d_l: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Penalty proportional to crutch-tip spring compression."""
    return -crutch_cost(d_r, d_l, cfg.w_crutch_reaction_force, cfg.crutch_cost_form)


def r_hip_angle(hip_r: float, hip_l: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Penalty when both hips are flexed at the same time."""
    return -cfg.hip_penalty if hip_r < 0.0 and hip_l < 0.0 else 0.0


def r_ensure_crutch_contact(d_r: float, d_l: float, cfg: RewardConfig = DEFAULT_REWARD) -> float:
    """Penalty when neither crutch is pressed against the ground."""
    threshold = cfg.crutch_contact_threshold
    return -cfg.crutch_contact_penalty if d_r < threshold and d_l < threshold else 0.0


def total_reward(inputs: RewardInputs, cfg: RewardConfig = DEFAULT_REWARD) -> RewardBreakdown:
    """
    Evaluate all nine reward terms and their sum.

    Args:
        inputs: State summary
        cfg: Reward constants

    Returns:
        RewardBreakdown whose total is the sum of the terms in field order
    """
    right = (inputs.hip_r, inputs.knee_r, inputs.ankle_r)
    left = (inputs.hip_l, inputs.knee_l, inputs.ankle_l)
    terms = {
        "r_walk": r_walk(inputs.p_x_dot, cfg),
        "r_walk_straight": r_walk_straight(inputs.p_y),
        "r_dont_fall": r_dont_fall(inputs.p_z, cfg),
        "r_action": r_action(inputs.exo_torques, cfg),
        "r_orientation": r_orientation(inputs.a_z, cfg),
        "r_flat_contact": r_flat_contact(inputs.a_z, right, left, cfg),
        "r_crutch_reaction_force": r_crutch_reaction_force(
            inputs.d_crutch_r, inputs.d_crutch_l, cfg
        ),
        "r_hip_angle": r_hip_angle(inputs.hip_r, inputs.hip_l, cfg),
        "r_ensure_crutch_contact": r_ensure_crutch_contact(
            inputs.d_crutch_r, inputs.d_crutch_l, cfg
        ),
    }
    total = 0.0
    for value in terms.values():
        total += value
    return RewardBreakdown(total=total, **terms)
