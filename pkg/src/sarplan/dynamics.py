"""Discrete reduced-order robot models.

Both models advance in fixed-duration steps of ``step_duration`` seconds:
the step-to-step 3-D linear inverted pendulum (LIP) for bipeds and an exactly
discretized 10-D near-hover model for quadrotors. All functions are pure.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LipParams",
    "LipState",
    "LipInput",
    "QuadParams",
    "QuadState",
    "QuadInput",
    "wrap_angle",
    "lip_travel",
    "lip_step",
    "quad_matrices",
    "quad_step",
]

logger = logging.getLogger(__name__)

GRAVITY = 9.81

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(theta, _TWO_PI)
    if w <= -math.pi:
        w += _TWO_PI
    return w


@dataclass(frozen=True)
class LipParams:
    """Biped LIP parameters; ``beta = sqrt(g / com_height)`` is derived."""

    step_duration: float = 0.4
    com_height: float = 0.9
    gravity: float = GRAVITY
    max_foot_offset: float = 0.3
    max_heading_change: float = 0.4
    max_velocity: float = 0.4

    def __post_init__(self):
        if self.step_duration <= 0:
            raise ValueError("step_duration must be > 0")
        if self.com_height <= 0:
            raise ValueError("com_height must be > 0")

    @property
    def beta(self) -> float:
        return math.sqrt(self.gravity / self.com_height)


@dataclass(frozen=True)
class LipState:
    """Biped CoM state at a foot-contact switching instant.

    ``position`` is the 3-D world location, ``sagittal_velocity`` the CoM
    velocity along the heading, ``heading`` the yaw in (-pi, pi].
    """

    position: tuple[float, float, float]
    sagittal_velocity: float
    heading: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (*self.position, self.sagittal_velocity, self.heading)):
            raise ValueError("LipState fields must be finite")

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.position[:2])


@dataclass(frozen=True)
class LipInput:
    """One step's control: sagittal foot offset from the CoM and heading change."""

    foot_offset: float
    heading_change: float


def lip_travel(foot_offset: float, velocity: float, params: LipParams) -> float:
    """Sagittal CoM travel of one LIP step.

    Closed form of the apex-to-switch map under the pendulum ODE
    ``x'' = beta^2 (x - p_foot)`` with the stance foot at
    ``foot_offset`` ahead of the CoM:
    ``dx = foot_offset*(1 - cosh(beta*D)) + sinh(beta*D)/beta * velocity``.
    """
    bd = params.beta * params.step_duration
    return foot_offset * (1.0 - math.cosh(bd)) + math.sinh(bd) / params.beta * velocity


def lip_step(state: LipState, control: LipInput, sag_slope: float, params: LipParams) -> LipState:
    """Advance the biped one walking step.

    ``sag_slope`` is the terrain slope along the current heading at the
    pre-step position; it advances the height by ``sag_slope * dx``.
    Raises ``ValueError`` when the control violates its box bounds.
    """
    if abs(control.foot_offset) > params.max_foot_offset + 1e-12:
        raise ValueError(
            f"foot_offset {control.foot_offset:.4f} exceeds bound {params.max_foot_offset}"
        )
    if abs(control.heading_change) > params.max_heading_change + 1e-12:
        raise ValueError(
            f"heading_change {control.heading_change:.4f} exceeds bound "
            f"{params.max_heading_change}"
        )
    x, y, z = state.position
    dx = lip_travel(control.foot_offset, state.sagittal_velocity, params)
    bd = params.beta * params.step_duration
    new_velocity = (
        math.cosh(bd) * state.sagittal_velocity
        - params.beta * math.sinh(bd) * control.foot_offset
    )
    return LipState(
        position=(
            x + dx * math.cos(state.heading),
            y + dx * math.sin(state.heading),
            z + sag_slope * dx,
        ),
        sagittal_velocity=new_velocity,
        heading=wrap_angle(state.heading + control.heading_change),
    )


@dataclass(frozen=True)
class QuadParams:
    """Near-hover quadrotor parameters.

    Attitude tracks the commanded attitude through a first-order lag with
    time constant ``attitude_lag``; horizontal acceleration couples as
    ``g * attitude``; vertical velocity integrates ``thrust - g``.
    """

    step_duration: float = 0.4
    gravity: float = GRAVITY
    attitude_lag: float = 0.15
    max_attitude: float = 0.3
    max_attitude_cmd: float = 0.3
    max_thrust_delta: float = 2.0
    max_velocity: float = 1.5


@dataclass(frozen=True)
class QuadState:
    """10-D quadrotor state: position, velocity, pitch/roll, pitch/roll rate."""

    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    attitude: tuple[float, float] = (0.0, 0.0)
    attitude_rate: tuple[float, float] = (0.0, 0.0)

    def as_vector(self) -> np.ndarray:
        return np.array(
            [*self.position, *self.velocity, *self.attitude, *self.attitude_rate]
        )

    @staticmethod
    def from_vector(v) -> "QuadState":
        v = np.asarray(v, dtype=float)
        return QuadState(
            position=(v[0], v[1], v[2]),
            velocity=(v[3], v[4], v[5]),
            attitude=(v[6], v[7]),
            attitude_rate=(v[8], v[9]),
        )

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.position[:2])


@dataclass(frozen=True)
class QuadInput:
    """Commanded pitch, commanded roll, and total vertical thrust (m/s^2)."""

    desired_pitch: float
    desired_roll: float
    vertical_thrust: float


@functools.lru_cache(maxsize=8)
def quad_matrices(params: QuadParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact discrete-time matrices (A, B, c) for the near-hover model.

    State ordering: (x, y, z, vx, vy, vz, pitch, roll, pitch_rate, roll_rate);
    input ordering: (desired_pitch, desired_roll, vertical_thrust). The update
    is ``s' = A s + B u + c``, the exact solution over one step of

        att'  = (cmd - att) / tau
        vel'  = g * att        (per horizontal axis)
        pos'  = vel
        vz'   = thrust - g

    with the attitude rate defined as the lag's instantaneous rate.
    """
    d = params.step_duration
    tau = params.attitude_lag
    g = params.gravity
    decay = math.exp(-d / tau)

    # per-axis coefficients from integrating the lag analytically
    att_from_att = decay
    att_from_cmd = 1.0 - decay
    vel_from_att = g * tau * (1.0 - decay)
    vel_from_cmd = g * (d - tau * (1.0 - decay))
    pos_from_att = g * tau * (d - tau * (1.0 - decay))
    pos_from_cmd = g * (0.5 * d * d - tau * d + tau * tau * (1.0 - decay))

    A = np.zeros((10, 10))
    B = np.zeros((10, 3))
    c = np.zeros(10)

    for axis in range(2):  # x then y
        p, v, att = axis, 3 + axis, 6 + axis
        rate = 8 + axis
        A[p, p] = 1.0
        A[p, v] = d
        A[p, att] = pos_from_att
        B[p, axis] = pos_from_cmd
        A[v, v] = 1.0
        A[v, att] = vel_from_att
        B[v, axis] = vel_from_cmd
        A[att, att] = att_from_att
        B[att, axis] = att_from_cmd
        # rate = (cmd - att') / tau, a function of the new attitude
        A[rate, att] = -att_from_att / tau
        B[rate, axis] = (1.0 - att_from_cmd) / tau

    # vertical axis: double integrator driven by (thrust - g)
    A[2, 2] = 1.0
    A[2, 5] = d
    B[2, 2] = 0.5 * d * d
    c[2] = -0.5 * d * d * g
    A[5, 5] = 1.0
    B[5, 2] = d
    c[5] = -d * g

    for arr in (A, B, c):
        arr.setflags(write=False)
    return A, B, c


def quad_step(state: QuadState, control: QuadInput, params: QuadParams) -> QuadState:
    """Advance the quadrotor one step of the exact discrete near-hover model.

    Raises ``ValueError`` for inputs outside the configured box. Attitudes
    leaving the near-hover envelope are clamped with a logged warning.
    """
    if (
        abs(control.desired_pitch) > params.max_attitude_cmd + 1e-12
        or abs(control.desired_roll) > params.max_attitude_cmd + 1e-12
    ):
        raise ValueError("attitude command exceeds bound")
    if abs(control.vertical_thrust - params.gravity) > params.max_thrust_delta + 1e-12:
        raise ValueError("vertical thrust outside configured box")

    A, B, c = quad_matrices(params)
    u = np.array([control.desired_pitch, control.desired_roll, control.vertical_thrust])
    nxt = A @ state.as_vector() + B @ u + c

    cap = params.max_attitude
    if abs(nxt[6]) > cap or abs(nxt[7]) > cap:
        logger.warning(
            "quadrotor attitude clamped to near-hover envelope (pitch=%.3f roll=%.3f)",
            nxt[6],
            nxt[7],
        )
        nxt[6] = min(max(nxt[6], -cap), cap)
        nxt[7] = min(max(nxt[7], -cap), cap)
    return QuadState.from_vector(nxt)
