"""Unit tests for the reduced-order robot models.

The LIP map is checked against an independently coded scalar evaluator of the
step-to-step equations and against a continuous-time pendulum ODE integrated
with scipy over one step duration.
"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sarplan.dynamics import (
    LipInput,
    LipParams,
    LipState,
    QuadInput,
    QuadParams,
    QuadState,
    lip_step,
    lip_travel,
    quad_matrices,
    quad_step,
    wrap_angle,
)


def lip_step_oracle(state, control, sag_slope, params):
    """Independent scalar evaluation of the step-to-step equations."""
    beta = math.sqrt(params.gravity / params.com_height)
    c = math.cosh(beta * params.step_duration)
    s = math.sinh(beta * params.step_duration)
    dx = control.foot_offset * (1.0 - c) + (s / beta) * state.sagittal_velocity
    x, y, z = state.position
    return (
        x + dx * math.cos(state.heading),
        y + dx * math.sin(state.heading),
        z + sag_slope * dx,
        c * state.sagittal_velocity - beta * s * control.foot_offset,
        state.heading + control.heading_change,
    )


def lip_continuous_oracle(v0, foot_offset, params):
    """Integrate the pendulum ODE x'' = beta^2 (x - p_foot) over [0, D].

    Returns (CoM displacement, final velocity) with the stance foot placed
    ``foot_offset`` ahead of the initial CoM.
    """
    beta2 = params.gravity / params.com_height

    def ode(_t, s):
        return [s[1], beta2 * (s[0] - foot_offset)]

    sol = solve_ivp(
        ode, (0.0, params.step_duration), [0.0, v0], rtol=1e-11, atol=1e-12
    )
    return sol.y[0, -1], sol.y[1, -1]


class TestWrapAngle:
    def test_domain_is_open_closed(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)

    def test_identity_inside_range(self):
        for theta in (-3.0, -0.5, 0.0, 1.2, 3.14):
            assert wrap_angle(theta) == pytest.approx(theta)


class TestLipStep:
    params = LipParams()

    def test_velocity_map_coasting(self):
        # u_f = 0: v' = cosh(beta*D) * v, with D=0.4s, z_h=0.9, g=9.81
        beta = math.sqrt(9.81 / 0.9)
        assert beta == pytest.approx(3.3015, abs=1e-4)
        growth = math.cosh(beta * 0.4)
        assert growth == pytest.approx(2.00633, abs=1e-4)
        state = LipState(position=(0.0, 0.0, 0.0), sagittal_velocity=0.2, heading=0.0)
        nxt = lip_step(state, LipInput(0.0, 0.0), 0.0, self.params)
        assert nxt.sagittal_velocity == pytest.approx(growth * 0.2, rel=1e-12)

    def test_zero_slope_preserves_height(self):
        state = LipState(position=(1.0, 2.0, 0.37), sagittal_velocity=0.3, heading=0.4)
        nxt = lip_step(state, LipInput(0.1, 0.05), 0.0, self.params)
        assert nxt.position[2] == 0.37

    def test_heading_quarter_turn_moves_along_y(self):
        state = LipState(
            position=(1.0, 1.0, 0.0), sagittal_velocity=0.3, heading=math.pi / 2
        )
        nxt = lip_step(state, LipInput(0.05, 0.0), 0.0, self.params)
        dx = lip_travel(0.05, 0.3, self.params)
        assert nxt.position[0] == pytest.approx(1.0, abs=1e-15)
        assert nxt.position[1] == pytest.approx(1.0 + dx, rel=1e-12)

    def test_matches_independent_evaluator(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            state = LipState(
                position=tuple(rng.uniform(-5, 5, size=3)),
                sagittal_velocity=rng.uniform(-0.4, 0.4),
                heading=rng.uniform(-math.pi, math.pi),
            )
            control = LipInput(rng.uniform(-0.3, 0.3), rng.uniform(-0.4, 0.4))
            slope = rng.uniform(-0.5, 0.5)
            nxt = lip_step(state, control, slope, self.params)
            ox, oy, oz, ov, otheta = lip_step_oracle(state, control, slope, self.params)
            assert nxt.position[0] == pytest.approx(ox, abs=1e-12)
            assert nxt.position[1] == pytest.approx(oy, abs=1e-12)
            assert nxt.position[2] == pytest.approx(oz, abs=1e-12)
            assert nxt.sagittal_velocity == pytest.approx(ov, abs=1e-12)
            assert nxt.heading == pytest.approx(wrap_angle(otheta), abs=1e-12)

    def test_matches_continuous_pendulum(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            v0 = rng.uniform(-0.4, 0.4)
            uf = rng.uniform(-0.3, 0.3)
            dx_ode, v_ode = lip_continuous_oracle(v0, uf, self.params)
            state = LipState(position=(0.0, 0.0, 0.0), sagittal_velocity=v0, heading=0.0)
            nxt = lip_step(state, LipInput(uf, 0.0), 0.0, self.params)
            assert nxt.position[0] == pytest.approx(dx_ode, abs=1e-6)
            assert nxt.sagittal_velocity == pytest.approx(v_ode, abs=1e-6)

    def test_heading_composition_returns_to_start(self):
        k = 7
        state = LipState(position=(0.0, 0.0, 0.0), sagittal_velocity=0.0, heading=0.3)
        params = LipParams(max_heading_change=2 * math.pi / k + 1e-9)
        for _ in range(k):
            state = lip_step(state, LipInput(0.0, 2 * math.pi / k), 0.0, params)
        assert state.heading == pytest.approx(0.3, abs=1e-12)

    def test_displacement_magnitude_heading_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v0 = rng.uniform(-0.4, 0.4)
            uf = rng.uniform(-0.3, 0.3)
            theta = rng.uniform(-math.pi, math.pi)
            state = LipState(position=(0.0, 0.0, 0.0), sagittal_velocity=v0, heading=theta)
            nxt = lip_step(state, LipInput(uf, 0.0), 0.0, self.params)
            moved = math.hypot(nxt.position[0], nxt.position[1])
            assert moved == pytest.approx(abs(lip_travel(uf, v0, self.params)), abs=1e-12)

    def test_input_bounds_enforced(self):
        state = LipState(position=(0.0, 0.0, 0.0), sagittal_velocity=0.0, heading=0.0)
        with pytest.raises(ValueError, match="foot_offset"):
            lip_step(state, LipInput(0.5, 0.0), 0.0, self.params)
        with pytest.raises(ValueError, match="heading_change"):
            lip_step(state, LipInput(0.0, 1.0), 0.0, self.params)

    def test_nonfinite_state_rejected(self):
        with pytest.raises(ValueError):
            LipState(position=(math.nan, 0.0, 0.0), sagittal_velocity=0.0, heading=0.0)


class TestQuadStep:
    params = QuadParams()

    def hover(self, position=(0.0, 0.0, 2.0)):
        return QuadState(position=position)

    def hover_input(self):
        return QuadInput(0.0, 0.0, self.params.gravity)

    def test_hover_is_fixed_point(self):
        state = self.hover()
        nxt = quad_step(state, self.hover_input(), self.params)
        assert nxt.as_vector() == pytest.approx(state.as_vector(), abs=1e-14)

    def test_pitch_command_accelerates_forward(self):
        state = self.hover()
        vx = []
        for _ in range(5):
            state = quad_step(state, QuadInput(0.1, 0.0, self.params.gravity), self.params)
            vx.append(state.velocity[0])
        assert all(b > a for a, b in zip(vx, vx[1:]))
        assert state.velocity[1] == pytest.approx(0.0, abs=1e-14)

    def test_superposition_in_pitch(self):
        base = self.hover()
        hover = quad_step(base, self.hover_input(), self.params).as_vector()
        small = quad_step(base, QuadInput(0.05, 0.0, self.params.gravity), self.params)
        large = quad_step(base, QuadInput(0.10, 0.0, self.params.gravity), self.params)
        delta_small = small.as_vector() - hover
        delta_large = large.as_vector() - hover
        assert delta_large == pytest.approx(2.0 * delta_small, abs=1e-9)

    def test_linearity_of_input_dependent_part(self):
        rng = np.random.default_rng(4)
        A, B, c = quad_matrices(self.params)
        for _ in range(20):
            s = rng.normal(scale=0.1, size=10)
            u = rng.normal(scale=0.05, size=3)
            direct = A @ s + B @ u + c
            f0 = A @ s + B @ np.zeros(3) + c
            assert direct - f0 == pytest.approx(B @ u, abs=1e-12)

    def test_thrust_above_gravity_climbs(self):
        state = self.hover()
        nxt = quad_step(state, QuadInput(0.0, 0.0, self.params.gravity + 1.0), self.params)
        assert nxt.velocity[2] == pytest.approx(1.0 * self.params.step_duration)
        assert nxt.position[2] > state.position[2]

    def test_attitude_lag_converges_to_command(self):
        state = self.hover()
        for _ in range(10):
            state = quad_step(state, QuadInput(0.2, 0.0, self.params.gravity), self.params)
        assert state.attitude[0] == pytest.approx(0.2, abs=1e-9)

    def test_envelope_clamp_warns(self, caplog):
        state = QuadState(position=(0.0, 0.0, 2.0), attitude=(0.29, 0.0))
        with caplog.at_level("WARNING", logger="sarplan.dynamics"):
            nxt = quad_step(state, QuadInput(0.3, 0.0, self.params.gravity), self.params)
        # lag from 0.29 toward 0.3 stays inside; force an exit via custom params
        wide = QuadParams(max_attitude=0.05, max_attitude_cmd=0.3)
        with caplog.at_level("WARNING", logger="sarplan.dynamics"):
            clamped = quad_step(state, QuadInput(0.3, 0.0, wide.gravity), wide)
        assert clamped.attitude[0] == pytest.approx(0.05)
        assert any("clamped" in r.message for r in caplog.records)
        assert abs(nxt.attitude[0]) <= self.params.max_attitude

    def test_input_box_enforced(self):
        state = self.hover()
        with pytest.raises(ValueError):
            quad_step(state, QuadInput(0.5, 0.0, self.params.gravity), self.params)
        with pytest.raises(ValueError):
            quad_step(state, QuadInput(0.0, 0.0, self.params.gravity + 5.0), self.params)

    def test_attitude_rate_matches_lag_rate(self):
        # rate must equal (cmd - new_attitude) / tau, the lag's exact rate
        state = QuadState(position=(0.0, 0.0, 2.0), attitude=(0.1, -0.05))
        cmd = QuadInput(0.2, 0.1, self.params.gravity)
        nxt = quad_step(state, cmd, self.params)
        tau = self.params.attitude_lag
        assert nxt.attitude_rate[0] == pytest.approx((0.2 - nxt.attitude[0]) / tau)
        assert nxt.attitude_rate[1] == pytest.approx((0.1 - nxt.attitude[1]) / tau)
