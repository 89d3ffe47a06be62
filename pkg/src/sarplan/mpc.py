"""Multi-robot terrain-aware model predictive control.

Finite-horizon trajectory optimization over the reduced-order robot models,
solved by single shooting: decision variables are the input sequences,
gradients come from a hand-coded adjoint sweep through the step dynamics and
the GP slope map. Biped costs add the squared lateral terrain slope along
the path; the derivative of the slope itself (a second derivative of the GP
mean) is taken by central finite differences. Input boxes are handled by
projection, state boxes and the inter-robot distance band by quadratic
penalties with escalation. Robots not coupled by the distance constraint
are solved independently (the cost is separable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    LipInput,
    LipParams,
    LipState,
    QuadInput,
    QuadParams,
    QuadState,
    lip_step,
    quad_matrices,
    quad_step,
    wrap_angle,
)
from .terrain import TerrainField

__all__ = [
    "MpcConfig",
    "BipedAgent",
    "QuadAgent",
    "MpcProblem",
    "MpcSolution",
    "solve",
    "MpcController",
]


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 10
    slope_weight: float = 1.0
    distance_lower: float = 0.9
    distance_upper: float = 2.0
    distance_slack: float = 0.2
    max_iters: int = 200
    convergence_tol: float = 1e-4
    residual_tol: float = 1e-3
    state_penalty: float = 50.0
    distance_penalty: float = 200.0
    penalty_growth: float = 10.0
    penalty_rounds: int = 4
    fd_step: float = 1e-4
    quad_altitude_bounds: tuple[float, float] = (0.5, 5.0)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.distance_lower < self.distance_upper:
            raise ValueError("need distance_lower < distance_upper")
        if self.distance_slack < 0:
            raise ValueError("distance_slack must be >= 0")


@dataclass(frozen=True)
class BipedAgent:
    robot_id: str
    state: LipState
    params: LipParams
    target: tuple[float, float]
    tracking_weight: float = 1.0


@dataclass(frozen=True)
class QuadAgent:
    robot_id: str
    state: QuadState
    params: QuadParams
    target: tuple[float, float]
    tracking_weight: float = 1.0


@dataclass(frozen=True)
class MpcProblem:
    agents: tuple
    terrain: TerrainField
    bounds: tuple = ((0.0, 0.0), (20.0, 20.0))
    # ids of the two bipeds under the distance-band constraint, or None;
    # active only during paired rescue
    distance_pair: tuple[str, str] | None = None


@dataclass
class MpcSolution:
    inputs: dict
    trajectories: dict
    costs: dict
    converged: bool
    iterations: int
    distance_residual: float = 0.0
    penalty_only: bool = False

    def first_inputs(self) -> dict:
        return {rid: u[0] for rid, u in self.inputs.items()}


# ---------------------------------------------------------------------------
# biped single-shooting machinery


class _BipedOps:
    """Cost, gradient, and rollout for one biped over the horizon."""

    def __init__(self, agent: BipedAgent, terrain: TerrainField, config: MpcConfig, bounds):
        self.agent = agent
        self.terrain = terrain
        self.config = config
        self.bounds = bounds
        p = agent.params
        self.n = config.horizon
        self.beta = p.beta
        self.cosh = math.cosh(p.beta * p.step_duration)
        self.sinh = math.sinh(p.beta * p.step_duration)
        self.lo = np.array([-p.max_foot_offset, -p.max_heading_change])
        self.hi = np.array([p.max_foot_offset, p.max_heading_change])

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)

    def initial_guesses(self, warm: np.ndarray | None) -> list[np.ndarray]:
        if warm is not None:
            return [self.clamp(warm)]
        zero = np.zeros((self.n, 2))
        guess = np.zeros((self.n, 2))
        # steer toward the target at cruise speed
        st = self.agent.state
        bearing = math.atan2(
            self.agent.target[1] - st.position[1], self.agent.target[0] - st.position[0]
        )
        turn = wrap_angle(bearing - st.heading)
        p = self.agent.params
        cruise_uf = (self.cosh - 1.0) * 0.8 * p.max_velocity / (self.beta * self.sinh)
        for q in range(self.n):
            remaining = max(-p.max_heading_change, min(p.max_heading_change, turn))
            guess[q] = (cruise_uf, remaining)
            turn -= remaining
        return [zero, self.clamp(guess)]

    def _rollout_arrays(self, u: np.ndarray):
        n = self.n
        xs = np.empty(n + 1)
        ys = np.empty(n + 1)
        vs = np.empty(n + 1)
        ths = np.empty(n + 1)
        st = self.agent.state
        xs[0], ys[0] = st.position[0], st.position[1]
        vs[0], ths[0] = st.sagittal_velocity, st.heading
        dxs = np.empty(n)
        for q in range(n):
            dx = u[q, 0] * (1.0 - self.cosh) + self.sinh / self.beta * vs[q]
            dxs[q] = dx
            xs[q + 1] = xs[q] + dx * math.cos(ths[q])
            ys[q + 1] = ys[q] + dx * math.sin(ths[q])
            vs[q + 1] = self.cosh * vs[q] - self.beta * self.sinh * u[q, 0]
            ths[q + 1] = ths[q] + u[q, 1]
        return xs, ys, vs, ths, dxs

    def _lat_slopes(self, xs, ys, ths, with_derivs: bool):
        """Lateral slope at the post-step poses, optionally with derivatives."""
        n = self.n
        pts = np.column_stack([xs[1:], ys[1:]])
        if not with_derivs:
            grads = self.terrain.slope_world_many(pts)
            lat = -np.sin(ths[1:]) * grads[:, 0] + np.cos(ths[1:]) * grads[:, 1]
            return lat, None, None, None
        h = self.config.fd_step
        stacked = np.vstack(
            [
                pts,
                pts + [h, 0.0],
                pts - [h, 0.0],
                pts + [0.0, h],
                pts - [0.0, h],
            ]
        )
        grads = self.terrain.slope_world_many(stacked).reshape(5, n, 2)
        sin_t, cos_t = np.sin(ths[1:]), np.cos(ths[1:])

        def lat_of(g):
            return -sin_t * g[:, 0] + cos_t * g[:, 1]

        lat = lat_of(grads[0])
        dlat_dx = (lat_of(grads[1]) - lat_of(grads[2])) / (2.0 * h)
        dlat_dy = (lat_of(grads[3]) - lat_of(grads[4])) / (2.0 * h)
        dlat_dth = -cos_t * grads[0][:, 0] - sin_t * grads[0][:, 1]
        return lat, dlat_dx, dlat_dy, dlat_dth

    def cost_terms(self, u: np.ndarray):
        xs, ys, vs, ths, _ = self._rollout_arrays(u)
        lat, _, _, _ = self._lat_slopes(xs, ys, ths, with_derivs=False)
        return self._terms_from_rollout(xs, ys, vs, lat)

    def _terms_from_rollout(self, xs, ys, vs, lat):
        w = self.agent.tracking_weight
        tx, ty = self.agent.target
        tracking = w * float(np.sum((xs[1:] - tx) ** 2 + (ys[1:] - ty) ** 2))
        slope = self.config.slope_weight * float(np.sum(lat**2))
        (x_lo, y_lo), (x_hi, y_hi) = self.bounds
        vmax = self.agent.params.max_velocity
        rho = self.config.state_penalty
        viol = (
            np.maximum(0.0, xs[1:] - x_hi) ** 2
            + np.maximum(0.0, x_lo - xs[1:]) ** 2
            + np.maximum(0.0, ys[1:] - y_hi) ** 2
            + np.maximum(0.0, y_lo - ys[1:]) ** 2
            + np.maximum(0.0, np.abs(vs[1:]) - vmax) ** 2
        )
        state_pen = rho * float(np.sum(viol))
        return {"tracking": tracking, "slope": slope, "state_penalty": state_pen}

    def cost(self, u: np.ndarray) -> float:
        return sum(self.cost_terms(u).values())

    def cost_grad(self, u: np.ndarray, extra_pos_grad=None):
        """Total cost and dcost/du; ``extra_pos_grad`` (n, 2) adds coupling
        terms (the distance penalty) applied at the post-step positions."""
        n = self.n
        xs, ys, vs, ths, dxs = self._rollout_arrays(u)
        lat, dlat_dx, dlat_dy, dlat_dth = self._lat_slopes(xs, ys, ths, with_derivs=True)
        terms = self._terms_from_rollout(xs, ys, vs, lat)
        total = sum(terms.values())

        w = self.agent.tracking_weight
        sw = self.config.slope_weight
        rho = self.config.state_penalty
        tx, ty = self.agent.target
        (x_lo, y_lo), (x_hi, y_hi) = self.bounds
        vmax = self.agent.params.max_velocity

        grad = np.zeros((n, 2))
        lam = np.zeros(4)  # adjoint for (x, y, v, theta)
        sb = self.sinh / self.beta
        for q in range(n - 1, -1, -1):
            # stage cost gradient at the post-step state (index q+1)
            k = q  # row into lat arrays for pose q+1
            gx = 2.0 * w * (xs[q + 1] - tx) + 2.0 * sw * lat[k] * dlat_dx[k]
            gy = 2.0 * w * (ys[q + 1] - ty) + 2.0 * sw * lat[k] * dlat_dy[k]
            gx += 2.0 * rho * (
                max(0.0, xs[q + 1] - x_hi) - max(0.0, x_lo - xs[q + 1])
            )
            gy += 2.0 * rho * (
                max(0.0, ys[q + 1] - y_hi) - max(0.0, y_lo - ys[q + 1])
            )
            gv = 2.0 * rho * max(0.0, abs(vs[q + 1]) - vmax) * math.copysign(
                1.0, vs[q + 1]
            )
            gth = 2.0 * sw * lat[k] * dlat_dth[k]
            if extra_pos_grad is not None:
                gx += extra_pos_grad[q, 0]
                gy += extra_pos_grad[q, 1]
            lam += np.array([gx, gy, gv, gth])

            cos_t, sin_t = math.cos(ths[q]), math.sin(ths[q])
            # input gradient: B_q^T lambda
            grad[q, 0] = (
                (1.0 - self.cosh) * (cos_t * lam[0] + sin_t * lam[1])
                - self.beta * self.sinh * lam[2]
            )
            grad[q, 1] = lam[3]
            # pull the adjoint through A_q
            new_lam = np.empty(4)
            new_lam[0] = lam[0]
            new_lam[1] = lam[1]
            new_lam[2] = sb * (cos_t * lam[0] + sin_t * lam[1]) + self.cosh * lam[2]
            new_lam[3] = -dxs[q] * sin_t * lam[0] + dxs[q] * cos_t * lam[1] + lam[3]
            lam = new_lam
        return total, grad, terms

    def positions(self, u: np.ndarray) -> np.ndarray:
        xs, ys, _, _, _ = self._rollout_arrays(u)
        return np.column_stack([xs[1:], ys[1:]])

    def final_trajectory(self, u: np.ndarray) -> list[LipState]:
        """Re-simulate through the real step map (with terrain z-advance)."""
        states = [self.agent.state]
        for q in range(self.n):
            pose = states[-1]
            grad = self.terrain.slope_world_many(np.array([pose.position[:2]]))[0]
            sag = math.cos(pose.heading) * grad[0] + math.sin(pose.heading) * grad[1]
            states.append(
                lip_step(pose, LipInput(float(u[q, 0]), float(u[q, 1])), float(sag), self.agent.params)
            )
        return states


class _QuadOps:
    """Cost, gradient, and rollout for one quadrotor (linear model)."""

    def __init__(self, agent: QuadAgent, config: MpcConfig, bounds):
        self.agent = agent
        self.config = config
        self.bounds = bounds
        self.n = config.horizon
        self.A, self.B, self.c = quad_matrices(agent.params)
        p = agent.params
        self.lo = np.array(
            [-p.max_attitude_cmd, -p.max_attitude_cmd, p.gravity - p.max_thrust_delta]
        )
        self.hi = np.array(
            [p.max_attitude_cmd, p.max_attitude_cmd, p.gravity + p.max_thrust_delta]
        )

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)

    def hover_input(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.agent.params.gravity])

    def initial_guesses(self, warm: np.ndarray | None) -> list[np.ndarray]:
        if warm is not None:
            return [self.clamp(warm)]
        return [np.tile(self.hover_input(), (self.n, 1))]

    def _rollout(self, u: np.ndarray) -> np.ndarray:
        states = np.empty((self.n + 1, 10))
        states[0] = self.agent.state.as_vector()
        for q in range(self.n):
            states[q + 1] = self.A @ states[q] + self.B @ u[q] + self.c
        return states

    def cost_terms(self, u: np.ndarray):
        return self._terms(self._rollout(u))

    def _terms(self, states):
        w = self.agent.tracking_weight
        tx, ty = self.agent.target
        tracking = w * float(
            np.sum((states[1:, 0] - tx) ** 2 + (states[1:, 1] - ty) ** 2)
        )
        rho = self.config.state_penalty
        (x_lo, y_lo), (x_hi, y_hi) = self.bounds
        z_lo, z_hi = self.config.quad_altitude_bounds
        p = self.agent.params
        speed = np.hypot(states[1:, 3], states[1:, 4])
        viol = (
            np.maximum(0.0, states[1:, 0] - x_hi) ** 2
            + np.maximum(0.0, x_lo - states[1:, 0]) ** 2
            + np.maximum(0.0, states[1:, 1] - y_hi) ** 2
            + np.maximum(0.0, y_lo - states[1:, 1]) ** 2
            + np.maximum(0.0, states[1:, 2] - z_hi) ** 2
            + np.maximum(0.0, z_lo - states[1:, 2]) ** 2
            + np.maximum(0.0, speed - p.max_velocity) ** 2
            + np.maximum(0.0, np.abs(states[1:, 6]) - p.max_attitude) ** 2
            + np.maximum(0.0, np.abs(states[1:, 7]) - p.max_attitude) ** 2
        )
        return {
            "tracking": tracking,
            "slope": 0.0,
            "state_penalty": rho * float(np.sum(viol)),
        }

    def cost(self, u: np.ndarray) -> float:
        return sum(self.cost_terms(u).values())

    def cost_grad(self, u: np.ndarray, extra_pos_grad=None):
        states = self._rollout(u)
        terms = self._terms(states)
        total = sum(terms.values())
        w = self.agent.tracking_weight
        rho = self.config.state_penalty
        tx, ty = self.agent.target
        (x_lo, y_lo), (x_hi, y_hi) = self.bounds
        z_lo, z_hi = self.config.quad_altitude_bounds
        p = self.agent.params

        grad = np.zeros((self.n, 3))
        lam = np.zeros(10)
        for q in range(self.n - 1, -1, -1):
            s = states[q + 1]
            stage = np.zeros(10)
            stage[0] = 2.0 * w * (s[0] - tx) + 2.0 * rho * (
                max(0.0, s[0] - x_hi) - max(0.0, x_lo - s[0])
            )
            stage[1] = 2.0 * w * (s[1] - ty) + 2.0 * rho * (
                max(0.0, s[1] - y_hi) - max(0.0, y_lo - s[1])
            )
            stage[2] = 2.0 * rho * (max(0.0, s[2] - z_hi) - max(0.0, z_lo - s[2]))
            speed = math.hypot(s[3], s[4])
            if speed > p.max_velocity and speed > 1e-12:
                coeff = 2.0 * rho * (speed - p.max_velocity) / speed
                stage[3] = coeff * s[3]
                stage[4] = coeff * s[4]
            for ai, idx in ((0, 6), (1, 7)):
                over = abs(s[idx]) - p.max_attitude
                if over > 0:
                    stage[idx] = 2.0 * rho * over * math.copysign(1.0, s[idx])
            if extra_pos_grad is not None:
                stage[0] += extra_pos_grad[q, 0]
                stage[1] += extra_pos_grad[q, 1]
            lam = lam + stage
            grad[q] = self.B.T @ lam
            lam = self.A.T @ lam
        return total, grad, terms

    def positions(self, u: np.ndarray) -> np.ndarray:
        return self._rollout(u)[1:, :2]

    def final_trajectory(self, u: np.ndarray) -> list[QuadState]:
        states = [self.agent.state]
        for q in range(self.n):
            states.append(
                quad_step(
                    states[-1],
                    QuadInput(float(u[q, 0]), float(u[q, 1]), float(u[q, 2])),
                    self.agent.params,
                )
            )
        return states


def _make_ops(agent, terrain, config, bounds):
    if isinstance(agent, BipedAgent):
        return _BipedOps(agent, terrain, config, bounds)
    if isinstance(agent, QuadAgent):
        return _QuadOps(agent, config, bounds)
    raise TypeError(f"unknown agent type {agent!r}")


def _projected_descent(cost_grad, clamp, u0, max_iters, tol):
    """Projected gradient with Armijo backtracking; merit never increases."""
    u = clamp(np.array(u0, dtype=float))
    f, g, _ = cost_grad(u)
    step = 1.0
    iters = 0
    converged = False
    for _ in range(max_iters):
        iters += 1
        stationarity = np.linalg.norm(u - clamp(u - g))
        if stationarity < tol:
            converged = True
            break
        step = min(step * 2.0, 1e3)
        accepted = False
        while step > 1e-14:
            candidate = clamp(u - step * g)
            move = candidate - u
            if not np.any(move):
                break
            f_new = None
            f_new, g_new, _ = cost_grad(candidate)
            if f_new <= f - 1e-4 / max(step, 1e-14) * float(np.sum(move * move)):
                u, f, g = candidate, f_new, g_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # no descent direction within machine resolution
            break
    return u, f, iters, converged


class _DistanceCoupling:
    """Quadratic penalty on the pair distance band, shared by two bipeds."""

    def __init__(self, config: MpcConfig, rho: float):
        self.lo = config.distance_lower - config.distance_slack
        self.hi = config.distance_upper + config.distance_slack
        self.rho = rho

    def penalty_and_grads(self, pos_a: np.ndarray, pos_b: np.ndarray):
        diff = pos_a - pos_b
        d = np.maximum(np.hypot(diff[:, 0], diff[:, 1]), 1e-9)
        viol_lo = np.maximum(0.0, self.lo - d)
        viol_hi = np.maximum(0.0, d - self.hi)
        penalty = self.rho * float(np.sum(viol_lo**2 + viol_hi**2))
        dpen_dd = 2.0 * self.rho * (viol_hi - viol_lo)
        grad_a = (dpen_dd / d)[:, None] * diff
        return penalty, grad_a, -grad_a

    @staticmethod
    def residual(pos_a, pos_b, lo, hi):
        d = np.hypot(*(pos_a - pos_b).T)
        return float(np.max(np.maximum(lo - d, d - hi).clip(min=0.0), initial=0.0))


def _solve_single(ops, warm, config):
    best = None
    total_iters = 0
    for guess in ops.initial_guesses(warm):
        u, f, iters, converged = _projected_descent(
            ops.cost_grad, ops.clamp, guess, config.max_iters, config.convergence_tol
        )
        total_iters += iters
        if best is None or f < best[1]:
            best = (u, f, converged)
    u, _, converged = best
    return u, total_iters, converged


def _solve_pair(ops_a, ops_b, warm_a, warm_b, config):
    """Joint solve of two bipeds with the distance-band penalty, escalated."""
    guesses_a = ops_a.initial_guesses(warm_a)
    guesses_b = ops_b.initial_guesses(warm_b)
    u_a = guesses_a[0]
    u_b = guesses_b[0]
    rho = config.distance_penalty
    lo = config.distance_lower - config.distance_slack
    hi = config.distance_upper + config.distance_slack
    total_iters = 0
    converged = False
    for _ in range(config.penalty_rounds):
        coupling = _DistanceCoupling(config, rho)
        na = u_a.size

        def cost_grad(stacked):
            ua = stacked[:na].reshape(u_a.shape)
            ub = stacked[na:].reshape(u_b.shape)
            pos_a = ops_a.positions(ua)
            pos_b = ops_b.positions(ub)
            pen, grad_pa, grad_pb = coupling.penalty_and_grads(pos_a, pos_b)
            fa, ga, _ = ops_a.cost_grad(ua, extra_pos_grad=grad_pa)
            fb, gb, _ = ops_b.cost_grad(ub, extra_pos_grad=grad_pb)
            total = fa + fb + pen
            return total, np.concatenate([ga.ravel(), gb.ravel()]), None

        def clamp(stacked):
            return np.concatenate(
                [
                    ops_a.clamp(stacked[:na].reshape(u_a.shape)).ravel(),
                    ops_b.clamp(stacked[na:].reshape(u_b.shape)).ravel(),
                ]
            )

        stacked0 = np.concatenate([u_a.ravel(), u_b.ravel()])
        out, _, iters, converged = _projected_descent(
            cost_grad, clamp, stacked0, config.max_iters, config.convergence_tol
        )
        total_iters += iters
        u_a = out[:na].reshape(u_a.shape)
        u_b = out[na:].reshape(u_b.shape)
        residual = _DistanceCoupling.residual(
            ops_a.positions(u_a), ops_b.positions(u_b), lo, hi
        )
        if residual <= config.residual_tol:
            break
        rho *= config.penalty_growth
    residual = _DistanceCoupling.residual(
        ops_a.positions(u_a), ops_b.positions(u_b), lo, hi
    )
    return u_a, u_b, total_iters, converged, residual


def solve(problem: MpcProblem, config: MpcConfig, warm: dict | None = None) -> MpcSolution:
    """Plan input sequences for every agent in the problem.

    Returns rollout-consistent trajectories (re-simulating the inputs through
    the step dynamics reproduces them exactly). Non-convergence within the
    iteration budget returns the best solution found, flagged.
    """
    warm = warm or {}
    by_id = {a.robot_id: a for a in problem.agents}
    ops = {
        a.robot_id: _make_ops(a, problem.terrain, config, problem.bounds)
        for a in problem.agents
    }

    pair = problem.distance_pair
    if pair is not None and (pair[0] not in by_id or pair[1] not in by_id):
        raise ValueError(f"distance pair {pair} not among the agents")

    inputs: dict[str, np.ndarray] = {}
    iterations = 0
    converged = True
    distance_residual = 0.0
    penalty_only = False

    if pair is not None:
        a_id, b_id = pair
        start_a = np.asarray(by_id[a_id].state.position[:2])
        start_b = np.asarray(by_id[b_id].state.position[:2])
        d0 = float(np.hypot(*(start_a - start_b)))
        lo = config.distance_lower - config.distance_slack
        hi = config.distance_upper + config.distance_slack
        penalty_only = not (lo <= d0 <= hi)
        u_a, u_b, iters, ok, distance_residual = _solve_pair(
            ops[a_id], ops[b_id], warm.get(a_id), warm.get(b_id), config
        )
        inputs[a_id] = u_a
        inputs[b_id] = u_b
        iterations += iters
        converged &= ok and distance_residual <= config.residual_tol

    for rid, agent_ops in ops.items():
        if rid in inputs:
            continue
        u, iters, ok = _solve_single(agent_ops, warm.get(rid), config)
        inputs[rid] = u
        iterations += iters
        converged &= ok

    trajectories = {rid: ops[rid].final_trajectory(u) for rid, u in inputs.items()}
    costs: dict[str, float] = {"tracking": 0.0, "slope": 0.0, "state_penalty": 0.0}
    for rid, u in inputs.items():
        for key, value in ops[rid].cost_terms(u).items():
            costs[key] += value
    costs["distance_penalty"] = 0.0
    if pair is not None:
        coupling = _DistanceCoupling(config, config.distance_penalty)
        pen, _, _ = coupling.penalty_and_grads(
            ops[pair[0]].positions(inputs[pair[0]]),
            ops[pair[1]].positions(inputs[pair[1]]),
        )
        costs["distance_penalty"] = pen
    costs["total"] = sum(v for k, v in costs.items() if k != "total")

    return MpcSolution(
        inputs=inputs,
        trajectories=trajectories,
        costs=costs,
        converged=converged,
        iterations=iterations,
        distance_residual=distance_residual,
        penalty_only=penalty_only,
    )


class MpcController:
    """Receding-horizon wrapper: warm starts, apply-first-input stepping."""

    def __init__(self, config: MpcConfig):
        self.config = config
        self._warm: dict[str, np.ndarray] = {}

    def reset(self, robot_id: str | None = None):
        if robot_id is None:
            self._warm.clear()
        else:
            self._warm.pop(robot_id, None)

    def plan(self, problem: MpcProblem) -> MpcSolution:
        solution = solve(problem, self.config, warm=self._warm)
        for rid, u in solution.inputs.items():
            self._warm[rid] = np.vstack([u[1:], u[-1:]])
        return solution

    def step(self, problem: MpcProblem):
        """Solve, apply each robot's first input, return the applied inputs,
        the new states, and the solution (for metrics)."""
        solution = self.plan(problem)
        new_states = {}
        applied = {}
        for agent in problem.agents:
            u0 = solution.inputs[agent.robot_id][0]
            applied[agent.robot_id] = u0
            new_states[agent.robot_id] = solution.trajectories[agent.robot_id][1]
        return applied, new_states, solution
