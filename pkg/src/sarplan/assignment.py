"""Search-task auction, consensus conflict resolution, and rescue targeting.

Searching robots bid on uniformly drawn candidate target points with a
weighted sum of a belief UCB score, a terrain traversability score sampled
inside the ellipse whose foci are the robot and the target, and a
max-velocity-scaled travel-time score. Conflicts (robot-to-target segments
that intersect, i.e. redundant exploration) are resolved pairwise by
exhaustive search over target pairs for the best non-conflicting sum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .belief import BeliefField, belief_ucb_many
from .terrain import TerrainField

__all__ = [
    "ScoreWeights",
    "Assignment",
    "RobotView",
    "generate_targets",
    "traversability_score",
    "time_score",
    "total_score",
    "score_matrix",
    "auction",
    "segments_conflict",
    "find_conflicts",
    "resolve_conflicts",
    "nearest_free_robot",
    "formation_pair_targets",
    "orbit_target",
]

logger = logging.getLogger(__name__)

# ellipse minor axis: scales with the focal distance, floored at robot width
MIN_SEMI_MINOR = 0.5
SEMI_MINOR_RATIO = 0.25


@dataclass(frozen=True)
class ScoreWeights:
    """Resolved scoring weights for one robot kind."""

    w_b: float
    w_t: float
    w_d: float
    alpha_b: float
    alpha_t: float
    v_max: float
    ellipse_samples: int = 15

    def __post_init__(self):
        if min(self.w_b, self.w_t, self.w_d) < 0:
            raise ValueError("score weights must be nonnegative")
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")
        if self.ellipse_samples < 1:
            raise ValueError("ellipse_samples must be >= 1")


@dataclass(frozen=True)
class RobotView:
    """What the auction needs to know about one bidding robot."""

    robot_id: str
    position: tuple[float, float]
    weights: ScoreWeights


@dataclass(frozen=True)
class Assignment:
    robot_id: str
    target_index: int
    target: tuple[float, float]
    total: float
    score_belief: float
    score_traversability: float
    score_time: float


def generate_targets(bounds, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniformly distributed candidate target points, shape (T, 2)."""
    (x_lo, y_lo), (x_hi, y_hi) = bounds
    return rng.uniform((x_lo, y_lo), (x_hi, y_hi), size=(count, 2))


def _ellipse_points(p0, t, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform-area samples inside the ellipse with foci ``p0`` and ``t``."""
    p0 = np.asarray(p0, float)
    t = np.asarray(t, float)
    span = t - p0
    dist = float(np.hypot(*span))
    semi_minor = max(MIN_SEMI_MINOR, SEMI_MINOR_RATIO * dist)
    semi_major = math.hypot(semi_minor, dist / 2.0)
    center = (p0 + t) / 2.0
    axis = span / dist
    perp = np.array([-axis[1], axis[0]])
    points = np.empty((count, 2))
    filled = 0
    while filled < count:
        draw = rng.uniform(-1.0, 1.0, size=(2 * (count - filled), 2))
        keep = draw[np.sum(draw**2, axis=1) <= 1.0]
        for local in keep[: count - filled]:
            points[filled] = (
                center + local[0] * semi_major * axis + local[1] * semi_minor * perp
            )
            filled += 1
    return points


def traversability_score(
    terrain_field: TerrainField, p0, t, alpha_t: float, num_samples: int, rng
) -> float:
    """Negated mean+std of predicted slope magnitudes between ``p0`` and ``t``.

    Slopes are sampled at ``num_samples`` uniform points inside the ellipse
    with foci at the robot and the target; a degenerate ellipse (p0 == t)
    falls back to the slope at ``p0`` alone.
    """
    p0 = np.asarray(p0, float)
    t = np.asarray(t, float)
    if float(np.hypot(*(t - p0))) < 1e-12:
        return -float(np.linalg.norm(terrain_field.slope_world_many(p0[None, :])[0]))
    pts = _ellipse_points(p0, t, num_samples, rng)
    mags = np.linalg.norm(terrain_field.slope_world_many(pts), axis=1)
    return -float(mags.mean()) - alpha_t * float(mags.std())


def time_score(p0, t, v_max: float) -> float:
    """Negated travel time at top speed: ``-||t - p0|| / v_max``."""
    if v_max <= 0:
        raise ValueError("v_max must be > 0")
    return -float(np.hypot(*(np.asarray(t, float) - np.asarray(p0, float)))) / v_max


def total_score(weights: ScoreWeights, s_b: float, s_t: float, s_d: float) -> float:
    """Weighted sum ``w_b*S_b + w_t*S_t + w_d*S_d``."""
    return weights.w_b * s_b + weights.w_t * s_t + weights.w_d * s_d


def score_matrix(
    robots: list[RobotView],
    targets: np.ndarray,
    belief_field: BeliefField,
    terrain_field: TerrainField,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """All component and total scores, each shaped (num_robots, num_targets).

    The traversability term is skipped (zeros) for robots with ``w_t == 0``;
    flight does not pay terrain-slope costs.
    """
    targets = np.atleast_2d(np.asarray(targets, float))
    n_r, n_t = len(robots), len(targets)
    s_b = np.empty((n_r, n_t))
    s_t = np.zeros((n_r, n_t))
    s_d = np.empty((n_r, n_t))
    totals = np.empty((n_r, n_t))
    for i, robot in enumerate(robots):
        w = robot.weights
        s_b[i] = belief_ucb_many(belief_field, targets, w.alpha_b)
        dists = np.linalg.norm(targets - np.asarray(robot.position), axis=1)
        s_d[i] = -dists / w.v_max
        if w.w_t > 0:
            for j in range(n_t):
                s_t[i, j] = traversability_score(
                    terrain_field, robot.position, targets[j], w.alpha_t,
                    w.ellipse_samples, rng,
                )
        totals[i] = w.w_b * s_b[i] + w.w_t * s_t[i] + w.w_d * s_d[i]
    return {"belief": s_b, "traversability": s_t, "time": s_d, "total": totals}


def auction(
    robots: list[RobotView],
    targets: np.ndarray,
    belief_field: BeliefField,
    terrain_field: TerrainField,
    rng: np.random.Generator,
    scores: dict[str, np.ndarray] | None = None,
) -> list[Assignment]:
    """Each robot bids independently: argmax of its total score over targets.

    Ties break toward the lower target index. Pass ``scores`` to reuse a
    precomputed :func:`score_matrix`.
    """
    targets = np.atleast_2d(np.asarray(targets, float))
    if len(targets) == 0:
        raise ValueError("auction needs at least one candidate target")
    if scores is None:
        scores = score_matrix(robots, targets, belief_field, terrain_field, rng)
    out = []
    for i, robot in enumerate(robots):
        j = int(np.argmax(scores["total"][i]))
        out.append(
            Assignment(
                robot_id=robot.robot_id,
                target_index=j,
                target=(float(targets[j, 0]), float(targets[j, 1])),
                total=float(scores["total"][i, j]),
                score_belief=float(scores["belief"][i, j]),
                score_traversability=float(scores["traversability"][i, j]),
                score_time=float(scores["time"][i, j]),
            )
        )
    return out


def _orientation(a, b, c) -> int:
    """Sign of the cross product (b-a) x (c-a): 1 ccw, -1 cw, 0 collinear."""
    val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if val > 0.0:
        return 1
    if val < 0.0:
        return -1
    return 0


def _on_segment(a, b, p) -> bool:
    """Collinear point ``p`` lies within the bounding box of segment ab."""
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segments_conflict(seg_a, seg_b) -> bool:
    """Segment intersection by orientation tests, endpoint touching included."""
    a1, a2 = seg_a
    b1, b2 = seg_b
    o1 = _orientation(a1, a2, b1)
    o2 = _orientation(a1, a2, b2)
    o3 = _orientation(b1, b2, a1)
    o4 = _orientation(b1, b2, a2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(a1, a2, b1):
        return True
    if o2 == 0 and _on_segment(a1, a2, b2):
        return True
    if o3 == 0 and _on_segment(b1, b2, a1):
        return True
    if o4 == 0 and _on_segment(b1, b2, a2):
        return True
    return False


def _segment(robot: RobotView, assignment: Assignment):
    return (tuple(robot.position), assignment.target)


def find_conflicts(assignments: list[Assignment], robots: list[RobotView]) -> list[tuple[int, int]]:
    """Index pairs (i, j), i < j, whose robot-to-target segments intersect."""
    segs = [_segment(r, a) for r, a in zip(robots, assignments)]
    out = []
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            if segments_conflict(segs[i], segs[j]):
                out.append((i, j))
    return out


def resolve_conflicts(
    assignments: list[Assignment],
    robots: list[RobotView],
    targets: np.ndarray,
    scores: dict[str, np.ndarray],
    max_sweeps: int = 10,
) -> list[Assignment]:
    """Consensus phase: replace conflicting pairs with the best clean pair.

    For each conflicting robot pair (taken in robot-index order) search all
    target pairs for the non-conflicting combination with the highest score
    sum; sweep until conflict-free or ``max_sweeps``. When every pair of
    targets conflicts the original assignment is kept and a warning logged.
    """
    targets = np.atleast_2d(np.asarray(targets, float))
    assignments = list(assignments)
    for _ in range(max_sweeps):
        conflicts = find_conflicts(assignments, robots)
        if not conflicts:
            break
        for i, j in conflicts:
            if not segments_conflict(
                _segment(robots[i], assignments[i]), _segment(robots[j], assignments[j])
            ):
                continue  # already fixed by an earlier pair this sweep
            best = None
            pi = np.asarray(robots[i].position)
            pj = np.asarray(robots[j].position)
            for ti in range(len(targets)):
                seg_i = (tuple(pi), (targets[ti, 0], targets[ti, 1]))
                for tj in range(len(targets)):
                    seg_j = (tuple(pj), (targets[tj, 0], targets[tj, 1]))
                    if segments_conflict(seg_i, seg_j):
                        continue
                    sum_score = scores["total"][i, ti] + scores["total"][j, tj]
                    if best is None or sum_score > best[0]:
                        best = (sum_score, ti, tj)
            if best is None:
                logger.warning(
                    "no conflict-free target pair for robots %s and %s; keeping bids",
                    robots[i].robot_id,
                    robots[j].robot_id,
                )
                continue
            _, ti, tj = best
            assignments[i] = _replace_target(assignments[i], robots[i], ti, targets, scores, i)
            assignments[j] = _replace_target(assignments[j], robots[j], tj, targets, scores, j)
    else:
        if find_conflicts(assignments, robots):
            logger.warning("conflicts remain after %d consensus sweeps", max_sweeps)
    return assignments


def _replace_target(assignment, robot, target_index, targets, scores, row) -> Assignment:
    return Assignment(
        robot_id=assignment.robot_id,
        target_index=int(target_index),
        target=(float(targets[target_index, 0]), float(targets[target_index, 1])),
        total=float(scores["total"][row, target_index]),
        score_belief=float(scores["belief"][row, target_index]),
        score_traversability=float(scores["traversability"][row, target_index]),
        score_time=float(scores["time"][row, target_index]),
    )


def nearest_free_robot(positions: dict[str, tuple[float, float]], point) -> str | None:
    """Id of the position closest to ``point``; ties break on id order."""
    if not positions:
        return None
    point = np.asarray(point, float)
    return min(
        sorted(positions),
        key=lambda rid: float(np.linalg.norm(np.asarray(positions[rid]) - point)),
    )


def formation_pair_targets(anchor, toward, offset: float) -> tuple[np.ndarray, np.ndarray]:
    """Two targets straddling ``anchor``, offset perpendicular to ``toward``.

    Coincident pair targets are incompatible with the minimum inter-robot
    distance, so the carry pair flanks the subject (and later the rescue
    point) symmetrically.
    """
    anchor = np.asarray(anchor, float)
    toward = np.asarray(toward, float)
    span = toward - anchor
    norm = float(np.hypot(*span))
    if norm < 1e-9:
        perp = np.array([0.0, 1.0])
    else:
        direction = span / norm
        perp = np.array([-direction[1], direction[0]])
    return anchor + offset * perp, anchor - offset * perp


def orbit_target(anchor, step_index: int, radius: float, mode: str = "printed",
                 period: int = 25) -> np.ndarray:
    """Mapping-orbit waypoint around ``anchor`` for step ``step_index``.

    ``printed`` mode advances the phase by 2/pi radians per step (an
    irrational fraction of the circle, so waypoints never repeat exactly);
    ``uniform`` closes the circle every ``period`` steps.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    if mode == "printed":
        angle = 2.0 * step_index / math.pi
    elif mode == "uniform":
        angle = 2.0 * math.pi * step_index / period
    else:
        raise ValueError(f"unknown orbit mode {mode!r}")
    anchor = np.asarray(anchor, float)
    return anchor + radius * np.array([math.cos(angle), math.sin(angle)])
