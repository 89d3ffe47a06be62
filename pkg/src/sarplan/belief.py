"""Target-belief field over the search area.

The prior is built by sampling candidate subject positions around each belief
point from a normal distribution whose standard deviation is the point's
confidence value; each sampled position enters the belief GP with observation
1.0 (presence evidence).

Searching decays the belief: every swept spatial bin receives a 0.0
observation in the GP (shrinking the predictive uncertainty there) and joins
the coverage set. The exposed belief mean is the prior GP mean, clamped at
zero, discounted by the accumulated coverage:

    mean(p)     = max(prior_mean(p), 0) * (1 - coverage(p))
    coverage(p) = 1 - prod_marks (1 - exp(-||p - mark||^2 / (2 l_cov^2)))

Coverage only grows as marks accumulate, so the belief mean is non-increasing
at every point over the mission (raw GP conditioning on 0-value rows is not:
its posterior mean overshoots upward in a ring around newly searched bumps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp

__all__ = [
    "BeliefPrior",
    "BeliefField",
    "build_prior",
    "belief_ucb",
    "belief_ucb_many",
    "mark_searched",
    "mark_searched_batch",
    "average_belief",
]


@dataclass(frozen=True)
class BeliefPrior:
    """Initial belief: (position, confidence) pairs and samples per point.

    Confidence is the standard deviation, in meters, of the normal
    distribution the training positions are drawn from.
    """

    points: tuple[tuple[tuple[float, float], float], ...]
    samples_per_point: int = 8

    def __post_init__(self):
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be >= 1")
        for (_, conf) in self.points:
            if conf <= 0:
                raise ValueError("belief confidence must be > 0")


class BeliefField:
    """Belief map: prior presence GP, searched marks, coverage discount."""

    def __init__(
        self,
        params: gp.KernelParams,
        bounds,
        prior_inputs,
        bin_size: float = 1.0,
        coverage_lengthscale: float | None = None,
    ):
        self.params = params
        self.bounds = bounds
        self.bin_size = bin_size
        self.coverage_lengthscale = (
            bin_size if coverage_lengthscale is None else coverage_lengthscale
        )
        self.prior_inputs = np.atleast_2d(np.asarray(prior_inputs, dtype=float)).reshape(-1, 2)
        self._marks: dict[tuple[int, int], tuple[float, float]] = {}
        self._prior_model: gp.GpModel | None = None
        self._marked_model: gp.GpModel | None = None
        self.version = 0
        self.refit_count = 0
        if len(self.prior_inputs):
            self._prior_model = gp.fit(
                self.prior_inputs, np.ones(len(self.prior_inputs)), self.params
            )
            self._marked_model = self._prior_model

    @property
    def gp_model(self) -> gp.GpModel | None:
        """The GP conditioned on prior samples and searched 0.0 marks."""
        return self._marked_model

    @property
    def num_marks(self) -> int:
        return len(self._marks)

    def mark_positions(self) -> np.ndarray:
        return np.array(list(self._marks.values())).reshape(-1, 2)

    def _refit_marked(self):
        marks = self.mark_positions()
        inputs = (
            np.vstack([self.prior_inputs, marks]) if len(marks) else self.prior_inputs
        )
        if len(inputs) == 0:
            self._marked_model = None
            return
        values = np.concatenate([np.ones(len(self.prior_inputs)), np.zeros(len(marks))])
        self._marked_model = gp.fit(inputs, values, self.params)
        self.refit_count += 1

    def coverage_many(self, points) -> np.ndarray:
        """Searched-coverage in [0, 1): noisy-OR of mark kernels."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        marks = self.mark_positions()
        if len(marks) == 0:
            return np.zeros(len(points))
        sq = (
            np.sum(points**2, axis=1)[:, None]
            + np.sum(marks**2, axis=1)[None, :]
            - 2.0 * points @ marks.T
        )
        np.maximum(sq, 0.0, out=sq)
        k = np.exp(-sq / (2.0 * self.coverage_lengthscale**2))
        log_miss = np.sum(np.log1p(-np.minimum(k, 1.0 - 1e-15)), axis=1)
        return 1.0 - np.exp(log_miss)

    def mean_many(self, points) -> np.ndarray:
        """Coverage-discounted belief mean, non-increasing over the mission."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._prior_model is None:
            return np.zeros(len(points))
        raw = gp.predict_mean_many(self._prior_model, points)
        np.maximum(raw, 0.0, out=raw)
        return raw * (1.0 - self.coverage_many(points))

    def mean_std_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._marked_model is None:
            prior = math.sqrt(self.params.signal_variance)
            return self.mean_many(points), np.full(len(points), prior)
        _, variances = gp.predict_many(self._marked_model, points)
        return self.mean_many(points), np.sqrt(variances)

    def grid_rows(self, xs, ys):
        """Rows (x, y, mean) over the cartesian grid, for CSV export."""
        gx, gy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        return np.column_stack([pts, self.mean_many(pts)])


def build_prior(
    prior: BeliefPrior,
    params: gp.KernelParams,
    bounds,
    seed: int,
    bin_size: float = 1.0,
    coverage_lengthscale: float | None = None,
) -> BeliefField:
    """Sample the prior training set (seeded, reproducible) and fit the GP.

    For each belief point, ``samples_per_point`` positions are drawn from
    N(position, confidence^2 I), clipped into the world bounds, and observed
    with value 1.0. An empty prior gives a uniformly zero belief field.
    """
    rng = np.random.default_rng(seed)
    (x_lo, y_lo), (x_hi, y_hi) = bounds
    rows = []
    for (pos, conf) in prior.points:
        draws = rng.normal(loc=pos, scale=conf, size=(prior.samples_per_point, 2))
        draws[:, 0] = np.clip(draws[:, 0], x_lo, x_hi)
        draws[:, 1] = np.clip(draws[:, 1], y_lo, y_hi)
        rows.append(draws)
    inputs = np.vstack(rows) if rows else np.zeros((0, 2))
    return BeliefField(
        params, bounds, inputs, bin_size=bin_size, coverage_lengthscale=coverage_lengthscale
    )


def belief_ucb(field: BeliefField, p, alpha_b: float) -> float:
    """Upper confidence bound ``mean + alpha_b * std`` at a single point."""
    return float(belief_ucb_many(field, np.asarray(p, float)[None, :], alpha_b)[0])


def belief_ucb_many(field: BeliefField, points, alpha_b: float) -> np.ndarray:
    means, stds = field.mean_std_many(points)
    return means + alpha_b * stds


def mark_searched(field: BeliefField, p, radius: float) -> BeliefField:
    """Record that the disc of ``radius`` around ``p`` has been searched."""
    return mark_searched_batch(field, [(p, radius)])


def mark_searched_batch(field: BeliefField, discs) -> BeliefField:
    """Insert 0.0 observations for every newly searched bin; refit at most once.

    A bin is marked when its center falls inside any of the ``(center,
    radius)`` discs and was not marked before. Marks enter the belief GP as
    0.0-valued rows (shrinking its predictive uncertainty) and the coverage
    set (discounting the exposed mean). Mutates ``field`` in place.
    """
    added = False
    for p, radius in discs:
        if radius <= 0:
            raise ValueError("radius must be > 0")
        px, py = float(p[0]), float(p[1])
        b = field.bin_size
        for ix in range(math.floor((px - radius) / b), math.floor((px + radius) / b) + 1):
            for iy in range(math.floor((py - radius) / b), math.floor((py + radius) / b) + 1):
                if (ix, iy) in field._marks:
                    continue
                cx, cy = (ix + 0.5) * b, (iy + 0.5) * b
                if (cx - px) ** 2 + (cy - py) ** 2 > radius * radius:
                    continue
                (x_lo, y_lo), (x_hi, y_hi) = field.bounds
                if not (x_lo <= cx <= x_hi and y_lo <= cy <= y_hi):
                    continue
                field._marks[(ix, iy)] = (cx, cy)
                added = True
    if added:
        field.version += 1
        field._refit_marked()
    return field


def average_belief(field: BeliefField, grid) -> float:
    """Mean belief over the evaluation grid points."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    return float(field.mean_many(grid).mean())
