"""Terrain elevation field.

Ground truth is a deterministic analytic surface (Gaussian hills, ridges and
a planar trend). The learned view is a GP over sparse elevation samples with
spatially binned, capacity-bounded online ingestion; slope queries come from
the analytic gradient of the GP posterior mean, in world frame or rotated to
the robot's sagittal/lateral frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import gp

__all__ = [
    "Hill",
    "Ridge",
    "PlanarTrend",
    "TerrainSample",
    "LocalSlopes",
    "TerrainField",
    "ground_truth_elevation",
    "ground_truth_gradient",
    "ingest",
    "slope_world",
    "slope_local",
    "snap_to_bin_center",
]


@dataclass(frozen=True)
class Hill:
    """Isotropic Gaussian bump: amplitude * exp(-||p-center||^2 / (2 radius^2))."""

    center: tuple[float, float]
    amplitude: float
    radius: float


@dataclass(frozen=True)
class Ridge:
    """Gaussian ridge along the crest line through ``center`` at ``axis_angle``.

    Elevation decays with the squared perpendicular distance to the crest:
    amplitude * exp(-d^2 / (2 width^2)).
    """

    center: tuple[float, float]
    amplitude: float
    width: float
    axis_angle: float


@dataclass(frozen=True)
class PlanarTrend:
    """Linear trend slope_x * x + slope_y * y."""

    slope_x: float
    slope_y: float


TerrainFeature = Hill | Ridge | PlanarTrend


@dataclass(frozen=True)
class TerrainSample:
    """One elevation measurement at a 2-D world position."""

    position: tuple[float, float]
    elevation: float


@dataclass(frozen=True)
class LocalSlopes:
    """Slopes along (sagittal) and across (lateral) the robot heading."""

    sagittal: float
    lateral: float


def _in_bounds(p, bounds) -> bool:
    (x_lo, y_lo), (x_hi, y_hi) = bounds
    return x_lo <= p[0] <= x_hi and y_lo <= p[1] <= y_hi


def ground_truth_elevation(features, p, bounds=None) -> float:
    """True elevation at ``p``; raises ``ValueError`` outside ``bounds``."""
    if bounds is not None and not _in_bounds(p, bounds):
        raise ValueError(f"query point {tuple(p)} outside world bounds")
    x, y = float(p[0]), float(p[1])
    e = 0.0
    for f in features:
        if isinstance(f, Hill):
            dx, dy = x - f.center[0], y - f.center[1]
            e += f.amplitude * math.exp(-(dx * dx + dy * dy) / (2.0 * f.radius**2))
        elif isinstance(f, Ridge):
            nx, ny = -math.sin(f.axis_angle), math.cos(f.axis_angle)
            d = (x - f.center[0]) * nx + (y - f.center[1]) * ny
            e += f.amplitude * math.exp(-d * d / (2.0 * f.width**2))
        elif isinstance(f, PlanarTrend):
            e += f.slope_x * x + f.slope_y * y
        else:
            raise TypeError(f"unknown terrain feature {f!r}")
    return e


def ground_truth_gradient(features, p) -> np.ndarray:
    """Analytic gradient of the true surface at ``p``."""
    x, y = float(p[0]), float(p[1])
    g = np.zeros(2)
    for f in features:
        if isinstance(f, Hill):
            dx, dy = x - f.center[0], y - f.center[1]
            val = f.amplitude * math.exp(-(dx * dx + dy * dy) / (2.0 * f.radius**2))
            g[0] += val * (-dx / f.radius**2)
            g[1] += val * (-dy / f.radius**2)
        elif isinstance(f, Ridge):
            nx, ny = -math.sin(f.axis_angle), math.cos(f.axis_angle)
            d = (x - f.center[0]) * nx + (y - f.center[1]) * ny
            val = f.amplitude * math.exp(-d * d / (2.0 * f.width**2))
            g[0] += val * (-d / f.width**2) * nx
            g[1] += val * (-d / f.width**2) * ny
        elif isinstance(f, PlanarTrend):
            g[0] += f.slope_x
            g[1] += f.slope_y
        else:
            raise TypeError(f"unknown terrain feature {f!r}")
    return g


def snap_to_bin_center(p, bin_size: float) -> tuple[float, float]:
    """Center of the square spatial bin containing ``p``."""
    return (
        (math.floor(p[0] / bin_size) + 0.5) * bin_size,
        (math.floor(p[1] / bin_size) + 0.5) * bin_size,
    )


class TerrainField:
    """GP elevation map over a bounded, spatially binned sample set.

    At most one sample is retained per spatial bin (newest wins). Once
    ``capacity`` bins are occupied, samples landing in new bins are dropped
    (and counted) rather than evicting old bins, so the training set only
    accumulates and the GP posterior variance never increases. The GP is
    refit at most once per :func:`ingest` call, and only when the dataset
    actually changed; ``gp_model`` snapshots are immutable.
    """

    def __init__(self, params: gp.KernelParams, bounds, bin_size: float = 0.5, capacity: int = 400):
        if bin_size <= 0:
            raise ValueError("bin_size must be > 0")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.params = params
        self.bounds = bounds
        self.bin_size = bin_size
        self.capacity = capacity
        self._bins: dict[tuple[int, int], TerrainSample] = {}
        self._model: gp.GpModel | None = None
        self.version = 0
        self.refit_count = 0
        self.dropped_out_of_bounds = 0
        self.dropped_at_capacity = 0

    @property
    def num_samples(self) -> int:
        return len(self._bins)

    @property
    def is_fitted(self) -> bool:
        return self._model is not None

    @property
    def gp_model(self) -> gp.GpModel | None:
        return self._model

    def samples(self) -> list[TerrainSample]:
        return list(self._bins.values())

    def _bin_index(self, p) -> tuple[int, int]:
        return (math.floor(p[0] / self.bin_size), math.floor(p[1] / self.bin_size))

    def _refit(self):
        pts = np.array([s.position for s in self._bins.values()])
        obs = np.array([s.elevation for s in self._bins.values()])
        self._model = gp.fit(pts, obs, self.params)
        self.refit_count += 1

    def ingest(self, samples) -> "TerrainField":
        """Merge a batch of samples; dedupe by bin; refit once if changed."""
        changed = False
        for s in samples:
            if not _in_bounds(s.position, self.bounds):
                self.dropped_out_of_bounds += 1
                continue
            idx = self._bin_index(s.position)
            current = self._bins.get(idx)
            if current is not None:
                if current.position == tuple(s.position) and current.elevation == s.elevation:
                    continue
                self._bins[idx] = TerrainSample(tuple(s.position), float(s.elevation))
                changed = True
            elif len(self._bins) >= self.capacity:
                self.dropped_at_capacity += 1
            else:
                self._bins[idx] = TerrainSample(tuple(s.position), float(s.elevation))
                changed = True
        if changed:
            self.version += 1
            self._refit()
        return self

    def elevation(self, p) -> float:
        """Posterior mean elevation; 0 on an empty field (prior mean)."""
        if self._model is None:
            return 0.0
        return float(gp.predict_mean_many(self._model, np.asarray(p, float)[None, :])[0])

    def elevation_std_grid(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Batched posterior mean and standard deviation at ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._model is None:
            prior = math.sqrt(self.params.signal_variance)
            return np.zeros(len(points)), np.full(len(points), prior)
        means, variances = gp.predict_many(self._model, points)
        return means, np.sqrt(variances)

    def slope_world_many(self, points) -> np.ndarray:
        """Batched posterior-mean gradients, shape (p, 2); zeros when empty."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._model is None:
            return np.zeros_like(points)
        return gp.predict_mean_gradient_many(self._model, points)

    def grid_rows(self, xs, ys):
        """Rows (x, y, mean, std) over the cartesian grid, for CSV export."""
        gx, gy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        means, stds = self.elevation_std_grid(pts)
        return np.column_stack([pts, means, stds])


def ingest(field: TerrainField, samples) -> TerrainField:
    """Functional alias for :meth:`TerrainField.ingest` (mutates in place)."""
    return field.ingest(samples)


def slope_world(field: TerrainField, p) -> np.ndarray:
    """World-frame elevation gradient of the GP mean at ``p``.

    Returns (0, 0) on an unfitted field; check ``field.is_fitted`` to tell a
    flat estimate from a low-confidence empty one.
    """
    return field.slope_world_many(np.asarray(p, float)[None, :])[0]


def slope_local(field: TerrainField, p, heading: float) -> LocalSlopes:
    """Gradient rotated into the robot frame at ``heading`` (radians).

    ``[sag, lat]^T = R(heading) [d/dx, d/dy]^T`` with
    ``R = [[cos, sin], [-sin, cos]]``, so sagittal is the slope along the
    heading direction.
    """
    gx, gy = slope_world(field, p)
    c, s = math.cos(heading), math.sin(heading)
    return LocalSlopes(sagittal=c * gx + s * gy, lateral=-s * gx + c * gy)
