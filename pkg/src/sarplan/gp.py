"""Gaussian process regression with an RBF kernel.

Exact GP inference backed by a Cholesky factorization of the regularized
kernel matrix, plus analytic gradients of the posterior mean. Fitted models
are immutable and safe for concurrent read-only prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "KernelParams",
    "GpModel",
    "GpPrediction",
    "GpFitError",
    "kernel",
    "kernel_matrix",
    "kernel_partial",
    "fit",
    "predict",
    "predict_many",
    "predict_mean_many",
    "predict_mean_gradient",
    "predict_mean_gradient_many",
]

# Jitter added to the regularized kernel matrix, as a fraction of the signal
# variance. Escalated multiplicatively when the factorization fails (duplicate
# sensor readings are routine).
_JITTER_INITIAL = 1e-10
_JITTER_MAX = 1e-4
_JITTER_GROWTH = 10.0


class GpFitError(RuntimeError):
    """Kernel matrix could not be factorized even at maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel hyperparameters.

    Attributes
    ----------
    signal_variance : float
        Prior variance of the latent function (must be > 0).
    lengthscale : float
        Correlation lengthscale in input units, meters here (must be > 0).
    noise_variance : float
        Observation noise variance (must be >= 0).
    """

    signal_variance: float = 1.0
    lengthscale: float = 1.5
    noise_variance: float = 1e-4

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")


@dataclass(frozen=True)
class GpPrediction:
    """Posterior mean and (non-negative) variance at a single test point."""

    mean: float
    variance: float


class GpModel:
    """Immutable fitted GP model.

    Holds the training data, the lower Cholesky factor of
    ``K + noise_variance*I + jitter*I`` and the precomputed weight vector
    ``alpha = (K + noise_variance*I)^-1 @ observations``. Use :func:`fit` to
    construct one.
    """

    __slots__ = ("inputs", "observations", "params", "chol_lower", "alpha", "jitter")

    def __init__(self, inputs, observations, params, chol_lower, alpha, jitter):
        self.inputs = inputs
        self.observations = observations
        self.params = params
        self.chol_lower = chol_lower
        self.alpha = alpha
        self.jitter = jitter
        for arr in (self.inputs, self.observations, self.chol_lower, self.alpha):
            arr.setflags(write=False)

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def __repr__(self):
        return (
            f"GpModel(m={self.num_samples}, n={self.input_dim}, "
            f"params={self.params}, jitter={self.jitter:g})"
        )


def kernel(a, b, params: KernelParams) -> float:
    """RBF covariance between two points.

    Returns ``signal_variance * exp(-||a - b||^2 / (2 * lengthscale^2))``;
    symmetric in its arguments.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    return params.signal_variance * float(np.exp(-sq / (2.0 * params.lengthscale**2)))


def kernel_matrix(xa, xb, params: KernelParams) -> np.ndarray:
    """Pairwise RBF covariances between two point sets, shape (len(xa), len(xb))."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    sq = np.sum(xa**2, axis=1)[:, None] + np.sum(xb**2, axis=1)[None, :]
    sq -= 2.0 * (xa @ xb.T)
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-sq / (2.0 * params.lengthscale**2))


def kernel_partial(a, b, dim: int, params: KernelParams) -> float:
    """Partial derivative of :func:`kernel` with respect to ``a[dim]``.

    Equals ``(-signal_variance / lengthscale^2) * (a[dim] - b[dim]) *
    exp(-||a - b||^2 / (2 * lengthscale^2))``; antisymmetric under swapping
    the arguments.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not 0 <= dim < a.shape[-1]:
        raise ValueError(f"dim {dim} out of range for {a.shape[-1]}-dim inputs")
    return -(a[dim] - b[dim]) / params.lengthscale**2 * kernel(a, b, params)


def fit(inputs, observations, params: KernelParams) -> GpModel:
    """Fit an exact GP to ``m`` samples.

    Factorizes ``K + noise_variance*I`` once (with escalating jitter on
    failure) and precomputes the prediction weights. The returned model is
    immutable.

    Raises
    ------
    ValueError
        Empty dataset or inconsistent shapes.
    GpFitError
        Factorization failed even at the maximum jitter level.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(observations, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("need at least one training sample")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"got {x.shape[0]} inputs but {y.shape[0]} observations")

    m = x.shape[0]
    gram = kernel_matrix(x, x, params)
    reg = gram + params.noise_variance * np.eye(m)

    jitter = 0.0
    jitter_cap = _JITTER_MAX * params.signal_variance
    while True:
        try:
            chol = np.linalg.cholesky(reg + jitter * np.eye(m))
            break
        except np.linalg.LinAlgError:
            if jitter >= jitter_cap:
                cond = np.linalg.cond(reg)
                raise GpFitError(
                    f"Cholesky factorization failed at jitter {jitter:g} "
                    f"(condition estimate {cond:.3e})"
                ) from None
            if jitter == 0.0:
                jitter = _JITTER_INITIAL * params.signal_variance
            else:
                jitter = min(jitter * _JITTER_GROWTH, jitter_cap)

    alpha = solve_triangular(
        chol.T, solve_triangular(chol, y, lower=True), lower=False
    )
    return GpModel(x.copy(), y.copy(), params, chol, alpha, jitter)


def predict(model: GpModel, test) -> GpPrediction:
    """Posterior mean and variance at a single test point."""
    means, variances = predict_many(model, np.asarray(test, dtype=float)[None, :])
    return GpPrediction(float(means[0]), float(variances[0]))


def predict_many(model: GpModel, tests) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at many test points, shapes (p,), (p,).

    ``mean = k^T (K + noise*I)^-1 y`` via the cached weights;
    ``variance = kappa(x, x) - k^T (K + noise*I)^-1 k`` via one triangular
    solve. Tiny negative variances from round-off are clamped at zero.
    """
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    kvec = kernel_matrix(model.inputs, tests, model.params)  # (m, p)
    means = kvec.T @ model.alpha
    w = solve_triangular(model.chol_lower, kvec, lower=True)
    variances = model.params.signal_variance - np.sum(w * w, axis=0)
    np.maximum(variances, 0.0, out=variances)
    return means, variances


def predict_mean_many(model: GpModel, tests) -> np.ndarray:
    """Posterior means only (skips the variance solve)."""
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    kvec = kernel_matrix(model.inputs, tests, model.params)
    return kvec.T @ model.alpha


def predict_mean_gradient(model: GpModel, test) -> np.ndarray:
    """Gradient of the posterior mean with respect to the test point.

    Built from the elementwise kernel partial derivatives:
    ``grad[d] = sum_j dk(test, x_j)/dtest[d] * alpha_j``.
    """
    return predict_mean_gradient_many(model, np.asarray(test, dtype=float)[None, :])[0]


def predict_mean_gradient_many(model: GpModel, tests) -> np.ndarray:
    """Posterior-mean gradients at many test points, shape (p, n)."""
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    kvec = kernel_matrix(tests, model.inputs, model.params)  # (p, m)
    weighted = kvec * model.alpha[None, :]
    diffs = tests[:, None, :] - model.inputs[None, :, :]  # (p, m, n)
    return -np.einsum("pm,pmn->pn", weighted, diffs) / model.params.lengthscale**2
