"""Spatiotemporal Gaussian process over (beam azimuth, beam elevation, slot).

The covariance is a separable product of squared-exponential kernels in the
two beam-index axes and an exponential (Ornstein-Uhlenbeck) kernel in time::

    k((az, el, t), (az', el', t')) =
        s2 * exp(-(az - az')**2 / (2 l_az**2))
           * exp(-(el - el')**2 / (2 l_el**2))
           * exp(-|t - t'| / l_t)

Models are refitted from scratch; at a few hundred observations a fresh
Cholesky factorisation is cheap and there is no downdating to go wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import FactorizationFailure

DEFAULT_N_MAX = 256


class BeamPoint(NamedTuple):
    az: int
    el: int
    slot: int


class RsrpSample(NamedTuple):
    point: BeamPoint
    rsrp: float


@dataclass(frozen=True)
class KernelSpec:
    """Kernel hyperparameters. Lengthscales are in beam indices / slots, variances in dB^2."""

    lengthscale_az: float = 1.5
    lengthscale_el: float = 1.5
    lengthscale_time: float = 8.0
    signal_variance: float = 25.0
    noise_variance: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lengthscale_az", "lengthscale_el", "lengthscale_time", "signal_variance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance!r}")


def _as_array(points: Iterable[BeamPoint] | np.ndarray) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        arr = np.array([tuple(p) for p in points], dtype=float)
    return arr.reshape(-1, 3)


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-covariance between two ``(n, 3)`` arrays of (az, el, slot) rows."""
    a = _as_array(a)
    b = _as_array(b)
    d_az = (a[:, None, 0] - b[None, :, 0]) / spec.lengthscale_az
    d_el = (a[:, None, 1] - b[None, :, 1]) / spec.lengthscale_el
    d_t = np.abs(a[:, None, 2] - b[None, :, 2]) / spec.lengthscale_time
    return spec.signal_variance * np.exp(-0.5 * (d_az**2 + d_el**2) - d_t)


def kernel_eval(spec: KernelSpec, a: BeamPoint, b: BeamPoint) -> float:
    return float(kernel_matrix(spec, np.array([a], float), np.array([b], float))[0, 0])


@dataclass(frozen=True, eq=False)
class GpModel:
    """A fitted GP: observations plus the Cholesky factor of ``K + noise * I``."""

    spec: KernelSpec
    prior_mean: float
    observations: tuple[RsrpSample, ...]
    inputs: np.ndarray  # (n, 3)
    targets: np.ndarray  # (n,)
    chol: np.ndarray  # lower triangular (n, n)
    alpha: np.ndarray  # (K + noise I)^-1 (y - prior_mean)

    @property
    def n(self) -> int:
        return len(self.observations)


def fit(
    spec: KernelSpec,
    prior_mean: float,
    obs: Sequence[RsrpSample],
    n_max: int = DEFAULT_N_MAX,
) -> GpModel:
    """Condition the GP prior (constant mean ``prior_mean``) on ``obs``.

    Raises:
        ValueError: more than ``n_max`` observations.
        FactorizationFailure: ``K + noise * I`` is not numerically positive
            definite, typically duplicate inputs with zero noise.
    """
    obs = tuple(s if type(s) is RsrpSample and type(s.point) is BeamPoint
                else RsrpSample(BeamPoint(*s.point), float(s.rsrp)) for s in obs)
    if len(obs) > n_max:
        raise ValueError(f"{len(obs)} observations exceed the window cap n_max={n_max}")
    x = np.array([s.point for s in obs], dtype=float).reshape(-1, 3)
    y = np.array([s.rsrp for s in obs], dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("RSRP observations must be finite")
    n = len(obs)
    if n == 0:
        empty = np.zeros((0, 0))
        return GpModel(spec, float(prior_mean), obs, x, y, empty, np.zeros(0))
    gram = kernel_matrix(spec, x, x)
    gram[np.diag_indices(n)] += spec.noise_variance
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(
            "kernel matrix plus noise is not positive definite "
            "(duplicate points with zero noise, or degenerate hyperparameters)"
        ) from exc
    alpha = cho_solve((chol, True), y - prior_mean)
    return GpModel(spec, float(prior_mean), obs, x, y, chol, alpha)


def posterior(model: GpModel, queries: Iterable[BeamPoint] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Latent posterior mean and variance at ``queries``.

    Observation noise is not added to the returned variance.
    """
    q = _as_array(queries)
    s2 = model.spec.signal_variance
    if model.n == 0:
        return np.full(len(q), model.prior_mean), np.full(len(q), s2)
    k_star = kernel_matrix(model.spec, model.inputs, q)
    mean = model.prior_mean + k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    var = s2 - np.einsum("ij,ij->j", v, v)
    return mean, np.clip(var, 0.0, s2)


def posterior_cov(model: GpModel, queries: Iterable[BeamPoint] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Joint latent posterior (mean vector, covariance matrix) at ``queries``."""
    q = _as_array(queries)
    prior = kernel_matrix(model.spec, q, q)
    if model.n == 0:
        return np.full(len(q), model.prior_mean), prior
    k_star = kernel_matrix(model.spec, model.inputs, q)
    mean = model.prior_mean + k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    cov = prior - v.T @ v
    return mean, 0.5 * (cov + cov.T)


def log_marginal_likelihood(model: GpModel) -> float:
    """Log evidence ``log N(y | prior_mean, K + noise * I)``."""
    if model.n == 0:
        raise ValueError("log marginal likelihood needs at least one observation")
    resid = model.targets - model.prior_mean
    log_det = 2.0 * np.sum(np.log(np.diag(model.chol)))
    return float(-0.5 * resid @ model.alpha - 0.5 * log_det - 0.5 * model.n * math.log(2 * math.pi))
