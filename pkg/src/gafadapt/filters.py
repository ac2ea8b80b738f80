"""Gaussian assumed filter with pluggable parameter-indexed moment transforms.

The filter skeleton (predict / update on mean and covariance) is fixed;
what varies is the rule used to push a Gaussian belief through the
nonlinear dynamics or measurement function:

* unscented transform, indexed by the scaling parameter kappa;
* stochastic integration rule, a degree-3 spherical-radial rule under a
  random rotation, averaged over n_iter independent rotations.

Measurement dimensions listed in the model's angular_meas_dims are
treated circularly: residuals are wrapped to (-pi, pi] before moments
are accumulated and means are combined on the circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.linalg import cho_solve

from .linalg import NotFactorizableError, cholesky_psd, symmetrize, wrap_angle
from .models import StateSpaceModel

UKF = "ukf"
SIF = "sif"

# Jitter ladder start used for covariance factorizations inside the filter.
COV_JITTER = 1e-12


class InnovationNotFiniteError(ValueError):
    """Measurement residual contained NaN or infinity."""


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian state belief: mean (n,) and symmetric PSD covariance (n, n)."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class TransformParams:
    """Moment-transform choice: kind UKF (kappa) or SIF (n_iter)."""

    kind: str
    kappa: float = 0.0
    n_iter: int = 1

    def __post_init__(self):
        if self.kind not in (UKF, SIF):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == SIF and self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")

    @property
    def value(self) -> float:
        return self.kappa if self.kind == UKF else self.n_iter

    def label(self) -> str:
        if self.kind == UKF:
            return f"kappa={self.kappa:g}"
        return f"n_iter={self.n_iter}"


def ukf_params(kappa: float) -> TransformParams:
    return TransformParams(kind=UKF, kappa=float(kappa))


def sif_params(n_iter: int) -> TransformParams:
    return TransformParams(kind=SIF, n_iter=int(n_iter))


@dataclass(frozen=True)
class MomentEstimate:
    """Transformed mean/covariance and input-output cross-covariance."""

    mean: np.ndarray
    cov: np.ndarray
    cross_cov: np.ndarray


@dataclass(frozen=True)
class UpdateResult:
    """One measurement update: posterior belief plus innovation quantities."""

    posterior: GaussianBelief
    innovation: np.ndarray
    innov_cov: np.ndarray
    pred_meas: np.ndarray
    gain: np.ndarray
    nis: float


def _combine_moments(points, values, weights, angular_dims):
    """Weighted mean/cov/cross-cov of transformed points.

    Angular output dimensions get a circular mean and wrapped residuals
    so that a 2*pi jump never inflates the covariance.
    """
    mean = weights @ values
    for dim in angular_dims:
        sin_sum = float(weights @ np.sin(values[:, dim]))
        cos_sum = float(weights @ np.cos(values[:, dim]))
        mean[dim] = np.arctan2(sin_sum, cos_sum)
    resid = values - mean
    for dim in angular_dims:
        resid[:, dim] = wrap_angle(resid[:, dim])
    weighted = resid * weights[:, None]
    cov = resid.T @ weighted
    cross = points.T @ weighted
    return mean, cov, cross


def unscented_weights(n: int, kappa: float) -> np.ndarray:
    """Sigma-point weights: w0 = kappa/(n+kappa), wi = 1/(2(n+kappa))."""
    if n + kappa <= 0:
        raise ValueError("unscented transform requires n + kappa > 0")
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
    weights[0] = kappa / (n + kappa)
    return weights


def unscented_transform(
    belief: GaussianBelief,
    g: Callable[[np.ndarray], np.ndarray],
    kappa: float,
    angular_dims: Iterable[int] = (),
) -> MomentEstimate:
    """Classic kappa-parameterized unscented transform.

    Sigma points x +- columns of sqrt((n + kappa) P); exact for affine g.
    """
    mean = np.asarray(belief.mean, dtype=float)
    n = mean.shape[0]
    weights = unscented_weights(n, kappa)
    chol, _ = cholesky_psd(belief.cov, COV_JITTER)
    spread = np.sqrt(n + kappa) * chol

    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1 : n + 1] = mean + spread.T
    points[n + 1 :] = mean - spread.T

    values = np.asarray(g(points), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    out_mean, out_cov, cross = _combine_moments(points - mean, values, weights, angular_dims)
    return MomentEstimate(mean=out_mean, cov=out_cov, cross_cov=cross)


def _random_rotations(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count Haar-distributed orthogonal n x n matrices (QR with sign fix)."""
    gauss = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.einsum("...ii->...i", r))
    signs[signs == 0.0] = 1.0
    return q * signs[:, None, :]


def stochastic_integration_transform(
    belief: GaussianBelief,
    g: Callable[[np.ndarray], np.ndarray],
    n_iter: int,
    rng: Optional[np.random.Generator],
    angular_dims: Iterable[int] = (),
) -> MomentEstimate:
    """Randomized degree-3 spherical-radial rule averaged over n_iter rotations.

    Each iteration evaluates g at x +- sqrt(n) * S * U e_i (S the Cholesky
    factor of P, U a random rotation) with equal weights 1/(2n); the
    per-iteration moment estimates are averaged arithmetically.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    mean = np.asarray(belief.mean, dtype=float)
    n = mean.shape[0]
    chol, _ = cholesky_psd(belief.cov, COV_JITTER)
    angular_dims = tuple(angular_dims)

    # In one dimension the rotation is +-1 and the symmetric point pair
    # {x - s, x + s} is unchanged, so every iteration is identical.
    if n == 1:
        reps = 1
        axes = np.sqrt(n) * chol[None, :, :]
    else:
        reps = int(n_iter)
        rotations = _random_rotations(n, reps, rng)
        axes = np.sqrt(n) * (chol @ rotations)

    # points[j] stacks the +columns then the -columns of axes[j].
    offsets = np.concatenate([axes.transpose(0, 2, 1), -axes.transpose(0, 2, 1)], axis=1)
    points = mean + offsets
    values = np.asarray(g(points.reshape(reps * 2 * n, n)), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    values = values.reshape(reps, 2 * n, -1)

    # Per-iteration moments, batched over iterations (equal weights 1/(2n)).
    means = values.mean(axis=1)
    for dim in angular_dims:
        means[:, dim] = np.arctan2(
            np.sin(values[:, :, dim]).mean(axis=1),
            np.cos(values[:, :, dim]).mean(axis=1),
        )
    resid = values - means[:, None, :]
    for dim in angular_dims:
        resid[:, :, dim] = wrap_angle(resid[:, :, dim])
    covs = np.einsum("rpi,rpj->rij", resid, resid) / (2.0 * n)
    crosses = np.einsum("rpi,rpj->rij", offsets, resid) / (2.0 * n)

    out_mean = means.mean(axis=0)
    for dim in angular_dims:
        # Arithmetic average taken relative to the first iteration's angle
        # so means straddling +-pi do not cancel.
        ref = means[0, dim]
        out_mean[dim] = wrap_angle(ref + np.mean(wrap_angle(means[:, dim] - ref)))
    return MomentEstimate(
        mean=out_mean, cov=covs.mean(axis=0), cross_cov=crosses.mean(axis=0)
    )


def apply_transform(
    belief: GaussianBelief,
    g: Callable[[np.ndarray], np.ndarray],
    params: TransformParams,
    rng: Optional[np.random.Generator],
    angular_dims: Iterable[int] = (),
) -> MomentEstimate:
    if params.kind == UKF:
        return unscented_transform(belief, g, params.kappa, angular_dims)
    return stochastic_integration_transform(belief, g, params.n_iter, rng, angular_dims)


def gaf_predict(
    belief: GaussianBelief,
    model: StateSpaceModel,
    k: int,
    params: TransformParams,
    rng: Optional[np.random.Generator] = None,
) -> GaussianBelief:
    """Time update: push the filtering belief at k through f(., k), add Q."""
    est = apply_transform(belief, lambda x: model.dynamics(x, k), params, rng)
    return GaussianBelief(mean=est.mean, cov=symmetrize(est.cov + model.process_cov))


def measurement_moments(
    pred: GaussianBelief,
    model: StateSpaceModel,
    k: int,
    params: TransformParams,
    rng: Optional[np.random.Generator] = None,
):
    """Predicted measurement mean, innovation covariance (with R), cross-cov."""
    est = apply_transform(
        pred, lambda x: model.measurement(x, k), params, rng, model.angular_meas_dims
    )
    innov_cov = symmetrize(est.cov + model.meas_cov)
    return est.mean, innov_cov, est.cross_cov


def innovation(z: np.ndarray, pred_meas: np.ndarray, model: StateSpaceModel) -> np.ndarray:
    resid = np.asarray(z, dtype=float) - pred_meas
    for dim in model.angular_meas_dims:
        resid[dim] = wrap_angle(resid[dim])
    return resid


def gaf_update(
    pred: GaussianBelief,
    model: StateSpaceModel,
    z: np.ndarray,
    k: int,
    params: TransformParams,
    rng: Optional[np.random.Generator] = None,
) -> UpdateResult:
    """Measurement update of the Gaussian assumed filter.

    Raises:
        NotFactorizableError: innovation covariance not PSD after jitter.
        InnovationNotFiniteError: residual contains non-finite entries.
    """
    pred_meas, innov_cov, cross = measurement_moments(pred, model, k, params, rng)
    resid = innovation(z, pred_meas, model)
    if not np.all(np.isfinite(resid)):
        raise InnovationNotFiniteError(f"innovation {resid} at step {k}")

    if model.n_z == 1:
        s = innov_cov[0, 0]
        if not s > 0.0:
            chol, eps = cholesky_psd(innov_cov, COV_JITTER)
            innov_cov = innov_cov + eps * np.eye(1)
            s = innov_cov[0, 0]
        gain = cross / s
        nis = float(resid[0] ** 2 / s)
    else:
        chol, eps = cholesky_psd(innov_cov, COV_JITTER)
        if eps:
            innov_cov = innov_cov + eps * np.eye(model.n_z)
        gain = cho_solve((chol, True), cross.T).T
        nis = float(resid @ cho_solve((chol, True), resid))

    post_mean = pred.mean + gain @ resid
    post_cov = symmetrize(pred.cov - gain @ innov_cov @ gain.T)
    return UpdateResult(
        posterior=GaussianBelief(mean=post_mean, cov=post_cov),
        innovation=resid,
        innov_cov=innov_cov,
        pred_meas=pred_meas,
        gain=gain,
        nis=nis,
    )
