"""Shared test oracles: a linear-Gaussian model, a hand-written Kalman
filter, and a finite-difference gradient checker.

The KF here is deliberately written from the textbook equations (explicit
inverses, no shared code with the package) so it can serve as an
independent reference for the Gaussian assumed filter.
"""

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from gafadapt.models import StateSpaceModel
from gafadapt.nn import forward

LIN_F = np.array([[0.9, 0.1], [0.0, 0.8]])
LIN_H = np.array([[1.0, 0.0]])
LIN_Q = np.array([[0.05, 0.01], [0.01, 0.04]])
LIN_R = np.array([[0.2]])


def _lin_dynamics(x, k):
    return np.asarray(x, dtype=float) @ LIN_F.T


def _lin_measurement(x, k):
    return np.asarray(x, dtype=float) @ LIN_H.T


def linear_model(horizon: int = 100) -> StateSpaceModel:
    """Stable 2-state linear model with stationary initial covariance.

    P0 solves P = F P F^T + Q, so the simulated x_1 ~ N(0, P0) agrees
    exactly with the filter's first prediction N(0, F P0 F^T + Q): the
    filter is statistically consistent from the very first step.
    """
    p0 = solve_discrete_lyapunov(LIN_F, LIN_Q)
    return StateSpaceModel(
        name="lin2",
        n_x=2,
        n_z=1,
        dynamics=_lin_dynamics,
        measurement=_lin_measurement,
        process_cov=LIN_Q,
        meas_cov=LIN_R,
        init_mean=np.zeros(2),
        init_cov=p0,
        horizon=horizon,
    )


def kf_predict(mean, cov, F, Q):
    return F @ mean, F @ cov @ F.T + Q


def kf_update(mean, cov, z, H, R):
    innov_cov = H @ cov @ H.T + R
    gain = cov @ H.T @ np.linalg.inv(innov_cov)
    innov = z - H @ mean
    mean = mean + gain @ innov
    cov = cov - gain @ innov_cov @ gain.T
    nis = float(innov @ np.linalg.inv(innov_cov) @ innov)
    return mean, cov, innov_cov, innov, nis


def kf_filter(model, measurements, F=LIN_F, H=LIN_H):
    """Reference KF run mirroring run_filter's structure (predict, update)."""
    mean, cov = model.init_mean.copy(), model.init_cov.copy()
    means, covs, nises = [], [], []
    for z in measurements:
        mean, cov = kf_predict(mean, cov, F, model.process_cov)
        mean, cov, _, _, nis = kf_update(mean, cov, z, H, model.meas_cov)
        means.append(mean.copy())
        covs.append(cov.copy())
        nises.append(nis)
    return np.array(means), np.array(covs), np.array(nises)


def kf_filter_vectorized(model, all_states, all_measurements, F=LIN_F, H=LIN_H):
    """Reference KF over M runs at once (the covariance recursion is shared).

    Returns (errors (M, T, n_x), covs (T, n_x, n_x), nis (M, T)).
    """
    n_runs, horizon, _ = all_states.shape
    mean = np.zeros((n_runs, model.n_x))
    cov = model.init_cov.copy()
    errors = np.empty((n_runs, horizon, model.n_x))
    covs = np.empty((horizon, model.n_x, model.n_x))
    nis = np.empty((n_runs, horizon))
    for t in range(horizon):
        mean = mean @ F.T
        cov = F @ cov @ F.T + model.process_cov
        innov_cov = H @ cov @ H.T + model.meas_cov
        gain = cov @ H.T @ np.linalg.inv(innov_cov)
        innov = all_measurements[:, t, :] - mean @ H.T
        mean = mean + innov @ gain.T
        cov = cov - gain @ innov_cov @ gain.T
        s_inv = np.linalg.inv(innov_cov)
        nis[:, t] = np.einsum("mi,ij,mj->m", innov, s_inv, innov)
        errors[:, t, :] = all_states[:, t, :] - mean
        covs[t] = cov
    return errors, covs, nis


def finite_diff_gradients(net, x, grad_out, step: float = 1e-5):
    """Central-difference gradients of (output . grad_out) w.r.t. all params."""

    def objective():
        out, _ = forward(net, x)
        return float(out @ grad_out)

    grads = []
    for param in net.parameters():
        grad = np.zeros_like(param)
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = objective()
            flat[i] = orig - step
            minus = objective()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * step)
        grads.append(grad)
    return grads
