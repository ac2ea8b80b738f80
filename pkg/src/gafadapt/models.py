"""Benchmark state-space models and the ground-truth trajectory simulator.

Two models are provided: the univariate nonstationary growth model (UNGM,
a strongly nonlinear scalar benchmark) and a 4-state coordinated-turn
model (CTM) observed through a bearing angle.

Time indexing: trajectories carry states x_1..x_T and measurements
z_1..z_T (1-based, like the usual filtering notation) stored in 0-based
arrays, so states[i] is x_{i+1}.  The dynamics callable receives the
source-step index: x_{k+1} = f(x_k, k).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .linalg import cholesky_psd, wrap_angle
from .rng import SIM, substream

UNGM_HORIZON = 500
CTM_HORIZON = 150


@dataclass(frozen=True)
class StateSpaceModel:
    """Nonlinear state-space model x_{k+1} = f(x_k, k) + w, z_k = h(x_k, k) + v.

    dynamics and measurement accept a single state (n_x,) or a batch
    (m, n_x) of states and return matching shapes; everything downstream
    (moment transforms, simulator) relies on that.
    """

    name: str
    n_x: int
    n_z: int
    dynamics: Callable[[np.ndarray, int], np.ndarray]
    measurement: Callable[[np.ndarray, int], np.ndarray]
    process_cov: np.ndarray
    meas_cov: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    horizon: int
    angular_meas_dims: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.angular_meas_dims <= set(range(self.n_z)):
            raise ValueError("angular_meas_dims outside measurement dimensions")

    def with_horizon(self, horizon: int) -> "StateSpaceModel":
        return replace(self, horizon=int(horizon))


@dataclass(frozen=True)
class Trajectory:
    """One simulated realization: states (T, n_x), measurements (T, n_z)."""

    states: np.ndarray
    measurements: np.ndarray
    seed: int


def _ungm_dynamics(x, k):
    x = np.asarray(x, dtype=float)
    return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * math.cos(0.05 * k)


def _ungm_measurement(x, k):
    x = np.asarray(x, dtype=float)
    return x * x / 20.0


def ungm() -> StateSpaceModel:
    """Univariate nonstationary growth model, T=500, Q=1, R=0.1."""
    return StateSpaceModel(
        name="ungm",
        n_x=1,
        n_z=1,
        dynamics=_ungm_dynamics,
        measurement=_ungm_measurement,
        process_cov=np.array([[1.0]]),
        meas_cov=np.array([[0.1]]),
        init_mean=np.zeros(1),
        init_cov=np.array([[5.0]]),
        horizon=UNGM_HORIZON,
    )


def ctm_transition_matrix(turn_rate: float = 0.5, dt: float = 1.0) -> np.ndarray:
    """Coordinated-turn transition matrix for state [x, xdot, y, ydot]."""
    w = turn_rate
    swt, cwt = math.sin(w * dt), math.cos(w * dt)
    return np.array(
        [
            [1.0, swt / w, 0.0, -(1.0 - cwt) / w],
            [0.0, cwt, 0.0, -swt],
            [0.0, (1.0 - cwt) / w, 1.0, swt / w],
            [0.0, swt, 0.0, cwt],
        ]
    )


def ctm_process_cov(intensity: float = 1.0, dt: float = 1.0) -> np.ndarray:
    block = np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    return intensity * np.kron(np.eye(2), block)


_CTM_F = ctm_transition_matrix()


def _ctm_dynamics(x, k):
    return np.asarray(x, dtype=float) @ _CTM_F.T


def _ctm_measurement(x, k):
    x = np.asarray(x, dtype=float)
    return np.arctan2(x[..., 2], x[..., 0])[..., None]


def ctm() -> StateSpaceModel:
    """4-state coordinated-turn model with bearing measurement, T=150."""
    return StateSpaceModel(
        name="ctm",
        n_x=4,
        n_z=1,
        dynamics=_ctm_dynamics,
        measurement=_ctm_measurement,
        process_cov=ctm_process_cov(),
        meas_cov=np.array([[0.04]]),
        init_mean=np.array([80.0, 0.0, 0.0, 20.0]),
        init_cov=np.diag([1e3, 1e2, 1e3, 1e2]),
        horizon=CTM_HORIZON,
        angular_meas_dims=frozenset({0}),
    )


MODELS = {"ungm": ungm, "ctm": ctm}


def _noise_factor(cov: np.ndarray) -> np.ndarray:
    # Exactly-zero covariance means noise-free simulation; keep it exact.
    if not np.any(cov):
        return np.zeros_like(cov)
    return cholesky_psd(cov)[0]


def simulate(model: StateSpaceModel, seed: int) -> Trajectory:
    """Simulate one trajectory, fully determined by (model, seed).

    Draw order is fixed: initial state, then all process noises, then all
    measurement noises, each from the Philox stream (seed, SIM).
    """
    rng = substream(seed, SIM)
    horizon = model.horizon
    chol_init = _noise_factor(model.init_cov)
    chol_proc = _noise_factor(model.process_cov)
    chol_meas = _noise_factor(model.meas_cov)

    states = np.empty((horizon, model.n_x))
    states[0] = model.init_mean + chol_init @ rng.standard_normal(model.n_x)
    proc_noise = rng.standard_normal((horizon - 1, model.n_x)) @ chol_proc.T
    meas_noise = rng.standard_normal((horizon, model.n_z)) @ chol_meas.T

    for i in range(horizon - 1):
        states[i + 1] = model.dynamics(states[i], i + 1) + proc_noise[i]

    measurements = np.empty((horizon, model.n_z))
    for i in range(horizon):
        measurements[i] = model.measurement(states[i], i + 1) + meas_noise[i]
    for dim in model.angular_meas_dims:
        measurements[:, dim] = wrap_angle(measurements[:, dim])

    return Trajectory(states=states, measurements=measurements, seed=int(seed))


def write_trajectory_csv(path, model: StateSpaceModel, trajectory: Trajectory) -> None:
    """Write a trajectory as CSV with columns k, x1.., z1.. (k 1-based)."""
    header = (
        ["k"]
        + [f"x{i + 1}" for i in range(model.n_x)]
        + [f"z{i + 1}" for i in range(model.n_z)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(model.horizon):
            row = [i + 1]
            row += [repr(float(v)) for v in trajectory.states[i]]
            row += [repr(float(v)) for v in trajectory.measurements[i]]
            writer.writerow(row)
