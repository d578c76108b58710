"""Time-domain oracles for the linearized quadrature equations.

State vector (x, y, X, Y): cavity quadratures x, y and spin quadratures X, Y.
The vacuum noises f_x, f_y are independent white noises of intensity
kappa/2 each, and the feedback signal is
I = 2 kappa int h(t - z) [x_theta(z) - f_theta(z) / (2 kappa)] dz.
"""
from dataclasses import dataclass
from typing import Optional, Sequence
import math

import numpy as np
from scipy import linalg

from .errors import ParameterError, UnstableRegimeError
from .kernels import ExponentialKernel, FeedbackKernel, InstantaneousKernel
from .model import ModelParams, NoiseModel
from .trajectories import RecordBuffer, tail_slice


def drift_matrix(params: ModelParams) -> np.ndarray:
    """Drift of (x, y, X, Y) without feedback."""
    p = params
    return np.array([
        [-p.kappa, p.delta, 0.0, 0.0],
        [-p.delta, -p.kappa, -2 * p.g, 0.0],
        [0.0, 0.0, 0.0, p.omega_r],
        [-2 * p.g, 0.0, -p.omega_r, 0.0],
    ])


def _markovian_system(params: ModelParams, kernel: Optional[FeedbackKernel]):
    p = params
    A = drift_matrix(p)
    sigma = math.sqrt(NoiseModel.from_params(p).quadrature_intensity)
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = sigma
    quad = np.array([math.cos(p.theta), math.sin(p.theta)])
    if kernel is None or p.G == 0:
        return A, B
    if isinstance(kernel, InstantaneousKernel):
        w = kernel.weight
        A[3, :2] -= 2 * p.kappa * p.G * w * quad
        B[3] = p.G * w * sigma * quad
        return A, B
    if isinstance(kernel, ExponentialKernel):
        # feedback signal carried as a fifth state u = I
        r, amp = kernel.rate, kernel.amplitude
        A5 = np.zeros((5, 5))
        A5[:4, :4] = A
        A5[3, 4] = -p.G
        A5[4, :2] = 2 * p.kappa * amp * quad
        A5[4, 4] = -r
        B5 = np.zeros((5, 2))
        B5[:4] = B
        B5[4] = -amp * sigma * quad
        return A5, B5
    raise ParameterError(
        f"stationary covariance needs a Markovian kernel, got {type(kernel).__name__}")


def stationary_covariance(params: ModelParams, kernel: Optional[FeedbackKernel] = None) -> np.ndarray:
    """Exact stationary covariance from the Lyapunov equation A S + S A^T + B B^T = 0."""
    A, B = _markovian_system(params, kernel)
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise UnstableRegimeError("linearized dynamics has a non-decaying mode")
    return linalg.solve_continuous_lyapunov(A, -B @ B.T)


def stationary_X2(params: ModelParams, kernel: Optional[FeedbackKernel] = None) -> float:
    return float(stationary_covariance(params, kernel)[2, 2])


@dataclass
class LinearSDEResult:
    times: np.ndarray
    mean_X2: np.ndarray
    first_path_X: np.ndarray
    variance: float
    variance_err: float
    n_paths: int


def simulate_linear_sde(params: ModelParams, kernel: Optional[FeedbackKernel], dt: float,
                        total_time: float, n_paths: int = 1000, seed: int = 0,
                        tail_fraction: float = 0.5, noise: bool = True,
                        initial: Optional[Sequence[float]] = None, record_every: int = 10,
                        memory_tol: float = 1e-3) -> LinearSDEResult:
    """Euler-Maruyama ensemble of the linearized equations with the discrete kernel convolution.

    Y is updated before X (semi-implicit), which keeps the undamped spin
    oscillation from growing numerically. With ``noise=False`` the run is a
    deterministic evolution from ``initial``.
    """
    p = params
    n_steps = int(round(total_time / dt))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    sigma = math.sqrt(NoiseModel.from_params(p).quadrature_intensity * dt)
    c, s = math.cos(p.theta), math.sin(p.theta)

    state = np.zeros((4, n_paths))
    if initial is not None:
        state[:] = np.asarray(initial, dtype=float)[:, None]
    x, y, X, Y = state

    feedback_on = kernel is not None and p.G != 0
    if feedback_on:
        kernel = kernel.for_step(dt)
        n_taps = max(1, min(n_steps + 1, int(math.ceil(kernel.memory_window(memory_tol) / dt)) + 1))
        taps = kernel.taps(dt, n_taps)
        history = RecordBuffer(n_taps, dt, width=n_paths)

    times, mean_X2, first = [0.0], [float(np.mean(X ** 2))], [float(X[0])]
    for n in range(n_steps):
        if noise:
            dWx = rng.standard_normal(n_paths) * sigma
            dWy = rng.standard_normal(n_paths) * sigma
        else:
            dWx = dWy = np.zeros(n_paths)
        if feedback_on:
            history.push((2 * p.kappa * (c * x + s * y)) * dt - (c * dWx + s * dWy), n * dt)
            signal = history.convolve(taps)
        else:
            signal = 0.0
        x_new = x + (-p.kappa * x + p.delta * y) * dt + dWx
        y_new = y + (-p.delta * x - p.kappa * y - 2 * p.g * X) * dt + dWy
        Y = Y + (-p.omega_r * X - 2 * p.g * x) * dt - p.G * signal * dt
        X = X + p.omega_r * Y * dt
        x, y = x_new, y_new
        if (n + 1) % record_every == 0:
            times.append((n + 1) * dt)
            mean_X2.append(float(np.mean(X ** 2)))
            first.append(float(X[0]))

    times_arr = np.array(times)
    return LinearSDEResult(times_arr, np.array(mean_X2), np.array(first),
                           *_tail_variance(times_arr, np.array(mean_X2), tail_fraction),
                           n_paths)


def _tail_variance(times: np.ndarray, mean_X2: np.ndarray, tail_fraction: float):
    tail = mean_X2[tail_slice(times, tail_fraction)]
    value = float(np.mean(tail))
    # paths are independent; time samples within a path are not, so the
    # error uses the spread between blocks of the tail window
    blocks = np.array_split(tail, 10)
    block_means = np.array([b.mean() for b in blocks if len(b)])
    err = float(np.std(block_means, ddof=1) / math.sqrt(len(block_means))) if len(block_means) > 1 else 0.0
    return value, err
