"""Semiclassical (factorized, noise-free) dynamics of the nonlinear model.

The spin vector precesses about Omega = (k, 0, omega_r) with
k = (2/sqrt(N)) * (2 g Re a + G I), and the cavity relaxes as
da/dt = -(kappa + i delta) a - i (2 g / sqrt(N)) s_x. Each step rotates the
spin exactly and solves the cavity equation exactly for a frozen drive, with
the drive taken at the midpoint of a predictor pass. The spin length is
therefore conserved to rounding.
"""
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import List, Optional, Sequence
import math

import numpy as np

from .errors import DickeFeedbackError, NoBracketError
from .kernels import FeedbackKernel, InstantaneousKernel
from .model import ModelParams
from .spectral import critical_gain
from .trajectories import RecordBuffer, tail_slice


@dataclass
class MeanFieldState:
    a_re: float
    a_im: float
    sx: float
    sy: float
    sz: float
    t: float
    i_history: RecordBuffer

    @property
    def a(self) -> complex:
        return complex(self.a_re, self.a_im)

    @property
    def spin_length_sq(self) -> float:
        return self.sx ** 2 + self.sy ** 2 + self.sz ** 2


def _x_theta(a: complex, theta: float) -> float:
    return (a * complex(math.cos(theta), -math.sin(theta))).real


def _convolution_taps(kernel: FeedbackKernel, dt: float, n: int) -> np.ndarray:
    """Trapezoid weights h(m dt) * dt with the newest sample halved."""
    taps = kernel.for_step(dt).taps(dt, n) * dt
    taps[0] *= 0.5
    return taps


def feedback_from_history(history: RecordBuffer, params: ModelParams, kernel: FeedbackKernel,
                          taps: Optional[np.ndarray] = None) -> float:
    """I = 2 kappa int h(t - z) x_theta(z) dz, newest history entry at time t."""
    if len(history) == 0:
        return 0.0
    if isinstance(kernel, InstantaneousKernel):
        return 2 * params.kappa * kernel.weight * float(history.window()[-1])
    if taps is None:
        taps = _convolution_taps(kernel, history.dt, history.capacity)
    return 2 * params.kappa * float(history.convolve(taps))


def meanfield_rhs(state: MeanFieldState, params: ModelParams, kernel: FeedbackKernel,
                  taps: Optional[np.ndarray] = None) -> np.ndarray:
    """Time derivatives of (Re a, Im a, s_x, s_y, s_z).

    The history must end with x_theta at ``state.t``.
    """
    p = params
    root_n = math.sqrt(p.n_spins)
    I = feedback_from_history(state.i_history, p, kernel, taps)
    a = state.a
    da = -(p.kappa + 1j * p.delta) * a - 1j * (2 * p.g / root_n) * state.sx
    k = (2 / root_n) * (2 * p.g * a.real + p.G * I)
    return np.array([
        da.real,
        da.imag,
        -p.omega_r * state.sy,
        p.omega_r * state.sx - k * state.sz,
        k * state.sy,
    ])


def _rotate(spin: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    norm = float(np.linalg.norm(omega))
    if norm == 0.0:
        return spin
    n = omega / norm
    phi = norm * dt
    return (spin * math.cos(phi) + np.cross(n, spin) * math.sin(phi)
            + n * float(n @ spin) * (1 - math.cos(phi)))


def _relax(a: complex, drive: complex, lam: complex, dt: float) -> complex:
    if lam == 0:
        return a + drive * dt
    decay = np.exp(-lam * dt)
    return complex(a * decay + drive * (1 - decay) / lam)


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    a: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    feedback: np.ndarray
    max_spin_length_error: float

    def columns(self) -> dict:
        return {"t": self.times, "a_re": self.a.real, "a_im": self.a.imag,
                "sx": self.sx, "sy": self.sy, "sz": self.sz, "feedback": self.feedback}


class MeanFieldIntegrator:
    """Fixed-step integrator with a uniform history for the kernel convolution."""

    def __init__(self, params: ModelParams, kernel: FeedbackKernel, dt: float = 0.02,
                 total_time: float = 600.0, memory_tol: float = 1e-4, record_every: int = 10):
        self.params = params
        self.kernel = kernel.for_step(dt)
        self.dt = dt
        self.n_steps = int(round(total_time / dt))
        self.record_every = record_every
        window = self.kernel.memory_window(memory_tol)
        self.n_taps = max(1, min(self.n_steps + 1, int(math.ceil(window / dt)) + 1))
        self.taps = _convolution_taps(self.kernel, dt, self.n_taps)

    def initial_state(self, sx: float = 0.0, a: complex = 0j) -> MeanFieldState:
        half = self.params.n_spins / 2.0
        sz = -math.sqrt(max(half ** 2 - sx ** 2, 0.0))
        history = RecordBuffer(self.n_taps, self.dt)
        history.push(_x_theta(a, self.params.theta), 0.0)
        return MeanFieldState(a.real, a.imag, sx, 0.0, sz, 0.0, history)

    def _signal(self, prior: float, x_new: float) -> float:
        p = self.params
        if isinstance(self.kernel, InstantaneousKernel):
            return 2 * p.kappa * self.kernel.weight * x_new
        return 2 * p.kappa * (self.taps[0] * x_new + prior)

    def run(self, state: MeanFieldState) -> MeanFieldTrajectory:
        p = self.params
        dt = self.dt
        root_n = math.sqrt(p.n_spins)
        lam = complex(p.kappa, p.delta)
        length_sq = state.spin_length_sq
        shifted = self.taps[1:] if len(self.taps) > 1 else np.zeros(1)

        a = state.a
        spin = np.array([state.sx, state.sy, state.sz])
        history = state.i_history
        I = feedback_from_history(history, p, self.kernel, self.taps)
        rows = [(state.t, a, *spin, I)]
        max_err = 0.0
        t = state.t
        for n in range(self.n_steps):
            # history part of the next signal: sum_{m>=1} h(m dt) x_{n+1-m}
            prior = float(history.convolve(shifted)) if len(shifted) and len(history) else 0.0

            drive = -1j * (2 * p.g / root_n) * spin[0]
            k = (2 / root_n) * (2 * p.g * a.real + p.G * I)
            a_pred = _relax(a, drive, lam, dt)
            spin_pred = _rotate(spin, np.array([k, 0.0, p.omega_r]), dt)
            I_pred = self._signal(prior, _x_theta(a_pred, p.theta))

            drive_mid = -1j * (2 * p.g / root_n) * 0.5 * (spin[0] + spin_pred[0])
            k_pred = (2 / root_n) * (2 * p.g * a_pred.real + p.G * I_pred)
            a = _relax(a, drive_mid, lam, dt)
            spin = _rotate(spin, np.array([0.5 * (k + k_pred), 0.0, p.omega_r]), dt)

            t = state.t + (n + 1) * dt
            x_new = _x_theta(a, p.theta)
            I = self._signal(prior, x_new)
            history.push(x_new, t)
            if (n + 1) % self.record_every == 0:
                rows.append((t, a, *spin, I))
                max_err = max(max_err, abs(float(spin @ spin) - length_sq))

        data = np.array(rows, dtype=complex)
        return MeanFieldTrajectory(
            times=data[:, 0].real, a=data[:, 1], sx=data[:, 2].real, sy=data[:, 3].real,
            sz=data[:, 4].real, feedback=data[:, 5].real,
            max_spin_length_error=max_err / max(length_sq, 1e-300))


@dataclass(frozen=True)
class ThresholdScanOptions:
    """Bisection controls; gains default to [0.5, 2] x the closed-form threshold."""
    lower: Optional[float] = None
    upper: Optional[float] = None
    rel_tol: float = 5e-3
    dt: float = 0.02
    total_time: float = 600.0
    seed_perturbation: float = 1e-6
    departure: float = 1e-3
    max_iter: int = 40
    tail_fraction: float = 0.25


@dataclass
class ThresholdResult:
    G: float
    lower: float
    upper: float
    evaluations: int
    closed_form: Optional[float] = None

    @property
    def relative_deviation(self) -> Optional[float]:
        if not self.closed_form:
            return None
        return abs(self.G - self.closed_form) / abs(self.closed_form)


@dataclass
class BifurcationPoint:
    G: float
    steady_abs_sx: float
    steady_photons: float
    settled: bool
    ordered: bool


def simulate(params: ModelParams, kernel: FeedbackKernel, opts: ThresholdScanOptions,
             sign: float = 1.0) -> MeanFieldTrajectory:
    integrator = MeanFieldIntegrator(params, kernel, opts.dt, opts.total_time)
    seed = sign * opts.seed_perturbation * params.n_spins / 2.0
    return integrator.run(integrator.initial_state(sx=seed))


def _lowpass(times: np.ndarray, values: np.ndarray, omega_r: float) -> np.ndarray:
    """Moving average over one spin period."""
    step = times[1] - times[0]
    width = max(1, int(round(2 * math.pi / omega_r / step)))
    if width >= len(values):
        return values
    return np.convolve(values, np.ones(width) / width, mode="valid")


def classify(traj: MeanFieldTrajectory, params: ModelParams, opts: ThresholdScanOptions) -> BifurcationPoint:
    """Steady values plus the ordered/normal decision for one run."""
    half = params.n_spins / 2.0
    tail = tail_slice(traj.times, opts.tail_fraction)
    abs_sx = np.abs(traj.sx[tail])
    steady = float(abs_sx.mean())
    photons = float(np.mean(np.abs(traj.a[tail]) ** 2))
    departed = steady > opts.departure * half

    slow = np.abs(_lowpass(traj.times, traj.sx, params.omega_r))
    n = len(slow)
    late = float(slow[int(0.85 * n):].mean())
    mid = float(slow[int(0.45 * n):int(0.6 * n)].mean())
    growing = late > mid

    spread = float(abs_sx.std())
    settled = (not departed) or spread < 0.05 * steady
    return BifurcationPoint(params.G, steady, photons, settled, departed or growing)


def _evaluate(args) -> BifurcationPoint:
    params, kernel, opts = args
    return classify(simulate(params, kernel, opts), params, opts)


def bifurcation_scan(params: ModelParams, kernel: FeedbackKernel, gains: Sequence[float],
                     opts: Optional[ThresholdScanOptions] = None,
                     executor: Optional[Executor] = None) -> List[BifurcationPoint]:
    """Steady |s_x| and |a|^2 for each gain; rows keep the order of ``gains``."""
    opts = opts or ThresholdScanOptions()
    jobs = [(params.with_gain(G), kernel, opts) for G in gains]
    mapper = executor.map if executor is not None else map
    return list(mapper(_evaluate, jobs))


def meanfield_threshold(params: ModelParams, kernel: FeedbackKernel,
                        scan_opts: Optional[ThresholdScanOptions] = None) -> ThresholdResult:
    """Bisection on G for the onset of a finite steady s_x."""
    opts = scan_opts or ThresholdScanOptions()
    try:
        closed = critical_gain(params, kernel)
    except DickeFeedbackError:
        closed = None
    lower = opts.lower if opts.lower is not None else (0.5 * closed if closed else None)
    upper = opts.upper if opts.upper is not None else (2.0 * closed if closed else None)
    if lower is None or upper is None:
        raise NoBracketError("no scan range given and no closed-form estimate to derive one")
    lower, upper = min(lower, upper), max(lower, upper)

    evaluations = 0

    def ordered(G: float) -> bool:
        nonlocal evaluations
        evaluations += 1
        return _evaluate((params.with_gain(G), kernel, opts)).ordered

    if ordered(lower) or not ordered(upper):
        raise NoBracketError(f"[{lower:.6g}, {upper:.6g}] does not bracket the onset of order")
    for _ in range(opts.max_iter):
        if (upper - lower) <= opts.rel_tol * abs(0.5 * (upper + lower)):
            break
        mid = 0.5 * (upper + lower)
        if ordered(mid):
            upper = mid
        else:
            lower = mid
    return ThresholdResult(0.5 * (upper + lower), lower, upper, evaluations, closed)


def jacobian_at_normal_phase(params: ModelParams, eps: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian of the feedback-free drift in (x, y, X, Y).

    x = Re a, y = Im a, X = s_x / sqrt(N), Y = -s_y / sqrt(N), linearized
    about s_z = -N/2.
    """
    p = params.with_gain(0.0)
    root_n = math.sqrt(p.n_spins)
    half = p.n_spins / 2.0
    kernel = InstantaneousKernel(0.0)

    def drift(z: np.ndarray) -> np.ndarray:
        x, y, X, Y = z
        sx, sy = root_n * X, -root_n * Y
        sz = -math.sqrt(half ** 2 - sx ** 2 - sy ** 2)
        history = RecordBuffer(1, 1.0)
        state = MeanFieldState(x, y, sx, sy, sz, 0.0, history)
        d = meanfield_rhs(state, p, kernel)
        return np.array([d[0], d[1], d[2] / root_n, -d[3] / root_n])

    jac = np.empty((4, 4))
    for j in range(4):
        step = np.zeros(4)
        step[j] = eps
        jac[:, j] = (drift(step) - drift(-step)) / (2 * eps)
    return jac
