"""Conditional quantum trajectories under homodyne measurement and feedback.

The measured quadrature feeds a classical loop: past record increments are
convolved with the kernel h and the result drives the matter through
G * I_c(t). Two steppers are available. ``rouchon`` applies the unitary part
exactly and the measurement as a first-order Kraus map, which keeps rho
positive at any step; ``euler`` is the plain Euler-Maruyama update of the
stochastic master equation.
"""
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence
import math

import numpy as np
from scipy import linalg

from .errors import NegativityError, NumericalError, StepSizeError
from .hilbert import HilbertSpace, MatterKind, build_space
from .kernels import FeedbackKernel
from .model import ModelParams

DEFAULT_DT = 2 * math.pi * 1e-3
# largest trace defect a single step may produce before normalization
TRACE_TOLERANCE = 1e-3


class Scheme(Enum):
    ROUCHON = "rouchon"
    EULER = "euler"


class RecordBuffer:
    """Ring buffer of record increments, read back oldest first.

    Values are written twice so the window is always one contiguous slice.
    ``width`` adds a leading channel axis (one row per path).
    """

    def __init__(self, capacity: int, dt: float, width: Optional[int] = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.dt = dt
        shape = (2 * capacity,) if width is None else (width, 2 * capacity)
        self._data = np.zeros(shape)
        self._times = np.zeros(2 * capacity)
        self._pos = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def push(self, value, t: float = 0.0) -> None:
        i = self._pos
        self._data[..., i] = value
        self._data[..., i + self.capacity] = value
        self._times[i] = self._times[i + self.capacity] = t
        self._pos = (i + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def window(self) -> np.ndarray:
        end = self._pos + self.capacity
        return self._data[..., end - self._count:end]

    def times(self) -> np.ndarray:
        end = self._pos + self.capacity
        return self._times[end - self._count:end]

    def convolve(self, taps: np.ndarray):
        """sum_m taps[m] * value[newest - m] over the stored history."""
        n = min(self._count, len(taps))
        if n == 0:
            return 0.0 if self._data.ndim == 1 else np.zeros(self._data.shape[0])
        end = self._pos + self.capacity
        return self._data[..., end - n:end] @ taps[:n][::-1]


@dataclass
class ConditionedState:
    """rho_c together with the homodyne history that drives the feedback."""
    rho: np.ndarray
    t: float
    record: RecordBuffer
    stream_id: int = 0


def expect(op: np.ndarray, rho: np.ndarray) -> float:
    """Re Tr(op rho)."""
    return float(np.real(np.sum(op.T * rho)))


def feedback_signal(state: ConditionedState, kernel: FeedbackKernel, kappa: float,
                    taps: Optional[np.ndarray] = None) -> float:
    """I_c = sqrt(2 kappa) * sum_m h(m dt) * dxi[newest - m].

    An empty record gives 0; a short record truncates the kernel.
    """
    record = state.record
    if len(record) == 0:
        return 0.0
    if taps is None:
        taps = kernel.for_step(record.dt).taps(record.dt, record.capacity)
    return math.sqrt(2 * kappa) * float(record.convolve(taps))


class SMEIntegrator:
    """Precomputed operators for one (space, params, kernel, dt) combination."""

    def __init__(self, space: HilbertSpace, params: ModelParams, kernel: FeedbackKernel,
                 dt: float = DEFAULT_DT, scheme: Scheme = Scheme.ROUCHON,
                 record_noise_scale: float = 0.5, memory_tol: float = 1e-3,
                 max_memory_time: Optional[float] = None):
        if dt <= 0:
            raise StepSizeError(f"dt must be > 0, got {dt}")
        self.space = space
        self.params = params
        self.dt = dt
        self.scheme = Scheme(scheme)
        self.record_noise_scale = record_noise_scale
        self.kernel = kernel.for_step(dt)

        window = self.kernel.memory_window(memory_tol)
        if max_memory_time is not None:
            window = min(window, max_memory_time)
        self.n_taps = max(1, int(math.ceil(window / dt)) + 1)
        self.taps = self.kernel.taps(dt, self.n_taps)

        self._H_s = space.system_hamiltonian(params)
        self._U_s = linalg.expm(-1j * self._H_s * dt)
        self._fb_matter = space.feedback_matter_operator
        self._fb_eigvals, self._fb_eigvecs = np.linalg.eigh(self._fb_matter)
        self._fb_full = space.lift_matter(self._fb_matter)
        self._cavity_eye = np.eye(space.cavity_dim)

        a = space.operators["a"]
        self._c = math.sqrt(2 * params.kappa) * np.exp(-1j * params.theta) * a
        self._cd = self._c.conj().T
        self._cdc = self._cd @ self._c
        self._cc = self._c @ self._c
        self._x_theta = space.x_theta(params.theta)
        self._eye = space.identity

        # E[M(dy)^dag M(dy)] - 1 under dy ~ N(0, dt); three Hermite nodes are exact
        # since the integrand is a quartic in dy
        nodes, weights = np.polynomial.hermite_e.hermegauss(3)
        weights = weights / weights.sum()
        completeness = -self._eye.astype(complex)
        for y, w in zip(nodes, weights):
            M = self._kraus(math.sqrt(dt) * y)
            completeness = completeness + w * (M.conj().T @ M)
        self._completeness_defect = 0.5 * (completeness + completeness.conj().T)

    def _kraus(self, dy: float) -> np.ndarray:
        return (self._eye - 0.5 * self._cdc * self.dt + self._c * dy
                + 0.5 * self._cc * (dy * dy - self.dt))

    def new_record(self) -> RecordBuffer:
        return RecordBuffer(self.n_taps, self.dt)

    def feedback_signal(self, state: ConditionedState) -> float:
        return feedback_signal(state, self.kernel, self.params.kappa, self.taps)

    def _feedback_unitary(self, drive: float) -> np.ndarray:
        phases = np.exp(-1j * drive * self.dt * self._fb_eigvals)
        u = (self._fb_eigvecs * phases) @ self._fb_eigvecs.conj().T
        return np.kron(u, self._cavity_eye)

    def step(self, state: ConditionedState, dW: float) -> "StepResult":
        """Advance by dt with Wiener increment dW; the record is updated in place."""
        p = self.params
        dt = self.dt
        i_c = self.feedback_signal(state)
        drive = p.G * i_c
        rho = state.rho

        if self.scheme is Scheme.ROUCHON:
            U = self._U_s if drive == 0 else self._U_s @ self._feedback_unitary(drive)
            rho = U @ rho @ U.conj().T
            x_mean = expect(self._x_theta, rho)
            dy = 2 * math.sqrt(2 * p.kappa) * x_mean * dt + dW
            M = self._kraus(dy)
            new = M @ rho @ M.conj().T
            trace = float(np.real(np.trace(new)))
            pre_residual = abs(expect(self._completeness_defect, rho))
            if not math.isfinite(trace) or trace <= 0:
                raise StepSizeError(f"Kraus update lost normalization at t={state.t:.6g}")
            if pre_residual > TRACE_TOLERANCE:
                raise StepSizeError(
                    f"Kraus map defect {pre_residual:.3e} in one step at t={state.t:.6g}; reduce dt")
        else:
            x_mean = expect(self._x_theta, rho)
            H = self._H_s if drive == 0 else self._H_s + drive * self._fb_full
            crho = self._c @ rho
            lindblad = (-1j * (H @ rho - rho @ H)
                        + crho @ self._cd - 0.5 * (self._cdc @ rho + rho @ self._cdc))
            innovation = crho + rho @ self._cd
            innovation = innovation - np.real(np.trace(innovation)) * rho
            new = rho + lindblad * dt + innovation * dW
            trace = float(np.real(np.trace(new)))
            pre_residual = abs(trace - 1.0)
            if not math.isfinite(trace) or pre_residual > TRACE_TOLERANCE:
                raise StepSizeError(
                    f"trace drifted by {pre_residual:.3e} in one step at t={state.t:.6g}; reduce dt")

        new = new / trace
        hermiticity = float(np.max(np.abs(new - new.conj().T)))
        new = 0.5 * (new + new.conj().T)
        increment = math.sqrt(2 * p.kappa) * x_mean * dt + self.record_noise_scale * dW
        state.record.push(increment, state.t)
        next_state = ConditionedState(new, state.t + dt, state.record, state.stream_id)
        return StepResult(next_state, i_c, hermiticity, pre_residual,
                          abs(float(np.real(np.trace(new))) - 1.0))


@dataclass
class StepResult:
    state: ConditionedState
    feedback: float
    hermiticity_error: float
    pre_normalization_residual: float
    trace_residual: float


_INTEGRATORS: Dict[tuple, SMEIntegrator] = {}


def sme_step(state: ConditionedState, params: ModelParams, kernel: FeedbackKernel, dt: float,
             dW: float, space: HilbertSpace, scheme: Scheme = Scheme.ROUCHON,
             record_noise_scale: float = 0.5) -> ConditionedState:
    """One step of the conditional master equation (convenience wrapper)."""
    key = (id(space), params, kernel, dt, Scheme(scheme), record_noise_scale, state.record.capacity)
    integrator = _INTEGRATORS.get(key)
    if integrator is None:
        integrator = SMEIntegrator(space, params, kernel, dt, scheme, record_noise_scale,
                                   max_memory_time=(state.record.capacity - 1) * dt)
        _INTEGRATORS.clear()
        _INTEGRATORS[key] = integrator
    return integrator.step(state, dW).state


@dataclass(frozen=True)
class TrajectoryConfig:
    params: ModelParams
    kernel: FeedbackKernel
    matter_kind: MatterKind = MatterKind.SPIN
    cavity_dim: int = 20
    matter_cutoff: Optional[int] = None
    dt: float = DEFAULT_DT
    total_time: float = 50.0
    seed: int = 0
    scheme: Scheme = Scheme.ROUCHON
    record_every: int = 10
    memory_tol: float = 1e-3
    max_memory_time: Optional[float] = None
    record_noise_scale: float = 0.5
    spot_check_every: int = 100
    initial_alpha: complex = 0j
    initial_matter: str = "ground"
    truncation_tolerance: float = 1e-6

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.dt))


@dataclass
class TrajectoryOutput:
    times: np.ndarray
    matter_x: np.ndarray
    matter_x2: np.ndarray
    photons: np.ndarray
    purity: np.ndarray
    feedback: np.ndarray
    seed: int
    stream_id: int = 0
    valid: bool = True
    aborted: bool = False
    error: Optional[str] = None
    max_top_population: float = 0.0
    max_trace_residual: float = 0.0
    max_pre_normalization_residual: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "t": self.times,
            "matter_x": self.matter_x,
            "matter_x2": self.matter_x2,
            "photons": self.photons,
            "purity": self.purity,
            "feedback": self.feedback,
        }

    def summary(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "stream_id": self.stream_id,
            "valid": self.valid,
            "aborted": self.aborted,
            "error": self.error,
            "max_top_population": self.max_top_population,
            "max_trace_residual": self.max_trace_residual,
            "max_pre_normalization_residual": self.max_pre_normalization_residual,
            "max_hermiticity_error": self.max_hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
        }


def coherent_state(dim: int, alpha: complex) -> np.ndarray:
    n = np.arange(dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    amps = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact) * np.power(complex(alpha), n)
    return amps / np.linalg.norm(amps)


def initial_state(space: HilbertSpace, alpha: complex = 0j, matter: str = "ground") -> np.ndarray:
    """Pure product state: matter ground (or S_x eigenstate) times a coherent cavity state."""
    if matter == "ground":
        psi_m = np.zeros(space.matter_dim, dtype=complex)
        psi_m[0] = 1.0
    elif matter in ("x_plus", "x_minus") and space.matter_kind is MatterKind.SPIN:
        vals, vecs = np.linalg.eigh(space.matter_operators["sx"])
        psi_m = vecs[:, -1] if matter == "x_plus" else vecs[:, 0]
    else:
        raise ValueError(f"unknown initial matter state {matter!r} for {space.matter_kind.value}")
    psi = np.kron(psi_m, coherent_state(space.cavity_dim, alpha))
    return np.outer(psi, psi.conj())


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


def run_trajectory(config: TrajectoryConfig, stream_id: int = 0) -> TrajectoryOutput:
    """Integrate one conditional trajectory; bit-reproducible for fixed config and stream.

    Step failures stop the integration and return the partial record flagged
    ``aborted``.
    """
    space = build_space(config.matter_kind, config.cavity_dim, config.matter_cutoff,
                        config.params.n_spins)
    n_steps = config.n_steps
    max_memory = config.total_time if config.max_memory_time is None else min(
        config.max_memory_time, config.total_time)
    integrator = SMEIntegrator(space, config.params, config.kernel, config.dt, config.scheme,
                               config.record_noise_scale, config.memory_tol, max_memory)
    dWs = _stream(config.seed, stream_id).standard_normal(n_steps) * math.sqrt(config.dt)

    state = ConditionedState(initial_state(space, config.initial_alpha, config.initial_matter),
                             0.0, integrator.new_record(), stream_id)
    quad = space.matter_quadrature
    quad2 = quad @ quad
    n_cav = space.operators["n_cav"]

    rows: List[tuple] = []

    def observe(st: ConditionedState, i_c: float) -> None:
        rho = st.rho
        rows.append((st.t, expect(quad, rho), expect(quad2, rho), expect(n_cav, rho),
                     float(np.sum(np.abs(rho) ** 2)), i_c))

    observe(state, 0.0)
    max_top = max(space.top_populations(state.rho))
    max_trace = max_pre = max_herm = 0.0
    min_eig = float(np.linalg.eigvalsh(state.rho)[0])
    aborted, error = False, None
    for n in range(n_steps):
        try:
            result = integrator.step(state, dWs[n])
        except NumericalError as e:
            aborted, error = True, str(e)
            break
        state = result.state
        max_trace = max(max_trace, result.trace_residual)
        max_pre = max(max_pre, result.pre_normalization_residual)
        max_herm = max(max_herm, result.hermiticity_error)
        max_top = max(max_top, *space.top_populations(state.rho))
        if (n + 1) % config.spot_check_every == 0:
            smallest = float(np.linalg.eigvalsh(state.rho)[0])
            min_eig = min(min_eig, smallest)
            if smallest < -1e-7:
                aborted, error = True, str(NegativityError(
                    f"eigenvalue {smallest:.3e} at t={state.t:.6g}; reduce dt or raise cutoffs"))
                break
        if (n + 1) % config.record_every == 0:
            observe(state, result.feedback)

    data = np.array(rows)
    return TrajectoryOutput(
        times=data[:, 0], matter_x=data[:, 1], matter_x2=data[:, 2], photons=data[:, 3],
        purity=data[:, 4], feedback=data[:, 5], seed=config.seed, stream_id=stream_id,
        valid=(not aborted) and max_top < config.truncation_tolerance,
        aborted=aborted, error=error, max_top_population=max_top,
        max_trace_residual=max_trace, max_pre_normalization_residual=max_pre,
        max_hermiticity_error=max_herm, min_eigenvalue=min_eig)


def tail_slice(times: np.ndarray, tail_fraction: float) -> slice:
    start = times[0] + (1.0 - tail_fraction) * (times[-1] - times[0])
    return slice(int(np.searchsorted(times, start)), len(times))


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_x: np.ndarray
    std_x: np.ndarray
    mean_abs_x: np.ndarray
    std_abs_x: np.ndarray
    mean_x2: np.ndarray
    std_x2: np.ndarray
    steady_x: float
    steady_x_err: float
    steady_abs_x: float
    steady_abs_x_err: float
    steady_x2: float
    steady_x2_err: float
    n_traj: int
    n_invalid: int
    n_aborted: int
    seed: int
    tail_signed_means: np.ndarray = field(repr=False, default=None)

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "t": self.times,
            "mean_x": self.mean_x,
            "std_x": self.std_x,
            "mean_abs_x": self.mean_abs_x,
            "std_abs_x": self.std_abs_x,
            "mean_x2": self.mean_x2,
            "std_x2": self.std_x2,
        }

    def steady(self) -> Dict[str, float]:
        return {
            "steady_x": self.steady_x, "steady_x_err": self.steady_x_err,
            "steady_abs_x": self.steady_abs_x, "steady_abs_x_err": self.steady_abs_x_err,
            "steady_x2": self.steady_x2, "steady_x2_err": self.steady_x2_err,
            "n_traj": self.n_traj, "n_invalid": self.n_invalid, "n_aborted": self.n_aborted,
        }


def _run_stream(args) -> TrajectoryOutput:
    config, stream_id = args
    return run_trajectory(config, stream_id)


def _mean_err(samples: np.ndarray):
    if len(samples) < 2:
        return float(np.mean(samples)), 0.0
    return float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(len(samples)))


def reduce_ensemble(outputs: Sequence[TrajectoryOutput], tail_fraction: float = 0.5) -> EnsembleStats:
    """Deterministic reduction in stream order; aborted trajectories are excluded."""
    usable = [o for o in outputs if not o.aborted]
    if not usable:
        raise NumericalError("every trajectory in the ensemble aborted")
    times = usable[0].times
    x = np.vstack([o.matter_x for o in usable])
    x2 = np.vstack([o.matter_x2 for o in usable])
    tail = tail_slice(times, tail_fraction)
    signed = x[:, tail].mean(axis=1)
    absolute = np.abs(x[:, tail]).mean(axis=1)
    second = x2[:, tail].mean(axis=1)
    steady_x, steady_x_err = _mean_err(signed)
    steady_abs, steady_abs_err = _mean_err(absolute)
    steady_x2, steady_x2_err = _mean_err(second)
    return EnsembleStats(
        times=times, mean_x=x.mean(axis=0), std_x=x.std(axis=0),
        mean_abs_x=np.abs(x).mean(axis=0), std_abs_x=np.abs(x).std(axis=0),
        mean_x2=x2.mean(axis=0), std_x2=x2.std(axis=0),
        steady_x=steady_x, steady_x_err=steady_x_err,
        steady_abs_x=steady_abs, steady_abs_x_err=steady_abs_err,
        steady_x2=steady_x2, steady_x2_err=steady_x2_err,
        n_traj=len(outputs), n_invalid=sum(not o.valid for o in outputs),
        n_aborted=len(outputs) - len(usable), seed=usable[0].seed,
        tail_signed_means=signed)


def run_ensemble(config: TrajectoryConfig, n_traj: int, executor: Optional[Executor] = None,
                 tail_fraction: float = 0.5) -> EnsembleStats:
    """Independent trajectories on streams 0..n_traj-1 of the config seed."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    jobs = [(config, i) for i in range(n_traj)]
    mapper = executor.map if executor is not None else map
    outputs = list(mapper(_run_stream, jobs))
    return reduce_ensemble(outputs, tail_fraction)


def liouvillian(space: HilbertSpace, params: ModelParams) -> np.ndarray:
    """Row-major superoperator of the unconditional master equation without feedback."""
    H = space.system_hamiltonian(params)
    c = math.sqrt(2 * params.kappa) * space.operators["a"]
    cdc = c.conj().T @ c
    eye = space.identity
    return (-1j * (np.kron(H, eye) - np.kron(eye, H.T))
            + np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))


def lindblad_evolve(space: HilbertSpace, params: ModelParams, rho0: np.ndarray,
                    times: Sequence[float]) -> np.ndarray:
    """Dense Lindblad solution at each requested time (times ascending, from 0)."""
    L = liouvillian(space, params)
    d = space.dim
    vec = rho0.reshape(-1).astype(complex)
    out = np.empty((len(times), d, d), dtype=complex)
    propagators: Dict[float, np.ndarray] = {}
    t_prev = 0.0
    for k, t in enumerate(times):
        step = round(float(t) - t_prev, 12)
        if step < 0:
            raise ValueError("times must be ascending")
        if step > 0:
            if step not in propagators:
                propagators[step] = linalg.expm(L * step)
            vec = propagators[step] @ vec
        out[k] = vec.reshape(d, d)
        t_prev = float(t)
    return out


def estimate_growth_rate(times: np.ndarray, values: np.ndarray,
                         window: Optional[tuple] = None) -> float:
    """Exponential rate from a straight-line fit of log|values| over ``window``."""
    times = np.asarray(times, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if window is None:
        window = (times[0] + 0.5 * (times[-1] - times[0]), times[-1])
    mask = (times >= window[0]) & (times <= window[1]) & (values > 0) & np.isfinite(values)
    if mask.sum() < 2:
        raise ValueError("not enough positive samples in the fit window")
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    return float(slope)
