"""Fourier-domain solution of the linearized spin-cavity model.

The spin quadrature obeys D(omega) X(omega) = noise, with the noise filtered
through the cavity and the feedback loop. Everything below is a closed-form
expression of the model parameters and the kernel transform H(omega), except
the stationary variance which needs an adaptive integral over all
frequencies.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union
import math

import numpy as np
from scipy import integrate, optimize

from .errors import (NoThresholdError, QuadratureError, SpectralPoleError,
                     UnstableRegimeError)
from .kernels import (FeedbackKernel, InstantaneousKernel, TransformMethod,
                      kernel_transform)
from .model import ModelParams

ArrayLike = Union[float, np.ndarray]


class SpectrumLabel(Enum):
    D = "D"
    MX = "Mx"
    MY = "My"
    S = "S"
    S_ADIABATIC = "S_adiabatic"
    VARIANCE_INTEGRAND = "VarianceIntegrand"

    @property
    def is_complex(self) -> bool:
        return self in (SpectrumLabel.D, SpectrumLabel.MX, SpectrumLabel.MY)


@dataclass
class SpectrumSeries:
    """Samples of one spectral function on a strictly increasing grid."""
    omega_grid: np.ndarray
    values: np.ndarray
    label: SpectrumLabel

    def __post_init__(self):
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.omega_grid.ndim != 1 or self.values.shape != self.omega_grid.shape:
            raise ValueError("omega_grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.omega_grid) <= 0):
            raise ValueError("omega_grid must be strictly increasing")
        if not self.label.is_complex:
            if np.iscomplexobj(self.values):
                self.values = self.values.real
            if np.any(self.values < 0):
                raise ValueError(f"{self.label.value} samples must be >= 0")

    def columns(self) -> dict:
        if self.label.is_complex:
            return {"omega": self.omega_grid, "re": self.values.real, "im": self.values.imag}
        return {"omega": self.omega_grid, "value": self.values}


@dataclass(frozen=True)
class QuadOptions:
    """Controls for the stationary-variance integral.

    ``rel_tol`` is handed to each adaptive piece; ``error_tolerance`` bounds
    the summed error estimate relative to the result; ``tail_tolerance``
    bounds the analytic tail beyond ``max_omega`` relative to the result.
    """
    rel_tol: float = 1e-8
    max_omega: float = 20.0
    scan_points: int = 4096
    error_tolerance: float = 1e-4
    tail_tolerance: float = 1e-3
    limit: int = 400
    method: TransformMethod = TransformMethod.EXPINT


@dataclass
class VarianceEstimate:
    value: float
    abserr: float
    tail: float
    pieces: int
    warnings: List[str] = field(default_factory=list)


def _transfer(kernel: FeedbackKernel, omega: ArrayLike, method: TransformMethod):
    return kernel_transform(kernel, omega, method)


def _cavity_denominator(params: ModelParams, omega: ArrayLike) -> ArrayLike:
    den = params.delta ** 2 + (params.kappa + 1j * np.asarray(omega)) ** 2
    if np.any(den == 0):
        raise SpectralPoleError(
            f"delta^2 + (kappa + i omega)^2 = 0 at omega = +/-{params.delta} (kappa = 0)")
    return den


def memory_bracket(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
                   method: TransformMethod = TransformMethod.EXPINT) -> ArrayLike:
    """The cavity/feedback memory term, D(omega) = omega_r^2 - omega^2 - memory_bracket."""
    H = _transfer(kernel, omega, method)
    p = params
    iw = 1j * np.asarray(omega)
    den = _cavity_denominator(p, omega)
    num = 2 * p.g * p.delta + 2 * p.kappa * p.G * H * (
        p.delta * math.cos(p.theta) + (p.kappa + iw) * math.sin(p.theta))
    return 2 * p.g * p.omega_r * num / den


def response_D(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
               method: TransformMethod = TransformMethod.EXPINT) -> ArrayLike:
    """Deterministic response D(omega); its zero at omega = 0 marks the threshold."""
    omega = np.asarray(omega, dtype=float)
    value = params.omega_r ** 2 - omega ** 2 - memory_bracket(params, kernel, omega, method)
    return complex(value) if np.ndim(value) == 0 else value


def noise_transfer(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
                   method: TransformMethod = TransformMethod.EXPINT) -> Tuple[ArrayLike, ArrayLike]:
    """Transfer functions (Mx, My) of the vacuum-noise quadratures f_x, f_y."""
    p = params
    H = _transfer(kernel, omega, method)
    kw = p.kappa + 1j * np.asarray(omega, dtype=float)
    den = _cavity_denominator(p, omega)
    c, s = math.cos(p.theta), math.sin(p.theta)
    GH = p.G * H
    mx = p.omega_r * GH * c + p.omega_r / den * (
        -2 * p.g * kw + 2 * p.kappa * GH * (p.delta * s - kw * c))
    my = p.omega_r * GH * s - p.omega_r / den * (
        2 * p.g * p.delta + 2 * p.kappa * GH * (p.delta * c + kw * s))
    if np.ndim(mx) == 0:
        return complex(mx), complex(my)
    return mx, my


def _noise_amplitude(params: ModelParams, H: ArrayLike, omega: ArrayLike, iw: ArrayLike) -> ArrayLike:
    """The bracket of S(omega); ``iw`` is the i*omega entering the cavity response."""
    p = params
    omega = np.asarray(omega, dtype=float)
    den = p.delta ** 2 + (p.kappa + iw) ** 2
    if np.any(den == 0):
        raise SpectralPoleError("cavity denominator vanished")
    cav = (p.kappa + iw - 1j * p.delta) / den
    return 2 * p.g * cav + p.G * H * np.exp(-1j * p.theta) * (2 * p.kappa * cav - 1)


def spectral_density(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
                     method: TransformMethod = TransformMethod.EXPINT,
                     cavity_memory: bool = True) -> ArrayLike:
    """Noise spectral density S(omega) >= 0 acting on the spin quadrature.

    With ``cavity_memory=False`` the i*omega of the cavity response is set to
    zero while H(omega) is kept, which is the adiabatic elimination.
    """
    H = _transfer(kernel, omega, method)
    omega = np.asarray(omega, dtype=float)
    iw = 1j * omega if cavity_memory else np.zeros_like(omega)
    amp = _noise_amplitude(params, H, omega, iw)
    value = math.pi * params.kappa * params.omega_r ** 2 * np.abs(amp) ** 2
    return float(value) if np.ndim(value) == 0 else value


def spectral_density_adiabatic(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
                               method: TransformMethod = TransformMethod.EXPINT) -> ArrayLike:
    """S(omega) with the cavity adiabatically eliminated (kappa >> omega)."""
    p = params
    H = _transfer(kernel, omega, method)
    amp = 2 * p.g + p.G * (p.kappa - 1j * p.delta) * np.exp(-1j * p.theta) * H
    value = math.pi * p.omega_r ** 2 * p.kappa / (p.kappa ** 2 + p.delta ** 2) * np.abs(amp) ** 2
    return float(value) if np.ndim(value) == 0 else value


def variance_integrand(params: ModelParams, kernel: FeedbackKernel, omega: ArrayLike,
                       method: TransformMethod = TransformMethod.EXPINT) -> ArrayLike:
    """S(omega) / |D(omega)|^2 / (4 pi^2)."""
    s = spectral_density(params, kernel, omega, method)
    d = response_D(params, kernel, omega, method)
    return s / np.abs(d) ** 2 / (4 * math.pi ** 2)


def critical_coupling(params: ModelParams) -> float:
    """Coupling at which the open Dicke model turns superradiant without feedback."""
    if params.delta <= 0:
        raise NoThresholdError(f"critical coupling requires delta > 0, got {params.delta}")
    p = params
    return math.sqrt(p.omega_r * (p.kappa ** 2 + p.delta ** 2) / (4 * p.delta))


def critical_gain(params: ModelParams, kernel: FeedbackKernel) -> float:
    """Feedback gain at which D(0) = 0. Negative values mean the system is
    already superradiant without feedback."""
    p = params
    h0 = kernel.zero_frequency()
    denominator = 4 * p.g * p.kappa * p.c_theta * h0
    if p.c_theta == 0 or h0 == 0 or denominator == 0:
        raise NoThresholdError(
            f"no threshold: g*kappa*C_theta*H(0) = 0 (g={p.g}, kappa={p.kappa}, "
            f"C_theta={p.c_theta}, H(0)={h0})")
    return (p.omega_r * (p.kappa ** 2 + p.delta ** 2) - 4 * p.g ** 2 * p.delta) / denominator


def is_stable(params: ModelParams, kernel: FeedbackKernel) -> bool:
    return response_D(params, kernel, 0.0).real > 0


def _quad_piece(f, a: float, b: float, opts: QuadOptions):
    result = integrate.quad(f, a, b, epsabs=0.0, epsrel=opts.rel_tol,
                            limit=opts.limit, full_output=1)
    value, abserr = result[0], result[1]
    message = result[3] if len(result) > 3 else None
    return value, abserr, message


def _breakpoints(params: ModelParams, kernel: FeedbackKernel, opts: QuadOptions) -> np.ndarray:
    M = opts.max_omega
    grid = np.linspace(-M, M, opts.scan_points)
    absd = np.abs(response_D(params, kernel, grid, opts.method))
    interior = (absd[1:-1] < absd[:-2]) & (absd[1:-1] <= absd[2:])
    minima = grid[1:-1][interior]
    near_zero = np.array([1e-8, 1e-6, 1e-4, 1e-2, 1e-1])
    points = np.concatenate([[-M, 0.0, M], minima, near_zero, -near_zero])
    return np.unique(points[(points >= -M) & (points <= M)])


def variance_estimate(params: ModelParams, kernel: FeedbackKernel,
                      quad_opts: Optional[QuadOptions] = None) -> VarianceEstimate:
    """Stationary <X^2> with its error budget."""
    opts = quad_opts or QuadOptions()
    if not is_stable(params, kernel):
        raise UnstableRegimeError(
            f"D(0) <= 0 at G = {params.G}: stationary variance does not exist")

    def f(w: float) -> float:
        return float(variance_integrand(params, kernel, w, opts.method))

    points = _breakpoints(params, kernel, opts)
    total, abserr, warnings = 0.0, 0.0, []
    for a, b in zip(points[:-1], points[1:]):
        value, err, message = _quad_piece(f, float(a), float(b), opts)
        total += value
        abserr += err
        if message:
            warnings.append(f"[{a:.6g}, {b:.6g}]: {message.strip()}")

    # S/|D|^2 ~ C/omega^4 beyond max_omega
    M = opts.max_omega
    tail = (f(M) + f(-M)) * M / 3.0
    total += tail

    if not math.isfinite(total) or total <= 0:
        raise QuadratureError(f"variance integral returned {total}")
    if tail > opts.tail_tolerance * total:
        raise QuadratureError(
            f"tail beyond max_omega={M} is {tail / total:.2e} of the total; raise max_omega")
    if abserr > opts.error_tolerance * total:
        raise QuadratureError(
            f"variance integral error {abserr:.3e} exceeds {opts.error_tolerance:g} of {total:.6e}")
    return VarianceEstimate(total, abserr, tail, len(points) - 1, warnings)


def variance_X2(params: ModelParams, kernel: FeedbackKernel,
                quad_opts: Optional[QuadOptions] = None) -> float:
    """<X^2> = (1/4pi^2) int S(omega)/|D(omega)|^2 d omega, below threshold only."""
    return variance_estimate(params, kernel, quad_opts).value


def time_kernel_E(params: ModelParams, kernel: FeedbackKernel, t: float) -> float:
    """Real-time memory kernel of the integro-differential equation for X."""
    if t <= 0:
        return 0.0
    p = params
    direct = p.g * math.exp(-p.kappa * t) * math.sin(p.delta * t)
    if p.G == 0:
        return direct
    if isinstance(kernel, InstantaneousKernel):
        conv = kernel.zero_frequency() * math.exp(-p.kappa * t) * math.sin(p.delta * t + p.theta)
    else:
        integrand = lambda z: (float(kernel.evaluate(t - z)) * math.exp(-p.kappa * z)
                               * math.sin(p.delta * z + p.theta))
        # e^{-kappa z} is negligible past 40/kappa
        upper = t if p.kappa == 0 else min(t, 40.0 / p.kappa)
        conv = integrate.quad(integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-11, limit=400)[0]
    return direct + p.G * p.kappa * conv


def time_kernel_transform(params: ModelParams, kernel: FeedbackKernel, omega: float) -> complex:
    """Numerical int_0^inf E(t) exp(-i omega t) dt."""
    E = lambda t: time_kernel_E(params, kernel, t)
    if omega == 0:
        return complex(integrate.quad(E, 0.0, np.inf, epsabs=1e-12, limit=400)[0])
    w = abs(omega)
    re = integrate.quad(E, 0.0, np.inf, weight="cos", wvar=w, epsabs=1e-12, limlst=200)[0]
    im = integrate.quad(E, 0.0, np.inf, weight="sin", wvar=w, epsabs=1e-12, limlst=200)[0]
    value = complex(re, -im)
    return value if omega > 0 else value.conjugate()


def sample_spectrum(label: SpectrumLabel, params: ModelParams, kernel: FeedbackKernel,
                    omega_grid: np.ndarray,
                    method: TransformMethod = TransformMethod.EXPINT) -> SpectrumSeries:
    grid = np.asarray(omega_grid, dtype=float)
    if label is SpectrumLabel.D:
        values = response_D(params, kernel, grid, method)
    elif label is SpectrumLabel.MX:
        values = noise_transfer(params, kernel, grid, method)[0]
    elif label is SpectrumLabel.MY:
        values = noise_transfer(params, kernel, grid, method)[1]
    elif label is SpectrumLabel.S:
        values = spectral_density(params, kernel, grid, method)
    elif label is SpectrumLabel.S_ADIABATIC:
        values = spectral_density_adiabatic(params, kernel, grid, method)
    else:
        values = variance_integrand(params, kernel, grid, method)
    return SpectrumSeries(grid, np.atleast_1d(values), label)


def peak_frequency(params: ModelParams, kernel: FeedbackKernel, omega_max: float = 3.0,
                   points: int = 6001, symmetrized: bool = True) -> float:
    """Frequency omega >= 0 of the highest fluctuation peak S/|D|^2.

    With ``symmetrized`` the peak is taken on the even part
    (f(omega) + f(-omega)) / 2, the power spectrum of the real quadrature X.
    """
    def spectrum(w):
        values = variance_integrand(params, kernel, w)
        if symmetrized:
            values = 0.5 * (values + variance_integrand(params, kernel, -np.asarray(w)))
        return values

    grid = np.linspace(0.0, omega_max, points)
    values = spectrum(grid)
    i = int(np.argmax(values))
    if i == 0:
        return 0.0
    if i == points - 1:
        return float(grid[-1])
    res = optimize.minimize_scalar(lambda w: -float(spectrum(w)),
                                   bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)
