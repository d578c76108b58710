"""Feedback kernels h(t) and their Fourier transforms H(omega).

Convention: H(omega) = int_0^inf h(t) exp(-i omega t) dt, so that a time
derivative becomes i*omega. Every kernel is causal and real, hence
H(-omega) = conj(H(omega)).
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Optional, Union
import math

import mpmath
import numpy as np
from scipy import integrate

from .errors import KernelError

ArrayLike = Union[float, np.ndarray]


class KernelShape(Enum):
    POWER_LAW = "power_law"
    EXPONENTIAL = "exponential"
    INSTANTANEOUS = "instantaneous"
    DELAY_TRAIN = "delay_train"


class TransformMethod(Enum):
    """How the power-law transform is evaluated."""
    EXPINT = "expint"
    QUADRATURE = "quadrature"


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise KernelError(f"{name} must be a finite number, got {value!r}")


class FeedbackKernel(ABC):
    """Causal real response function of the feedback loop."""

    shape: KernelShape

    @abstractmethod
    def evaluate(self, t: ArrayLike) -> ArrayLike:
        """h(t); zero for t < 0."""

    @abstractmethod
    def zero_frequency(self) -> float:
        """H(0) = int_0^inf h(t) dt."""

    @abstractmethod
    def tail_integral(self, T: float) -> float:
        """int_T^inf h(t) dt."""

    @abstractmethod
    def memory_window(self, tol: float = 1e-3) -> float:
        """Smallest T with tail_integral(T) < tol * |H(0)|."""

    def transform(self, omega: float,
                  method: TransformMethod = TransformMethod.EXPINT) -> complex:
        if omega == 0.0:
            return complex(self.zero_frequency())
        return _fourier_quadrature(self, omega)

    def taps(self, dt: float, n: int) -> np.ndarray:
        """Samples h(m*dt), m = 0..n-1, used by discrete convolutions."""
        return np.asarray(self.evaluate(np.arange(n) * dt), dtype=float)

    def for_step(self, dt: float) -> "FeedbackKernel":
        """Kernel as seen by a consumer integrating with step dt."""
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = {"shape": self.shape.value}
        data.update(asdict(self))
        return data


@dataclass(frozen=True)
class PowerLawKernel(FeedbackKernel):
    """h(t) = h0 * (t0 / (t + t0))**(s + 1).

    When h0 is omitted it defaults to s, which makes H(0) = t0 for every s.
    """
    s: float
    t0: float = 1.0
    h0: Optional[float] = None
    shape = KernelShape.POWER_LAW

    def __post_init__(self):
        _check_finite(s=self.s, t0=self.t0)
        if self.h0 is None:
            object.__setattr__(self, "h0", float(self.s))
        _check_finite(h0=self.h0)
        if self.s <= 0:
            raise KernelError(f"power-law exponent s must be > 0, got {self.s}")
        if self.t0 <= 0:
            raise KernelError(f"t0 must be > 0, got {self.t0}")

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        t = np.asarray(t, dtype=float)
        clipped = np.where(t < 0, 0.0, t)
        values = np.where(t < 0, 0.0, self.h0 * (self.t0 / (clipped + self.t0)) ** (self.s + 1))
        return float(values) if values.ndim == 0 else values

    def zero_frequency(self) -> float:
        return self.h0 * self.t0 / self.s

    def tail_integral(self, T: float) -> float:
        T = max(T, 0.0)
        return self.zero_frequency() * (self.t0 / (T + self.t0)) ** self.s

    def memory_window(self, tol: float = 1e-3) -> float:
        return self.t0 * (tol ** (-1.0 / self.s) - 1.0)

    def transform(self, omega: float,
                  method: TransformMethod = TransformMethod.EXPINT) -> complex:
        if omega == 0.0:
            return complex(self.zero_frequency())
        if method is TransformMethod.QUADRATURE:
            return _fourier_quadrature(self, omega)
        return _power_law_expint(float(self.s), float(self.t0), float(self.h0), float(omega))


@dataclass(frozen=True)
class ExponentialKernel(FeedbackKernel):
    """h(t) = amplitude * exp(-rate * t)."""
    rate: float
    amplitude: float = 1.0
    shape = KernelShape.EXPONENTIAL

    def __post_init__(self):
        _check_finite(rate=self.rate, amplitude=self.amplitude)
        if self.rate <= 0:
            raise KernelError(f"exponential rate must be > 0, got {self.rate}")

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        t = np.asarray(t, dtype=float)
        values = np.where(t < 0, 0.0, self.amplitude * np.exp(-self.rate * np.abs(t)))
        return float(values) if values.ndim == 0 else values

    def zero_frequency(self) -> float:
        return self.amplitude / self.rate

    def tail_integral(self, T: float) -> float:
        return self.zero_frequency() * math.exp(-self.rate * max(T, 0.0))

    def memory_window(self, tol: float = 1e-3) -> float:
        return -math.log(tol) / self.rate

    def transform(self, omega: float,
                  method: TransformMethod = TransformMethod.EXPINT) -> complex:
        return self.amplitude / complex(self.rate, omega)


@dataclass(frozen=True)
class InstantaneousKernel(FeedbackKernel):
    """h(t) = weight * delta(t).

    The delta has no pointwise value; ``evaluate`` returns 0 and discrete
    consumers get a single tap of height weight/dt.
    """
    weight: float = 1.0
    shape = KernelShape.INSTANTANEOUS

    def __post_init__(self):
        _check_finite(weight=self.weight)

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        values = np.zeros_like(np.asarray(t, dtype=float))
        return float(values) if values.ndim == 0 else values

    def zero_frequency(self) -> float:
        return self.weight

    def tail_integral(self, T: float) -> float:
        return self.weight if T <= 0 else 0.0

    def memory_window(self, tol: float = 1e-3) -> float:
        return 0.0

    def transform(self, omega: float,
                  method: TransformMethod = TransformMethod.EXPINT) -> complex:
        return complex(self.weight)

    def taps(self, dt: float, n: int) -> np.ndarray:
        taps = np.zeros(max(n, 1))
        taps[0] = self.weight / dt
        return taps


@dataclass(frozen=True)
class DelayTrainKernel(FeedbackKernel):
    """h(t) = amplitude * sum_n n**-(s+1) * gauss_sigma(t - n*period), n = 1..n_terms.

    Pulses are unit-area Gaussians of width ``pulse_width``; consumers set the
    width to their own step through ``for_step``.
    """
    period: float
    s: float
    n_terms: int = 10
    amplitude: float = 1.0
    pulse_width: float = 0.01
    shape = KernelShape.DELAY_TRAIN

    def __post_init__(self):
        _check_finite(period=self.period, s=self.s, amplitude=self.amplitude,
                      pulse_width=self.pulse_width)
        if self.period <= 0:
            raise KernelError(f"delay period must be > 0, got {self.period}")
        if self.s <= 0:
            raise KernelError(f"delay-train exponent s must be > 0, got {self.s}")
        if isinstance(self.n_terms, bool) or not isinstance(self.n_terms, int) or self.n_terms < 1:
            raise KernelError(f"n_terms must be an integer >= 1, got {self.n_terms!r}")
        if not 0 < self.pulse_width < self.period / 4:
            raise KernelError("pulse_width must lie in (0, period/4)")

    @property
    def weights(self) -> np.ndarray:
        n = np.arange(1, self.n_terms + 1, dtype=float)
        return self.amplitude * n ** (-(self.s + 1))

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        t = np.asarray(t, dtype=float)
        centers = self.period * np.arange(1, self.n_terms + 1)
        sigma = self.pulse_width
        offsets = t[..., None] - centers
        pulses = np.exp(-0.5 * (offsets / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        values = np.where(t < 0, 0.0, pulses @ self.weights)
        return float(values) if values.ndim == 0 else values

    def zero_frequency(self) -> float:
        return float(self.weights.sum())

    def tail_integral(self, T: float) -> float:
        centers = self.period * np.arange(1, self.n_terms + 1)
        return float(self.weights[centers >= T].sum())

    def memory_window(self, tol: float = 1e-3) -> float:
        remaining = self.zero_frequency() - np.cumsum(self.weights)
        n = int(np.argmax(remaining < tol * abs(self.zero_frequency()))) + 1
        return n * self.period + 5 * self.pulse_width

    def transform(self, omega: float,
                  method: TransformMethod = TransformMethod.EXPINT) -> complex:
        n = np.arange(1, self.n_terms + 1)
        phases = np.exp(-1j * omega * n * self.period)
        envelope = math.exp(-0.5 * (omega * self.pulse_width) ** 2)
        return complex(envelope * np.sum(self.weights * phases))

    def for_step(self, dt: float) -> "DelayTrainKernel":
        return replace(self, pulse_width=float(dt))


@lru_cache(maxsize=1 << 18)
def _power_law_expint(s: float, t0: float, h0: float, omega: float) -> complex:
    z = mpmath.mpc(0.0, omega * t0)
    value = h0 * t0 * mpmath.exp(z) * mpmath.expint(s + 1, z)
    return complex(value)


def _fourier_quadrature(kernel: FeedbackKernel, omega: float) -> complex:
    """QAWF Fourier-weighted quadrature on [0, inf)."""
    w = abs(omega)
    h = lambda t: float(kernel.evaluate(t))
    re = integrate.quad(h, 0.0, np.inf, weight="cos", wvar=w, limlst=200)[0]
    im = integrate.quad(h, 0.0, np.inf, weight="sin", wvar=w, limlst=200)[0]
    value = complex(re, -im)
    return value if omega > 0 else value.conjugate()


def kernel_eval(kernel: FeedbackKernel, t: ArrayLike) -> ArrayLike:
    """h(t), vectorized over t."""
    return kernel.evaluate(t)


def kernel_transform(kernel: FeedbackKernel, omega: ArrayLike,
                     method: TransformMethod = TransformMethod.EXPINT) -> Union[complex, np.ndarray]:
    """H(omega); array input is evaluated elementwise."""
    if np.ndim(omega) == 0:
        return kernel.transform(float(omega), method)
    omega = np.asarray(omega, dtype=float)
    flat = np.fromiter((kernel.transform(float(w), method) for w in omega.ravel()),
                       dtype=complex, count=omega.size)
    return flat.reshape(omega.shape)


_SHAPES = {
    KernelShape.POWER_LAW: PowerLawKernel,
    KernelShape.EXPONENTIAL: ExponentialKernel,
    KernelShape.INSTANTANEOUS: InstantaneousKernel,
    KernelShape.DELAY_TRAIN: DelayTrainKernel,
}


def kernel_from_dict(data: Dict[str, Any]) -> FeedbackKernel:
    values = dict(data)
    try:
        shape = KernelShape(values.pop("shape"))
    except (KeyError, ValueError) as e:
        raise KernelError(f"unknown kernel shape in {data!r}") from e
    try:
        return _SHAPES[shape](**values)
    except TypeError as e:
        raise KernelError(f"bad fields for {shape.value} kernel: {e}") from e
