"""Physical parameters of the feedback-controlled Dicke model.

All quantities are in recoil units: omega_r sets the frequency scale and
times are measured in 1/omega_r.
"""
from dataclasses import dataclass, asdict, replace
from typing import Any, Dict
import math

from .errors import ParameterError


@dataclass(frozen=True)
class ModelParams:
    """Physical constants; the single source of truth for every formula.

    Args:
        omega_r: spin (recoil) frequency
        delta: cavity detuning
        kappa: cavity decay rate
        g: spin-cavity coupling
        G: feedback gain, multiplies the kernel
        theta: measured quadrature angle [rad]
        n_spins: particle number N
    """
    omega_r: float = 1.0
    delta: float = 2.0
    kappa: float = 1.0
    g: float = 0.1
    G: float = 0.0
    theta: float = math.pi / 2
    n_spins: int = 1

    def __post_init__(self):
        problems = []
        for name in ("omega_r", "delta", "kappa", "g", "G", "theta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                problems.append(f"{name} must be a finite number, got {value!r}")
        if not problems:
            if self.omega_r <= 0:
                problems.append("omega_r must be > 0")
            if self.kappa < 0:
                problems.append("kappa must be >= 0")
        if isinstance(self.n_spins, bool) or not isinstance(self.n_spins, int) or self.n_spins < 1:
            problems.append(f"n_spins must be an integer >= 1, got {self.n_spins!r}")
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def c_theta(self) -> float:
        """delta*cos(theta) + kappa*sin(theta)."""
        return self.delta * math.cos(self.theta) + self.kappa * math.sin(self.theta)

    def with_gain(self, G: float) -> "ModelParams":
        return replace(self, G=float(G))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        values = dict(data)
        for name in ("omega_r", "delta", "kappa", "g", "G", "theta"):
            if name in values and isinstance(values[name], int) and not isinstance(values[name], bool):
                values[name] = float(values[name])
        return cls(**values)


@dataclass(frozen=True)
class NoiseModel:
    """Cavity vacuum noise, <f_a(t+tau) f_a^dag(t)> = strength * delta(tau).

    The noise operators never appear explicitly: they enter through the
    spectral density and through the Wiener increments of the trajectories.
    """
    kappa: float

    @property
    def strength(self) -> float:
        return 2.0 * self.kappa

    @property
    def quadrature_intensity(self) -> float:
        # f_x, f_y are halves of f_a + f_a^dag and i(f_a^dag - f_a)
        return self.strength / 4.0

    @classmethod
    def from_params(cls, params: ModelParams) -> "NoiseModel":
        return cls(kappa=params.kappa)
