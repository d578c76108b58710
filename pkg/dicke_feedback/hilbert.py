"""Truncated Hilbert spaces for the trajectory simulations.

Product basis ordering is matter (x) cavity: ``np.kron(matter_op, cavity_op)``.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple
import math

import numpy as np

from .errors import HilbertSpaceError
from .model import ModelParams

# dense matrices beyond this are impractical for per-step products
MAX_DIMENSION = 2000


class MatterKind(Enum):
    SPIN = "spin"
    BOSON = "boson"


def destroy(n: int) -> np.ndarray:
    """Annihilation operator on a Fock space truncated at n levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def spin_operators(n_spins: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S_x, S_y, S_z) on the j = N/2 multiplet, basis m = -j..j ascending."""
    j = n_spins / 2.0
    m = np.arange(-j, j + 1.0)
    raise_coeff = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    sp = np.diag(raise_coeff, -1).astype(complex)
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


@dataclass
class HilbertSpace:
    """Operator cache on matter (x) cavity."""
    cavity_dim: int
    matter_kind: MatterKind
    matter_dim: int
    n_spins: int = 1
    operators: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    matter_operators: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.cavity_dim * self.matter_dim

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def lift_matter(self, op: np.ndarray) -> np.ndarray:
        return np.kron(op, np.eye(self.cavity_dim))

    def lift_cavity(self, op: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(self.matter_dim), op)

    def __getattr__(self, name: str) -> np.ndarray:
        operators = self.__dict__.get("operators", {})
        if name in operators:
            return operators[name]
        raise AttributeError(name)

    @property
    def matter_quadrature(self) -> np.ndarray:
        """S_x for spins, X = (b + b^dag)/2 for the boson."""
        return self.operators["sx"] if self.matter_kind is MatterKind.SPIN else self.operators["X"]

    @property
    def feedback_matter_operator(self) -> np.ndarray:
        """Matter-space operator multiplying G * I_c in the feedback Hamiltonian."""
        if self.matter_kind is MatterKind.SPIN:
            return 2.0 / math.sqrt(self.n_spins) * self.matter_operators["sx"]
        b = self.matter_operators["b"]
        return b + b.conj().T

    def x_theta(self, theta: float) -> np.ndarray:
        a = self.operators["a"]
        op = a * np.exp(-1j * theta)
        return 0.5 * (op + op.conj().T)

    def system_hamiltonian(self, params: ModelParams) -> np.ndarray:
        """Dicke Hamiltonian (spin) or its linearized boson form, without feedback."""
        a = self.operators["a"]
        field_x = a + a.conj().T
        h = params.delta * self.operators["n_cav"]
        if self.matter_kind is MatterKind.SPIN:
            h = h + params.omega_r * self.operators["sz"]
            h = h + 2.0 * params.g / math.sqrt(self.n_spins) * self.operators["sx"] @ field_x
        else:
            b = self.operators["b"]
            h = h + params.omega_r * self.operators["n_matter"]
            h = h + params.g * (b + b.conj().T) @ field_x
        return h

    def top_populations(self, rho: np.ndarray) -> Tuple[float, float]:
        """Population of the highest cavity level and of the highest boson level."""
        diag = np.real(np.diagonal(rho)).reshape(self.matter_dim, self.cavity_dim)
        cavity_top = float(diag[:, -1].sum())
        matter_top = float(diag[-1, :].sum()) if self.matter_kind is MatterKind.BOSON else 0.0
        return cavity_top, matter_top


def _check_commutators(space: HilbertSpace) -> None:
    a = destroy(space.cavity_dim)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(space.cavity_dim)
    expected[-1, -1] = -(space.cavity_dim - 1)
    if not np.allclose(comm, expected, atol=1e-12):
        raise HilbertSpaceError("[a, a^dag] deviates from 1 away from the cutoff edge")
    if space.matter_kind is MatterKind.SPIN:
        sx, sy, sz = (space.matter_operators[k] for k in ("sx", "sy", "sz"))
        if np.max(np.abs(sx @ sy - sy @ sx - 1j * sz)) > 1e-12:
            raise HilbertSpaceError("[S_x, S_y] != i S_z")


def build_space(kind: MatterKind, cavity_dim: int = 20, matter_cutoff: Optional[int] = None,
                n_spins: int = 1) -> HilbertSpace:
    """Build and verify the operator cache.

    Args:
        kind: spin multiplet or truncated Holstein-Primakoff boson
        cavity_dim: Fock cutoff of the cavity mode
        matter_cutoff: boson cutoff; for spins it must be omitted or equal N + 1
        n_spins: N
    """
    kind = MatterKind(kind)
    if cavity_dim < 2:
        raise HilbertSpaceError(f"cavity cutoff must be >= 2, got {cavity_dim}")
    if n_spins < 1:
        raise HilbertSpaceError(f"n_spins must be >= 1, got {n_spins}")
    matter_ops: Dict[str, np.ndarray] = {}
    if kind is MatterKind.SPIN:
        matter_dim = n_spins + 1
        if matter_cutoff is not None and matter_cutoff != matter_dim:
            raise HilbertSpaceError(
                f"spin multiplet for N={n_spins} needs dimension {matter_dim}, got cutoff {matter_cutoff}")
        matter_ops["sx"], matter_ops["sy"], matter_ops["sz"] = spin_operators(n_spins)
    else:
        matter_dim = 20 if matter_cutoff is None else matter_cutoff
        if matter_dim < 2:
            raise HilbertSpaceError(f"boson cutoff must be >= 2, got {matter_dim}")
        b = destroy(matter_dim)
        matter_ops["b"] = b
        matter_ops["X"] = 0.5 * (b + b.conj().T)
        matter_ops["n_matter"] = b.conj().T @ b
    if matter_dim * cavity_dim > MAX_DIMENSION:
        raise HilbertSpaceError(
            f"dimension {matter_dim * cavity_dim} exceeds the dense limit {MAX_DIMENSION}")

    space = HilbertSpace(cavity_dim=cavity_dim, matter_kind=kind, matter_dim=matter_dim,
                         n_spins=n_spins, matter_operators=matter_ops)
    a = destroy(cavity_dim)
    ops = {
        "a": space.lift_cavity(a),
        "n_cav": space.lift_cavity(a.conj().T @ a),
    }
    ops["ad"] = ops["a"].conj().T
    for name, op in matter_ops.items():
        ops[name] = space.lift_matter(op)
    if kind is MatterKind.BOSON:
        ops["bd"] = ops["b"].conj().T
    space.operators = ops
    _check_commutators(space)
    return space
