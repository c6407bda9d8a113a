"""
Mechanical systems: a Riemannian mass-matrix field M(q) and a potential V(q).

Lagrangian L = ½ vᵀM(q)v − V(q), Hamiltonian H = ½ pᵀM(q)⁻¹p + V(q), and the
Legendre transform p = M(q)v between them. Dynamics are always integrated on
the Hamiltonian side.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from hbs.errors import DimensionMismatch, NonFiniteInput, NotPositiveDefinite

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
FD_REL_STEP = 1e-6

Vector = np.ndarray
MatrixField = Callable[[Vector], np.ndarray]
ScalarField = Callable[[Vector], float]


def _as_vector(values, name: str = "q") -> Vector:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} has non-finite entries: {arr.tolist()}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChartPoint:
    q: Vector

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vector(self.q, "q"))

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class VelocityState:
    q: ChartPoint
    v: Vector

    def __post_init__(self):
        if not isinstance(self.q, ChartPoint):
            object.__setattr__(self, "q", ChartPoint(self.q))
        v = _as_vector(self.v, "v")
        if v.size != self.q.n:
            raise DimensionMismatch(f"q has {self.q.n} entries but v has {v.size}")
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class MomentumState:
    q: ChartPoint
    p: Vector

    def __post_init__(self):
        if not isinstance(self.q, ChartPoint):
            object.__setattr__(self, "q", ChartPoint(self.q))
        p = _as_vector(self.p, "p")
        if p.size != self.q.n:
            raise DimensionMismatch(f"q has {self.q.n} entries but p has {p.size}")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class MechanicalSystem:
    """
    A mechanical system on an n-dimensional chart.

    `mass_matrix_derivative`, when given, returns [∂M/∂q^1, ..., ∂M/∂q^n];
    otherwise central differences are used. Same for `potential_gradient`.
    """
    name: str
    n: int
    mass_matrix: MatrixField
    potential: ScalarField
    potential_gradient: Optional[Callable[[Vector], Vector]] = None
    mass_matrix_derivative: Optional[Callable[[Vector], Sequence[np.ndarray]]] = None
    coordinate_names: Tuple[str, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch(f"system dimension must be >= 1, got {self.n}")
        if not self.coordinate_names:
            object.__setattr__(self, "coordinate_names", tuple(f"q{i + 1}" for i in range(self.n)))
        elif len(self.coordinate_names) != self.n:
            raise DimensionMismatch(
                f"{len(self.coordinate_names)} coordinate names for a {self.n}-dimensional system"
            )


def coords(sys: MechanicalSystem, q: Union[ChartPoint, Sequence[float], Vector]) -> Vector:
    """Coordinates of q as a checked float vector of the system's dimension."""
    arr = q.q if isinstance(q, ChartPoint) else _as_vector(q, "q")
    if arr.size != sys.n:
        raise DimensionMismatch(f"{sys.name} has dimension {sys.n}, got q of length {arr.size}")
    return arr


def fd_step(x: float) -> float:
    return FD_REL_STEP * max(1.0, abs(x))


def _checked_mass_matrix(sys: MechanicalSystem, q: Vector) -> np.ndarray:
    M = np.array(sys.mass_matrix(q), dtype=float)
    if M.shape != (sys.n, sys.n):
        raise DimensionMismatch(f"{sys.name}: mass matrix has shape {M.shape}, expected {(sys.n, sys.n)}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput(f"{sys.name}: mass matrix is not finite at q={q.tolist()}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite(f"{sys.name}: mass matrix is not symmetric at q={q.tolist()}")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{sys.name}: mass matrix is not positive-definite at q={q.tolist()}")
    return M


def mass_matrix(sys: MechanicalSystem, q) -> np.ndarray:
    """M(q), checked symmetric positive-definite."""
    return _checked_mass_matrix(sys, coords(sys, q))


def mass_matrix_derivatives(sys: MechanicalSystem, q) -> List[np.ndarray]:
    """[∂M/∂q^i], analytic when the system supplies them."""
    q = coords(sys, q)
    if sys.mass_matrix_derivative is not None:
        return [np.array(d, dtype=float) for d in sys.mass_matrix_derivative(q)]

    derivatives = []
    for i in range(sys.n):
        step = fd_step(q[i])
        dq = np.zeros(sys.n)
        dq[i] = step
        plus = np.array(sys.mass_matrix(q + dq), dtype=float)
        minus = np.array(sys.mass_matrix(q - dq), dtype=float)
        derivatives.append((plus - minus) / (2.0 * step))
    return derivatives


def potential(sys: MechanicalSystem, q) -> float:
    q = coords(sys, q)
    value = float(sys.potential(q))
    if not np.isfinite(value):
        raise NonFiniteInput(f"{sys.name}: potential is not finite at q={q.tolist()}")
    return value


def potential_gradient(sys: MechanicalSystem, q) -> Vector:
    q = coords(sys, q)
    if sys.potential_gradient is not None:
        return np.array(sys.potential_gradient(q), dtype=float).reshape(sys.n)

    grad = np.zeros(sys.n)
    for i in range(sys.n):
        step = fd_step(q[i])
        dq = np.zeros(sys.n)
        dq[i] = step
        grad[i] = (float(sys.potential(q + dq)) - float(sys.potential(q - dq))) / (2.0 * step)
    return grad


def kinetic_energy(sys: MechanicalSystem, s: VelocityState) -> float:
    M = mass_matrix(sys, s.q)
    return 0.5 * float(s.v @ M @ s.v)


def lagrangian(sys: MechanicalSystem, s: VelocityState) -> float:
    return kinetic_energy(sys, s) - potential(sys, s.q)


def momentum_kinetic_energy(sys: MechanicalSystem, q, p: Vector) -> float:
    """½ pᵀM(q)⁻¹p."""
    M = mass_matrix(sys, q)
    return 0.5 * float(p @ np.linalg.solve(M, p))


def hamiltonian(sys: MechanicalSystem, s: MomentumState) -> float:
    """H(q, p) = ½ pᵀM(q)⁻¹p + V(q)."""
    return momentum_kinetic_energy(sys, s.q, s.p) + potential(sys, s.q)


def legendre_to_momentum(sys: MechanicalSystem, s: VelocityState) -> MomentumState:
    M = mass_matrix(sys, s.q)
    return MomentumState(s.q, M @ s.v)


def legendre_to_velocity(sys: MechanicalSystem, s: MomentumState) -> VelocityState:
    M = mass_matrix(sys, s.q)
    return VelocityState(s.q, np.linalg.solve(M, s.p))


def vector_field(sys: MechanicalSystem, q: Vector, p: Vector) -> Tuple[Vector, Vector]:
    """
    Hamilton's equations on raw arrays.

    With v = M⁻¹p and ∂M⁻¹/∂q^i = −M⁻¹(∂M/∂q^i)M⁻¹, the kinetic part of
    −∂H/∂q^i is ½ vᵀ(∂M/∂q^i)v.
    """
    M = _checked_mass_matrix(sys, q)
    qdot = np.linalg.solve(M, p)
    pdot = -potential_gradient(sys, q)
    for i, dM in enumerate(mass_matrix_derivatives(sys, q)):
        pdot[i] += 0.5 * float(qdot @ dM @ qdot)
    return qdot, pdot


def hamiltonian_vector_field(sys: MechanicalSystem, s: MomentumState) -> Tuple[Vector, Vector]:
    """(q̇, ṗ) = (∂H/∂p, −∂H/∂q)."""
    return vector_field(sys, coords(sys, s.q), s.p)
