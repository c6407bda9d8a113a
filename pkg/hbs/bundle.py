"""
Abelian symmetry actions and the mechanical connection.

The group is ℝᵏ acting through k commuting generator fields ξ_a(q). The
momentum map is the cotangent-lift pairing J_a(q, p) = ⟨p, ξ_a(q)⟩, which is
the equivariant momentum map of a lifted action. The locked inertia tensor is
the Gram matrix of the generators in the kinetic metric, 𝕀_ab = ξ_aᵀM(q)ξ_b,
and the mechanical connection is 𝒜(q, v) = 𝕀(q)⁻¹J(q, M(q)v).
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from hbs.errors import (
    DimensionMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    ShapeProjectionUnavailable,
)
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    VelocityState,
    coords,
    fd_step,
    lagrangian,
    mass_matrix,
)

logger = logging.getLogger(__name__)

Generator = Callable[[np.ndarray], np.ndarray]

INVARIANCE_FD_STEP = 1e-5
FD_DIRECTION_STEP = 1e-6


@dataclass(frozen=True)
class SymmetryAction:
    k: int
    generators: Tuple[Generator, ...]
    coordinate_indices: Optional[Tuple[int, ...]] = None
    label: str = "action"

    def __post_init__(self):
        if len(self.generators) != self.k:
            raise DimensionMismatch(f"{self.label}: k={self.k} but {len(self.generators)} generators given")
        if self.coordinate_indices is not None:
            indices = tuple(int(i) for i in self.coordinate_indices)
            if len(indices) != self.k or len(set(indices)) != self.k:
                raise DimensionMismatch(f"{self.label}: coordinate_indices {indices} do not match k={self.k}")
            object.__setattr__(self, "coordinate_indices", indices)


@dataclass(frozen=True)
class LieAlgebraVector:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if not np.all(np.isfinite(xi)):
            raise NonFiniteInput(f"Lie algebra vector is not finite: {xi.tolist()}")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class MomentumValue:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if not np.all(np.isfinite(mu)):
            raise NonFiniteInput(f"momentum value is not finite: {mu.tolist()}")
        object.__setattr__(self, "mu", mu)


@dataclass
class InvarianceReport:
    max_derivative: float
    per_generator: List[float]
    samples: int


def coordinate_action(indices: Sequence[int], n: int, label: Optional[str] = None) -> SymmetryAction:
    """Translations along the coordinates in `indices`: ξ_a = ∂/∂q^{indices[a]}."""
    indices = tuple(int(i) for i in indices)
    for i in indices:
        if not 0 <= i < n:
            raise DimensionMismatch(f"coordinate index {i} out of range for dimension {n}")
    if len(indices) >= n:
        logger.warning(f"k={len(indices)} translations on n={n} coordinates: no shape space, every guard is Horizontal")

    def make_generator(i: int) -> Generator:
        def generator(q: np.ndarray) -> np.ndarray:
            e = np.zeros(n)
            e[i] = 1.0
            return e
        return generator

    return SymmetryAction(
        k=len(indices),
        generators=tuple(make_generator(i) for i in indices),
        coordinate_indices=indices,
        label=label or f"translations{list(indices)}",
    )


def generator_matrix(action: SymmetryAction, q: np.ndarray) -> np.ndarray:
    """n×k matrix whose columns are ξ_a(q)."""
    n = q.size
    if action.k == 0:
        return np.zeros((n, 0))
    columns = [np.array(g(q), dtype=float).reshape(-1) for g in action.generators]
    for c in columns:
        if c.size != n:
            raise DimensionMismatch(f"{action.label}: generator returned {c.size} entries, expected {n}")
    Xi = np.column_stack(columns)
    if not np.all(np.isfinite(Xi)):
        raise NonFiniteInput(f"{action.label}: generators not finite at q={q.tolist()}")
    return Xi


def momentum_map(action: SymmetryAction, s: MomentumState) -> MomentumValue:
    """J_a(q, p) = ⟨p, ξ_a(q)⟩."""
    Xi = generator_matrix(action, s.q.q)
    return MomentumValue(Xi.T @ s.p)


def _locked_inertia(M: np.ndarray, Xi: np.ndarray, label: str) -> np.ndarray:
    inertia = Xi.T @ M @ Xi
    if inertia.size:
        try:
            np.linalg.cholesky(inertia)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"{label}: locked inertia tensor is singular; generators are degenerate")
    return inertia


def locked_inertia(sys: MechanicalSystem, action: SymmetryAction, q) -> np.ndarray:
    """𝕀_ab(q) = ξ_a(q)ᵀ M(q) ξ_b(q)."""
    q = coords(sys, q)
    return _locked_inertia(mass_matrix(sys, q), generator_matrix(action, q), action.label)


def mechanical_connection(sys: MechanicalSystem, action: SymmetryAction, s: VelocityState) -> LieAlgebraVector:
    """𝒜(q, v) = 𝕀(q)⁻¹ J(q, M(q)v): the locked group velocity."""
    q = coords(sys, s.q)
    M = mass_matrix(sys, q)
    Xi = generator_matrix(action, q)
    if action.k == 0:
        return LieAlgebraVector(np.zeros(0))
    inertia = _locked_inertia(M, Xi, action.label)
    return LieAlgebraVector(np.linalg.solve(inertia, Xi.T @ (M @ s.v)))


def horizontal_vertical_split(
    sys: MechanicalSystem, action: SymmetryAction, s: VelocityState
) -> Tuple[np.ndarray, np.ndarray]:
    """v = v_hor + v_ver with v_ver = Σ 𝒜_a ξ_a(q) and J(q, M v_hor) = 0."""
    Xi = generator_matrix(action, coords(sys, s.q))
    xi = mechanical_connection(sys, action, s).xi
    v_ver = Xi @ xi
    v_hor = s.v - v_ver
    return v_hor, v_ver


def _lifted_generator_shift(generator: Generator, q: np.ndarray, v: np.ndarray, eps: float):
    """
    First-order flow of the tangent-lifted generator: (q + εξ, v + ε Dξ·v).

    The second-order error is even in ε, so a central difference built on it
    still measures the derivative along the true flow to O(ε²).
    """
    xi = np.array(generator(q), dtype=float)
    scale = max(1.0, float(np.linalg.norm(q)))
    eta = FD_DIRECTION_STEP * scale
    dxi_v = (np.array(generator(q + eta * v), dtype=float) - np.array(generator(q - eta * v), dtype=float)) / (2.0 * eta)
    return q + eps * xi, v + eps * dxi_v


def check_lagrangian_invariance(
    sys: MechanicalSystem, action: SymmetryAction, samples: Sequence[VelocityState]
) -> InvarianceReport:
    """
    Max |d/dε L(Φ_ε(q, v))| at ε = 0 over samples and generators, with Φ the
    tangent lift of each generator's flow. ≈ 0 for a genuine symmetry.
    """
    if not samples:
        raise ValueError("check_lagrangian_invariance needs at least one sample")

    per_generator = [0.0] * action.k
    for s in samples:
        q = coords(sys, s.q)
        for a, generator in enumerate(action.generators):
            eps = INVARIANCE_FD_STEP
            q_plus, v_plus = _lifted_generator_shift(generator, q, s.v, eps)
            q_minus, v_minus = _lifted_generator_shift(generator, q, s.v, -eps)
            derivative = (
                lagrangian(sys, VelocityState(q_plus, v_plus)) - lagrangian(sys, VelocityState(q_minus, v_minus))
            ) / (2.0 * eps)
            per_generator[a] = max(per_generator[a], abs(derivative))

    report = InvarianceReport(max(per_generator, default=0.0), per_generator, len(samples))
    logger.debug(f"Lagrangian invariance for {action.label}: max derivative {report.max_derivative:.3e}")
    return report


def check_generators_commute(action: SymmetryAction, q: np.ndarray) -> float:
    """Max ‖[ξ_a, ξ_b](q)‖ by central differences; [X, Y] = DY·X − DX·Y."""
    q = np.array(q, dtype=float)
    worst = 0.0

    def directional(g: Generator, direction: np.ndarray) -> np.ndarray:
        eta = fd_step(float(np.max(np.abs(q))) if q.size else 0.0)
        return (np.array(g(q + eta * direction), dtype=float) - np.array(g(q - eta * direction), dtype=float)) / (2.0 * eta)

    for a in range(action.k):
        for b in range(a + 1, action.k):
            xa = np.array(action.generators[a](q), dtype=float)
            xb = np.array(action.generators[b](q), dtype=float)
            bracket = directional(action.generators[b], xa) - directional(action.generators[a], xb)
            worst = max(worst, float(np.linalg.norm(bracket)))
    return worst


def shape_indices(action: SymmetryAction, n: int) -> List[int]:
    """Indices of the shape coordinates: the complement of the fiber coordinates."""
    if action.coordinate_indices is None:
        raise ShapeProjectionUnavailable(
            f"{action.label}: shape projection needs coordinate generators (coordinate_indices)"
        )
    fiber = set(action.coordinate_indices)
    return [i for i in range(n) if i not in fiber]


def shape_coordinates(action: SymmetryAction, q: np.ndarray) -> np.ndarray:
    """π(q) in the complementary coordinates."""
    q = np.asarray(q, dtype=float)
    return q[shape_indices(action, q.size)]


def shape_velocity(action: SymmetryAction, v: np.ndarray) -> np.ndarray:
    """Tπ(v) in the complementary coordinates."""
    v = np.asarray(v, dtype=float)
    return v[shape_indices(action, v.size)]


def group_shift(action: SymmetryAction, q: np.ndarray, shift: Sequence[float]) -> np.ndarray:
    """exp(Σ s_a ξ_a)·q for coordinate actions."""
    if action.coordinate_indices is None:
        raise ShapeProjectionUnavailable(f"{action.label}: finite group action needs coordinate generators")
    shifted = np.array(q, dtype=float)
    for index, s in zip(action.coordinate_indices, shift):
        shifted[index] += float(s)
    return shifted
