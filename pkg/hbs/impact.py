"""
Guards, elastic impacts and guard classification.

An impact at q ∈ S = {h = 0} keeps q and jumps the momentum along the conormal,
p⁺ = p⁻ + α∇h, with H⁺ = H⁻. Since q is fixed the potential cancels and energy
conservation is the quadratic

    α²(∇hᵀM⁻¹∇h) + 2α(∇hᵀM⁻¹p⁻) = 0,

whose nonzero root α = −2(∇hᵀM⁻¹p⁻)/(∇hᵀM⁻¹∇h) is the reflection. The α = 0
root (no impact) is never returned.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from hbs.bundle import SymmetryAction, generator_matrix
from hbs.errors import (
    DegenerateGradient,
    GrazingImpact,
    InconsistentSamples,
    OffSurface,
)
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    VelocityState,
    coords,
    fd_step,
    hamiltonian,
    legendre_to_momentum,
    legendre_to_velocity,
    mass_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_EVENT_TOL = 1e-10
GRAZING_TOL = 1e-8
CLASS_TOL = 1e-8
MIN_GRADIENT_NORM = 1e-10
SAMPLE_TOL = 1e-8
PROJECTION_MAX_ITER = 50
DUPLICATE_SAMPLE_TOL = 1e-9


class Crossing(str, Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"
    BOTH = "both"


class GuardClassKind(str, Enum):
    VERTICAL = "Vertical"
    HORIZONTAL = "Horizontal"
    NEITHER = "Neither"


@dataclass(frozen=True)
class Guard:
    """
    Switching surface S = {q : h(q) = 0} on configuration space.

    `exterior` is declared metadata (π(S) is the whole shape space); it is a
    global property that cannot be decided from samples.
    """
    h: Callable[[np.ndarray], float]
    grad_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    crossing: Crossing = Crossing.BOTH
    label: str = "guard"
    exterior: Optional[bool] = None


@dataclass(frozen=True)
class ImpactOutcome:
    alpha: float
    pre: MomentumState
    post: MomentumState
    energy_pre: float
    energy_post: float


@dataclass
class GuardClass:
    kind: GuardClassKind
    max_vertical_residual: float
    max_horizontal_residual: float
    vertical_residuals: List[float] = field(default_factory=list)
    horizontal_residuals: List[float] = field(default_factory=list)
    consistent: bool = True
    samples: int = 0


def guard_value(guard: Guard, q: np.ndarray) -> float:
    return float(guard.h(np.asarray(q, dtype=float)))


def guard_gradient(guard: Guard, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if guard.grad_h is not None:
        return np.array(guard.grad_h(q), dtype=float).reshape(q.size)

    grad = np.zeros(q.size)
    for i in range(q.size):
        step = fd_step(q[i])
        dq = np.zeros(q.size)
        dq[i] = step
        grad[i] = (float(guard.h(q + dq)) - float(guard.h(q - dq))) / (2.0 * step)
    return grad


def coordinate_guard(
    index: int,
    value: float,
    crossing: Crossing = Crossing.BOTH,
    label: Optional[str] = None,
    exterior: Optional[bool] = None,
) -> Guard:
    """h(q) = q[index] − value."""
    def h(q: np.ndarray) -> float:
        return float(q[index] - value)

    def grad_h(q: np.ndarray) -> np.ndarray:
        g = np.zeros(q.size)
        g[index] = 1.0
        return g

    return Guard(
        h=h,
        grad_h=grad_h,
        crossing=Crossing(crossing),
        label=label or f"q[{index}]={value:g}",
        exterior=exterior,
    )


def _checked_gradient(guard: Guard, q: np.ndarray) -> np.ndarray:
    grad = guard_gradient(guard, q)
    if not np.all(np.isfinite(grad)) or np.linalg.norm(grad) < MIN_GRADIENT_NORM:
        raise DegenerateGradient(f"{guard.label}: ‖∇h‖ = {np.linalg.norm(grad):.3e} at q={q.tolist()}")
    return grad


def normal_speed(sys: MechanicalSystem, guard: Guard, s: MomentumState) -> float:
    """ḣ = ∇h(q)ᵀ M(q)⁻¹ p."""
    q = coords(sys, s.q)
    return float(guard_gradient(guard, q) @ np.linalg.solve(mass_matrix(sys, q), s.p))


def resolve_impact_momentum(
    sys: MechanicalSystem,
    guard: Guard,
    s: MomentumState,
    event_tol: float = DEFAULT_EVENT_TOL,
    grazing_tol: float = GRAZING_TOL,
) -> ImpactOutcome:
    """Elastic impact on the momentum side: p⁺ = p⁻ + α∇h, H⁺ = H⁻."""
    q = coords(sys, s.q)
    h = guard_value(guard, q)
    if abs(h) > event_tol:
        raise OffSurface(f"{guard.label}: |h| = {abs(h):.3e} > {event_tol:.1e} at q={q.tolist()}")
    grad = _checked_gradient(guard, q)

    M = mass_matrix(sys, q)
    minv_grad = np.linalg.solve(M, grad)
    speed = float(grad @ np.linalg.solve(M, s.p))
    # p = 0 has only the trivial root α = 0
    if abs(speed) <= grazing_tol * np.linalg.norm(grad) * np.linalg.norm(s.p):
        raise GrazingImpact(
            f"{guard.label}: grazing contact, ∇hᵀM⁻¹p = {speed:.3e} at q={q.tolist()}, p={s.p.tolist()}"
        )

    alpha = -2.0 * speed / float(grad @ minv_grad)
    post = MomentumState(s.q, s.p + alpha * grad)
    outcome = ImpactOutcome(
        alpha=alpha,
        pre=s,
        post=post,
        energy_pre=hamiltonian(sys, s),
        energy_post=hamiltonian(sys, post),
    )
    logger.debug(f"{guard.label}: impact α={alpha:.6g}, p⁻={s.p.tolist()} -> p⁺={post.p.tolist()}")
    return outcome


def resolve_impact_velocity(
    sys: MechanicalSystem,
    guard: Guard,
    s: VelocityState,
    event_tol: float = DEFAULT_EVENT_TOL,
    grazing_tol: float = GRAZING_TOL,
) -> Tuple[VelocityState, float]:
    """Velocity-side impact: FL⁻¹ ∘ Δ̃ ∘ FL."""
    outcome = resolve_impact_momentum(sys, guard, legendre_to_momentum(sys, s), event_tol, grazing_tol)
    return legendre_to_velocity(sys, outcome.post), outcome.alpha


def project_to_surface(guard: Guard, q: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Newton projection q ← q − h∇h/‖∇h‖² onto S."""
    q = np.array(q, dtype=float)
    for _ in range(PROJECTION_MAX_ITER):
        h = guard_value(guard, q)
        if abs(h) <= tol:
            return q
        grad = _checked_gradient(guard, q)
        q = q - h * grad / float(grad @ grad)
    if abs(guard_value(guard, q)) > SAMPLE_TOL:
        raise OffSurface(f"{guard.label}: projection did not converge, |h| = {abs(guard_value(guard, q)):.3e}")
    return q


def surface_samples(guard: Guard, seeds: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Project each seed onto S; seeds landing on an earlier sample are dropped."""
    samples: List[np.ndarray] = []
    for seed in seeds:
        q = project_to_surface(guard, seed)
        if all(np.linalg.norm(q - other) > DUPLICATE_SAMPLE_TOL for other in samples):
            samples.append(q)
    return samples


def classify_guard(
    sys: MechanicalSystem,
    action: SymmetryAction,
    guard: Guard,
    samples: Sequence[np.ndarray],
    class_tol: float = CLASS_TOL,
    strict: bool = False,
) -> GuardClass:
    """
    Vertical: dh(ξ_a) = 0 at every sample (infinitesimal G-invariance of S).
    Horizontal: the metric normal M⁻¹∇h lies in span{ξ_a} at every sample.
    Samples that disagree make the surface Neither, flagged inconsistent;
    with `strict` that raises InconsistentSamples instead.
    """
    if not samples:
        raise InconsistentSamples(f"{guard.label}: no samples to classify")
    if action.k >= sys.n:
        logger.warning(f"{guard.label}: group dimension {action.k} >= {sys.n}, so span ξ covers every normal")

    vertical_residuals = []
    horizontal_residuals = []
    for sample in samples:
        q = coords(sys, sample)
        h = guard_value(guard, q)
        if abs(h) > SAMPLE_TOL:
            raise OffSurface(f"{guard.label}: sample has |h| = {abs(h):.3e} > {SAMPLE_TOL:.0e}")
        grad = _checked_gradient(guard, q)
        Xi = generator_matrix(action, q)

        grad_norm = np.linalg.norm(grad)
        vertical = 0.0
        for a in range(action.k):
            xi = Xi[:, a]
            vertical = max(vertical, abs(float(grad @ xi)) / (grad_norm * np.linalg.norm(xi)))
        vertical_residuals.append(vertical)

        metric_normal = np.linalg.solve(mass_matrix(sys, q), grad)
        if action.k:
            coeffs = np.linalg.lstsq(Xi, metric_normal, rcond=None)[0]
            residual = metric_normal - Xi @ coeffs
        else:
            residual = metric_normal
        horizontal_residuals.append(float(np.linalg.norm(residual) / np.linalg.norm(metric_normal)))

    is_vertical = [r <= class_tol for r in vertical_residuals]
    is_horizontal = [r <= class_tol for r in horizontal_residuals]
    if any(v and hz for v, hz in zip(is_vertical, is_horizontal)):
        raise InconsistentSamples(
            f"{guard.label}: a sample is both vertical and horizontal, which needs k = n"
        )

    consistent = True
    if all(is_vertical):
        kind = GuardClassKind.VERTICAL
    elif all(is_horizontal):
        kind = GuardClassKind.HORIZONTAL
    else:
        kind = GuardClassKind.NEITHER
        consistent = not any(is_vertical) and not any(is_horizontal)

    if not consistent:
        message = (
            f"{guard.label}: samples disagree ({sum(is_vertical)} vertical, "
            f"{sum(is_horizontal)} horizontal of {len(samples)})"
        )
        if strict:
            raise InconsistentSamples(message)
        logger.warning(message)

    result = GuardClass(
        kind=kind,
        max_vertical_residual=max(vertical_residuals),
        max_horizontal_residual=max(horizontal_residuals),
        vertical_residuals=vertical_residuals,
        horizontal_residuals=horizontal_residuals,
        consistent=consistent,
        samples=len(samples),
    )
    logger.info(f"{guard.label}: classified {kind.value} over {len(samples)} samples")
    return result


def impact_kind(guard: Guard, guard_class: GuardClass) -> str:
    """interior for vertical guards, exterior when declared, else unspecified."""
    if guard_class.kind is GuardClassKind.VERTICAL:
        return "interior"
    if guard.exterior:
        return "exterior"
    return "unspecified"
