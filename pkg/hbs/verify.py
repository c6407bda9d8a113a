"""
Numerical checks of the structural properties of impacts on principal bundles.

- impact_invariants: energy and momentum jumps and the connection verdict
  (Preserved, Reversed or Other) at every event.
- shape_velocity_check: Tπ(v⁺) against Tπ(v⁻).
- symplectic_pullback_check: Δ̃*ω = ω|_S in surface-adapted coordinates, plus
  kinetic-energy (metric) preservation.
- noether_report: momentum-map drift along segments and jumps at events.
- hybrid_action_check: G-invariance of the guard and equivariance of the impact
  map for coordinate actions.

The action-form identity (Id × Δ̃)*ϑ_H = i*ϑ_H reduces in guard-adapted
coordinates to H⁺ = H⁻ plus unchanged tangential momenta, which is what the
energy and tangential-momentum figures below measure.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hbs.bundle import (
    SymmetryAction,
    group_shift,
    mechanical_connection,
    momentum_map,
    shape_velocity,
)
from hbs.errors import DegenerateGradient
from hbs.hybridflow import HybridTrajectory, ImpactEvent
from hbs.impact import (
    DEFAULT_EVENT_TOL,
    Guard,
    guard_gradient,
    guard_value,
    resolve_impact_momentum,
)
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    coords,
    legendre_to_velocity,
    momentum_kinetic_energy,
)

logger = logging.getLogger(__name__)

VERDICT_RTOL = 1e-9
NOETHER_TOL = 1e-9
FRAME_TOL = 1e-6
SURFACE_NEWTON_ITER = 50


class ConnectionVerdict(str, Enum):
    PRESERVED = "Preserved"
    REVERSED = "Reversed"
    OTHER = "Other"


@dataclass
class EventInvariants:
    t_star: float
    guard_label: str
    alpha: float
    delta_h: float
    delta_mu: np.ndarray
    connection_pre: np.ndarray
    connection_post: np.ndarray
    verdict: ConnectionVerdict
    shape_velocity_delta: Optional[float] = None


@dataclass
class ImpactInvariantReport:
    events: List[EventInvariants] = field(default_factory=list)

    @property
    def verdicts(self) -> List[ConnectionVerdict]:
        return [e.verdict for e in self.events]

    @property
    def max_abs_delta_h(self) -> float:
        return max((abs(e.delta_h) for e in self.events), default=0.0)

    @property
    def max_abs_delta_mu(self) -> float:
        return max((float(np.max(np.abs(e.delta_mu))) for e in self.events if e.delta_mu.size), default=0.0)


@dataclass
class PullbackReport:
    labels: List[str]
    jacobian: np.ndarray
    form_deviation: float
    kinetic_deviation: float
    tangential_momentum_deviation: float


@dataclass
class NoetherReport:
    max_segment_drift: float
    event_jumps: List[np.ndarray]
    levels: List[Tuple[np.ndarray, np.ndarray]]

    @property
    def max_event_jump(self) -> float:
        return max((float(np.max(np.abs(j))) for j in self.event_jumps if j.size), default=0.0)

    @property
    def hybrid_constant(self) -> bool:
        return self.max_segment_drift <= NOETHER_TOL and self.max_event_jump <= NOETHER_TOL


@dataclass
class HybridActionReport:
    max_surface_offset: float
    max_equivariance_deviation: Optional[float]
    surface_invariant: bool


def connection_verdict(a_pre: np.ndarray, a_post: np.ndarray) -> ConnectionVerdict:
    vtol = VERDICT_RTOL * max(1.0, float(np.linalg.norm(a_pre)))
    if np.linalg.norm(a_post - a_pre) <= vtol:
        return ConnectionVerdict.PRESERVED
    if np.linalg.norm(a_post + a_pre) <= vtol:
        return ConnectionVerdict.REVERSED
    return ConnectionVerdict.OTHER


def _event_velocities(sys: MechanicalSystem, event: ImpactEvent) -> Tuple[np.ndarray, np.ndarray]:
    v_pre = legendre_to_velocity(sys, event.outcome.pre).v
    v_post = legendre_to_velocity(sys, event.outcome.post).v
    return v_pre, v_post


def shape_velocity_check(event: ImpactEvent, sys: MechanicalSystem, action: SymmetryAction) -> float:
    """max |Tπ(v⁺) − Tπ(v⁻)| over the shape coordinates."""
    v_pre, v_post = _event_velocities(sys, event)
    delta = shape_velocity(action, v_post) - shape_velocity(action, v_pre)
    return float(np.max(np.abs(delta))) if delta.size else 0.0


def impact_invariants(
    traj: HybridTrajectory, sys: MechanicalSystem, action: SymmetryAction
) -> ImpactInvariantReport:
    report = ImpactInvariantReport()
    for event in traj.events:
        pre, post = event.outcome.pre, event.outcome.post
        a_pre = mechanical_connection(sys, action, legendre_to_velocity(sys, pre)).xi
        a_post = mechanical_connection(sys, action, legendre_to_velocity(sys, post)).xi
        delta_mu = momentum_map(action, post).mu - momentum_map(action, pre).mu

        shape_delta = None
        if action.coordinate_indices is not None:
            shape_delta = shape_velocity_check(event, sys, action)

        report.events.append(EventInvariants(
            t_star=event.t_star,
            guard_label=event.guard_label,
            alpha=event.outcome.alpha,
            delta_h=event.outcome.energy_post - event.outcome.energy_pre,
            delta_mu=delta_mu,
            connection_pre=a_pre,
            connection_post=a_post,
            verdict=connection_verdict(a_pre, a_post),
            shape_velocity_delta=shape_delta,
        ))

    logger.info(f"Impact invariants over {len(report.events)} event(s): {[v.value for v in report.verdicts]}")
    return report


def adapted_frame(grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit normal n̂ = ∇h/‖∇h‖ and an orthonormal tangent basis T (n×(n−1)),
    completed by Gram–Schmidt against e_1, ..., e_n in order.
    """
    norm = np.linalg.norm(grad)
    if norm < 1e-10:
        raise DegenerateGradient(f"cannot build an adapted frame, ‖∇h‖ = {norm:.3e}")
    normal = grad / norm
    basis = [normal]
    n = grad.size
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        for b in basis:
            e = e - float(b @ e) * b
        e_norm = np.linalg.norm(e)
        if e_norm > FRAME_TOL:
            basis.append(e / e_norm)
        if len(basis) == n:
            break
    return normal, np.column_stack(basis[1:]) if n > 1 else np.zeros((n, 0))


def _surface_point(guard: Guard, q0: np.ndarray, normal: np.ndarray, tangents: np.ndarray, s: np.ndarray) -> np.ndarray:
    """q(s) = q0 + T s + λ(s) n̂ with h(q(s)) = 0, λ by Newton."""
    base = q0 + tangents @ s
    lam = 0.0
    for _ in range(SURFACE_NEWTON_ITER):
        q = base + lam * normal
        h = guard_value(guard, q)
        slope = float(guard_gradient(guard, q) @ normal)
        if slope == 0.0:
            raise DegenerateGradient(f"{guard.label}: guard gradient orthogonal to the frame normal")
        delta = h / slope
        lam -= delta
        if abs(delta) <= 1e-16 * max(1.0, abs(lam)):
            break
    return base + lam * normal


def symplectic_pullback_check(
    sys: MechanicalSystem,
    guard: Guard,
    q,
    p: Sequence[float],
    fd_step: float = 1e-5,
    event_tol: float = DEFAULT_EVENT_TOL,
) -> PullbackReport:
    """
    Central-difference Jacobian of (s, p) ↦ (s, p⁺) in adapted coordinates
    (n−1 surface parameters s, n momenta) and the deviation of its pullback of
    ω|_S = Σ dq^i ∧ dp_i from ω|_S itself.
    """
    q0 = coords(sys, q)
    p0 = np.array(p, dtype=float)
    n = sys.n
    normal, tangents = adapted_frame(guard_gradient(guard, q0))
    m = n - 1
    dim = m + n

    def impact_map(z: np.ndarray) -> Tuple[np.ndarray, float]:
        qs = _surface_point(guard, q0, normal, tangents, z[:m])
        outcome = resolve_impact_momentum(sys, guard, MomentumState(qs, z[m:]), event_tol=event_tol)
        kinetic = abs(
            momentum_kinetic_energy(sys, qs, outcome.post.p) - momentum_kinetic_energy(sys, qs, outcome.pre.p)
        )
        return np.concatenate([z[:m], outcome.post.p]), kinetic

    z0 = np.concatenate([np.zeros(m), p0])
    image0, kinetic_deviation = impact_map(z0)
    jacobian = np.zeros((dim, dim))
    for c in range(dim):
        step = fd_step * max(1.0, abs(z0[c]))
        dz = np.zeros(dim)
        dz[c] = step
        plus, k_plus = impact_map(z0 + dz)
        minus, k_minus = impact_map(z0 - dz)
        jacobian[:, c] = (plus - minus) / (2.0 * step)
        kinetic_deviation = max(kinetic_deviation, k_plus, k_minus)

    # ω|_S in (s, p): dq = T ds at s = 0 because T ⟂ ∇h.
    form = np.zeros((dim, dim))
    form[:m, m:] = tangents.T
    form[m:, :m] = -tangents

    pulled_back = jacobian.T @ form @ jacobian
    form_deviation = float(np.max(np.abs(pulled_back - form)))
    tangential = float(np.max(np.abs(tangents.T @ (image0[m:] - p0)))) if m else 0.0

    labels = [f"s_{j + 1}" for j in range(m)] + [f"p_{i + 1}" for i in range(n)]
    logger.debug(
        f"{guard.label}: pullback deviation {form_deviation:.3e}, kinetic {kinetic_deviation:.3e} at fd_step {fd_step:g}"
    )
    return PullbackReport(
        labels=labels,
        jacobian=jacobian,
        form_deviation=form_deviation,
        kinetic_deviation=float(kinetic_deviation),
        tangential_momentum_deviation=tangential,
    )


def noether_report(traj: HybridTrajectory, sys: MechanicalSystem, action: SymmetryAction) -> NoetherReport:
    """Segment-wise drift of J and its level pairs (μ⁻, μ⁺) at every event."""
    drift = 0.0
    for segment in traj.segments:
        if not segment:
            continue
        mu0 = momentum_map(action, segment[0][1]).mu
        for _, state in segment[1:]:
            mu = momentum_map(action, state).mu
            if mu.size:
                drift = max(drift, float(np.max(np.abs(mu - mu0))))

    jumps = []
    levels = []
    for event in traj.events:
        mu_pre = momentum_map(action, event.outcome.pre).mu
        mu_post = momentum_map(action, event.outcome.post).mu
        jumps.append(mu_post - mu_pre)
        levels.append((mu_pre, mu_post))

    report = NoetherReport(max_segment_drift=drift, event_jumps=jumps, levels=levels)
    logger.info(
        f"Noether: segment drift {report.max_segment_drift:.3e}, max event jump {report.max_event_jump:.3e}"
    )
    return report


def hybrid_action_check(
    sys: MechanicalSystem,
    action: SymmetryAction,
    guard: Guard,
    states: Sequence[MomentumState],
    shifts: Sequence[Sequence[float]],
    event_tol: float = DEFAULT_EVENT_TOL,
) -> HybridActionReport:
    """
    For coordinate actions: does g·S = S, and does Δ̃(g·x) = g·Δ̃(x)?

    The cotangent lift of a coordinate translation leaves p unchanged, so
    equivariance compares the post momenta at x and at g·x. It is only
    evaluated when the shifted points stay on S.
    """
    offset = 0.0
    deviation = 0.0
    for state in states:
        base = resolve_impact_momentum(sys, guard, state, event_tol=event_tol)
        for shift in shifts:
            q_shifted = group_shift(action, state.q.q, shift)
            offset = max(offset, abs(guard_value(guard, q_shifted)))
            if offset > event_tol:
                continue
            shifted = resolve_impact_momentum(sys, guard, MomentumState(q_shifted, state.p), event_tol=event_tol)
            deviation = max(deviation, float(np.max(np.abs(shifted.post.p - base.post.p))))

    invariant = offset <= event_tol
    return HybridActionReport(
        max_surface_offset=offset,
        max_equivariance_deviation=deviation if invariant else None,
        surface_invariant=invariant,
    )
