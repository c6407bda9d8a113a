"""
Hybrid executor: continuous Hamiltonian flow between impacts, elastic resets
on the guards.

Flow is classical fixed-step RK4 on a time grid anchored at t = 0 with spacing
dt. A guard fires when h changes sign in its configured direction between two
accepted steps; the crossing time is then bisected, re-integrating a single
RK4 step of shortened length from the start of the bracketing step, until
|h| <= event_tol. After an impact the flow restarts from the post state and the
first step is shortened so the samples land on the grid again.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from hbs.bundle import (
    LieAlgebraVector,
    MomentumValue,
    SymmetryAction,
    mechanical_connection,
    momentum_map,
)
from hbs.errors import (
    AmbiguousCrossing,
    GrazingImpact,
    NonFiniteInput,
    StepFailure,
)
from hbs.impact import (
    Crossing,
    Guard,
    ImpactOutcome,
    guard_value,
    normal_speed,
    resolve_impact_momentum,
)
from hbs.mechsys import MechanicalSystem, MomentumState, coords, legendre_to_velocity, vector_field
from hbs.models import IntegratorConfig

logger = logging.getLogger(__name__)

MAX_BISECTION = 40
GRID_SNAP = 1e-9

Sample = Tuple[float, MomentumState]


class Termination(str, Enum):
    TIME_END = "TimeEnd"
    ZENO_SUSPECTED = "ZenoSuspected"
    ERROR = "Error"


@dataclass(frozen=True)
class GuardCrossing:
    t_star: float
    state_minus: MomentumState
    guard_index: int


@dataclass(frozen=True)
class ImpactEvent:
    t_star: float
    outcome: ImpactOutcome
    guard_label: str
    momentum_pre: MomentumValue
    momentum_post: MomentumValue
    connection_pre: LieAlgebraVector
    connection_post: LieAlgebraVector
    guard_index: int = 0


@dataclass
class HybridTrajectory:
    segments: List[List[Sample]] = field(default_factory=list)
    events: List[ImpactEvent] = field(default_factory=list)
    termination: Termination = Termination.TIME_END
    error: Optional[str] = None
    config: Optional[IntegratorConfig] = None

    def sample_count(self) -> int:
        return sum(len(segment) for segment in self.segments)


def rk4_step(sys: MechanicalSystem, q: np.ndarray, p: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    try:
        k1q, k1p = vector_field(sys, q, p)
        k2q, k2p = vector_field(sys, q + 0.5 * h * k1q, p + 0.5 * h * k1p)
        k3q, k3p = vector_field(sys, q + 0.5 * h * k2q, p + 0.5 * h * k2p)
        k4q, k4p = vector_field(sys, q + h * k3q, p + h * k3p)
    except NonFiniteInput as e:
        raise StepFailure(f"{sys.name}: non-finite state during RK4 step: {e}")

    q_next = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    p_next = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    if not (np.all(np.isfinite(q_next)) and np.all(np.isfinite(p_next))):
        raise StepFailure(f"{sys.name}: RK4 step of {h:.3e} produced a non-finite state from q={q.tolist()}")
    return q_next, p_next


def _crossed(crossing: Crossing, h_prev: float, h_next: float) -> bool:
    down = h_prev > 0.0 and h_next <= 0.0
    up = h_prev < 0.0 and h_next >= 0.0
    if crossing is Crossing.DECREASING:
        return down
    if crossing is Crossing.INCREASING:
        return up
    return down or up


def _moving_through(crossing: Crossing, speed: float) -> bool:
    if crossing is Crossing.DECREASING:
        return speed < 0.0
    if crossing is Crossing.INCREASING:
        return speed > 0.0
    return speed != 0.0


def _escapes(crossing: Crossing, speed_pre: float, speed_post: float) -> bool:
    if crossing is Crossing.DECREASING:
        return speed_post > 0.0
    if crossing is Crossing.INCREASING:
        return speed_post < 0.0
    return speed_post * speed_pre < 0.0


def _next_grid_index(t: float, dt: float) -> int:
    return math.floor(t / dt + GRID_SNAP) + 1


def _localize(
    sys: MechanicalSystem,
    guard: Guard,
    q0: np.ndarray,
    p0: np.ndarray,
    t0: float,
    step: float,
    h0: float,
    event_tol: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Bisect the crossing inside [t0, t0 + step]; h0 = h at t0 fixes the pre-crossing side."""
    if abs(h0) <= event_tol:
        return t0, q0, p0

    pre_side = h0 > 0.0
    lo, hi = 0.0, step
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        qm, pm = rk4_step(sys, q0, p0, mid)
        hm = guard_value(guard, qm)
        if abs(hm) <= event_tol:
            return t0 + mid, qm, pm
        if (hm > 0.0) == pre_side:
            lo = mid
        else:
            hi = mid

    q_hi, p_hi = rk4_step(sys, q0, p0, hi)
    h_hi = guard_value(guard, q_hi)
    if abs(h_hi) <= event_tol:
        return t0 + hi, q_hi, p_hi
    raise StepFailure(
        f"{guard.label}: event localization did not reach |h| <= {event_tol:.1e} "
        f"after {MAX_BISECTION} bisections (|h| = {abs(h_hi):.3e} at t = {t0 + hi:.17g})"
    )


def flow_segment(
    sys: MechanicalSystem,
    guards: Sequence[Guard],
    s0: MomentumState,
    t0: float,
    config: IntegratorConfig,
    disarmed: FrozenSet[int] = frozenset(),
) -> Tuple[List[Sample], Optional[GuardCrossing]]:
    """
    Integrate from (t0, s0) until t_end or the first guard crossing.

    Returns the samples (first is (t0, s0); on a crossing the last is
    (t_star, state_minus)) and the crossing, if any. Guards in `disarmed` are
    ignored until the trajectory leaves their |h| <= event_tol band.
    """
    tol = config.event_tol
    q = coords(sys, s0.q).copy()
    p = s0.p.copy()
    t = float(t0)
    samples: List[Sample] = [(t, s0)]

    h_prev = [guard_value(g, q) for g in guards]
    armed = [i not in disarmed for i in range(len(guards))]
    for i, guard in enumerate(guards):
        if armed[i] and abs(h_prev[i]) <= tol:
            if _moving_through(guard.crossing, normal_speed(sys, guard, s0)):
                logger.debug(f"{guard.label}: segment starts on the guard moving through it at t={t:.17g}")
                return samples, GuardCrossing(t, s0, i)
            armed[i] = False

    while t < config.t_end:
        j = _next_grid_index(t, config.dt)
        t_next = j * config.dt
        if t_next >= config.t_end or config.t_end - t_next < GRID_SNAP * config.dt:
            t_next = config.t_end
        step = t_next - t
        q_next, p_next = rk4_step(sys, q, p, step)
        h_next = [guard_value(g, q_next) for g in guards]

        candidates = [
            i for i, guard in enumerate(guards)
            if armed[i] and _crossed(guard.crossing, h_prev[i], h_next[i])
        ]
        if candidates:
            located = []
            for i in candidates:
                if abs(h_next[i]) <= tol and abs(h_prev[i]) > tol:
                    located.append((t_next, q_next, p_next, i))
                else:
                    t_star, q_star, p_star = _localize(sys, guards[i], q, p, t, step, h_prev[i], tol)
                    located.append((t_star, q_star, p_star, i))
            located.sort(key=lambda item: item[0])
            if len(located) > 1 and located[1][0] - located[0][0] <= tol:
                labels = [guards[item[3]].label for item in located[:2]]
                raise AmbiguousCrossing(f"guards {labels} cross within {tol:.1e} of t = {located[0][0]:.17g}")

            t_star, q_star, p_star, index = located[0]
            state_minus = MomentumState(q_star, p_star)
            samples.append((t_star, state_minus))
            logger.debug(f"{guards[index].label}: crossing localized at t={t_star:.17g}")
            return samples, GuardCrossing(t_star, state_minus, index)

        t, q, p = t_next, q_next, p_next
        for i in range(len(guards)):
            if not armed[i] and abs(h_next[i]) > tol:
                armed[i] = True
        h_prev = h_next
        if j % config.sample_stride == 0 or t >= config.t_end:
            samples.append((t, MomentumState(q, p)))

    return samples, None


def _connection(sys: MechanicalSystem, action: Optional[SymmetryAction], s: MomentumState) -> LieAlgebraVector:
    if action is None or action.k == 0:
        return LieAlgebraVector(np.zeros(0))
    return mechanical_connection(sys, action, legendre_to_velocity(sys, s))


def _momentum(action: Optional[SymmetryAction], s: MomentumState) -> MomentumValue:
    if action is None or action.k == 0:
        return MomentumValue(np.zeros(0))
    return momentum_map(action, s)


def simulate_hybrid(
    sys: MechanicalSystem,
    action: Optional[SymmetryAction],
    guards: Sequence[Guard],
    s0: MomentumState,
    config: IntegratorConfig,
    t0: float = 0.0,
) -> HybridTrajectory:
    """
    Alternate flow_segment and resolve_impact_momentum until t_end.

    Halts with ZenoSuspected after max_impacts impacts or when two impacts are
    closer than min_impact_separation; grazing contacts end the run with Error.
    """
    trajectory = HybridTrajectory(config=config)
    state = s0
    t = t0
    disarmed: FrozenSet[int] = frozenset()
    logger.info(f"Simulating {sys.name} with {len(guards)} guard(s) from t={t0:g} to t={config.t_end:g}")

    while True:
        samples, crossing = flow_segment(sys, guards, state, t, config, disarmed)
        trajectory.segments.append(samples)
        if crossing is None:
            trajectory.termination = Termination.TIME_END
            break

        guard = guards[crossing.guard_index]
        pre = crossing.state_minus
        try:
            outcome = resolve_impact_momentum(sys, guard, pre, event_tol=config.event_tol)
            speed_pre = normal_speed(sys, guard, pre)
            speed_post = normal_speed(sys, guard, outcome.post)
            if not _escapes(guard.crossing, speed_pre, speed_post):
                raise GrazingImpact(
                    f"{guard.label}: post-impact state does not leave the guard (ḣ⁺ = {speed_post:.3e}) "
                    f"at t = {crossing.t_star:.17g}"
                )
        except GrazingImpact as e:
            logger.error(f"Impact failed at t={crossing.t_star:.17g}: {e}")
            trajectory.termination = Termination.ERROR
            trajectory.error = str(e)
            break

        event = ImpactEvent(
            t_star=crossing.t_star,
            outcome=outcome,
            guard_label=guard.label,
            momentum_pre=_momentum(action, pre),
            momentum_post=_momentum(action, outcome.post),
            connection_pre=_connection(sys, action, pre),
            connection_post=_connection(sys, action, outcome.post),
            guard_index=crossing.guard_index,
        )
        trajectory.events.append(event)
        logger.info(
            f"Impact {len(trajectory.events)} on {guard.label} at t={event.t_star:.10g}, α={outcome.alpha:.6g}"
        )

        too_close = (
            len(trajectory.events) >= 2
            and event.t_star - trajectory.events[-2].t_star < config.min_impact_separation
        )
        if too_close or len(trajectory.events) >= config.max_impacts:
            trajectory.segments.append([(event.t_star, outcome.post)])
            trajectory.termination = Termination.ZENO_SUSPECTED
            reason = "impacts closer than min_impact_separation" if too_close else "max_impacts reached"
            logger.warning(f"Zeno suspected at t={event.t_star:.10g}: {reason}")
            break

        state = outcome.post
        t = event.t_star
        disarmed = frozenset({crossing.guard_index})

    logger.info(
        f"Simulation ended with {trajectory.termination.value} after {len(trajectory.events)} impact(s)"
    )
    return trajectory
