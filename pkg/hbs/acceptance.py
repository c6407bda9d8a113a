"""
Built-in verification suite for one configured system, symmetry and guard set.

Each check is a CheckRecord (name, passed, value, threshold). The suite runs
the hybrid simulation, then checks the corner conditions at every impact,
classifies every guard and asserts the consequences of the classification
(vertical ⇒ connection preserved and momentum map unchanged, horizontal with a
one-dimensional group ⇒ connection reversed and shape velocity unchanged), and
finally checks the symplectic pullback at the impact states.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hbs.bundle import SymmetryAction
from hbs.hybridflow import HybridTrajectory, Termination, simulate_hybrid
from hbs.impact import (
    CLASS_TOL,
    Guard,
    GuardClass,
    GuardClassKind,
    classify_guard,
    guard_gradient,
    guard_value,
    surface_samples,
)
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    legendre_to_momentum,
    legendre_to_velocity,
)
from hbs.models import CheckRecord, IntegratorConfig
from hbs.verify import (
    ConnectionVerdict,
    impact_invariants,
    noether_report,
    symplectic_pullback_check,
)

logger = logging.getLogger(__name__)

CORNER_TOL = 1e-10
LEGENDRE_RTOL = 1e-12
MOMENTUM_JUMP_TOL = 1e-9
SHAPE_VELOCITY_TOL = 1e-9
PULLBACK_FD_STEP = 1e-5
PULLBACK_TOL = 1e-6
KINETIC_TOL = 1e-10
MAX_PULLBACK_EVENTS = 20


def _check(name: str, value: float, threshold: float, detail: str = "") -> CheckRecord:
    passed = bool(np.isfinite(value) and value <= threshold)
    record = CheckRecord(name=name, passed=passed, value=float(value), threshold=float(threshold), detail=detail)
    log = logger.info if passed else logger.warning
    log(f"check {name}: {'PASS' if passed else 'FAIL'} ({value:.3e} <= {threshold:.1e}) {detail}".rstrip())
    return record


def surface_seeds(sys: MechanicalSystem, count: int, q0: np.ndarray) -> List[np.ndarray]:
    """
    Deterministic seeds for guard sampling: θ-grid for pendulum-cart, otherwise
    a staggered grid of offsets in [−π, π) around q0 per coordinate.
    """
    from hbs.systems import pendulum_cart_surface_seeds

    if sys.name == "pendulum-cart":
        return pendulum_cart_surface_seeds(count, x=float(q0[1]))
    seeds = []
    for k in range(count):
        offsets = [-np.pi + 2.0 * np.pi * (((k * (2 * i + 1)) % count) + 0.5) / count for i in range(sys.n)]
        seeds.append(np.asarray(q0, dtype=float) + np.array(offsets))
    return seeds


def classify_guards(
    sys: MechanicalSystem,
    action: SymmetryAction,
    guards: Sequence[Guard],
    q0: np.ndarray,
    count: int = 16,
    class_tol: float = CLASS_TOL,
) -> List[GuardClass]:
    seeds = surface_seeds(sys, count, q0)
    return [classify_guard(sys, action, guard, surface_samples(guard, seeds), class_tol) for guard in guards]


def corner_condition_checks(
    sys: MechanicalSystem, guards: Sequence[Guard], traj: HybridTrajectory, event_tol: float
) -> List[CheckRecord]:
    energy = 0.0
    perpendicular = 0.0
    localization = 0.0
    legendre = 0.0
    for event in traj.events:
        outcome = event.outcome
        guard = guards[event.guard_index]
        q = outcome.pre.q.q
        energy = max(energy, abs(outcome.energy_post - outcome.energy_pre) / max(1.0, abs(outcome.energy_pre)))

        jump = outcome.post.p - outcome.pre.p
        grad = guard_gradient(guard, q)
        along = float(jump @ grad) / float(grad @ grad) * grad
        perpendicular = max(perpendicular, float(np.linalg.norm(jump - along)) / max(float(np.linalg.norm(jump)), 1e-300))
        localization = max(localization, abs(guard_value(guard, q)))

        for state in (outcome.pre, outcome.post):
            back = legendre_to_momentum(sys, legendre_to_velocity(sys, state)).p
            legendre = max(legendre, float(np.max(np.abs(back - state.p))) / max(1.0, float(np.max(np.abs(state.p)))))

    detail = f"{len(traj.events)} event(s)"
    return [
        _check("corner_energy", energy, CORNER_TOL, detail),
        _check("corner_perpendicular", perpendicular, CORNER_TOL, detail),
        _check("event_localization", localization, event_tol, detail),
        _check("legendre_roundtrip", legendre, LEGENDRE_RTOL, detail),
    ]


def event_order_check(traj: HybridTrajectory, config: IntegratorConfig) -> CheckRecord:
    times = [e.t_star for e in traj.events]
    gaps = [b - a for a, b in zip(times, times[1:])]
    if traj.termination is Termination.ZENO_SUSPECTED and gaps:
        gaps = gaps[:-1]
    shortfall = max((config.min_impact_separation - g for g in gaps), default=-1.0)
    return _check("event_order", max(shortfall, 0.0) if gaps and shortfall > 0 else 0.0, 0.0,
                  f"{len(times)} event time(s)")


def classification_checks(
    sys: MechanicalSystem,
    action: SymmetryAction,
    guards: Sequence[Guard],
    classes: Sequence[GuardClass],
    traj: HybridTrajectory,
) -> List[CheckRecord]:
    records = []
    invariants = impact_invariants(traj, sys, action)
    noether = noether_report(traj, sys, action)

    for index, (guard, guard_class) in enumerate(zip(guards, classes)):
        on_guard = [
            (event, inv) for event, inv in zip(traj.events, invariants.events) if event.guard_index == index
        ]
        if guard_class.kind is GuardClassKind.VERTICAL:
            not_preserved = sum(inv.verdict is not ConnectionVerdict.PRESERVED for _, inv in on_guard)
            records.append(_check(f"vertical_preserved[{guard.label}]", float(not_preserved), 0.0,
                                  f"{len(on_guard)} event(s)"))
            jump = max(
                (float(np.max(np.abs(inv.delta_mu))) / max(1.0, float(np.max(np.abs(event.momentum_pre.mu))))
                 for event, inv in on_guard if inv.delta_mu.size),
                default=0.0,
            )
            records.append(_check(f"vertical_momentum_jump[{guard.label}]", jump, MOMENTUM_JUMP_TOL))
            records.append(_check(f"noether_drift[{guard.label}]", noether.max_segment_drift, MOMENTUM_JUMP_TOL))
        elif guard_class.kind is GuardClassKind.HORIZONTAL and action.k == 1:
            not_reversed = sum(inv.verdict is not ConnectionVerdict.REVERSED for _, inv in on_guard)
            records.append(_check(f"horizontal_reversed[{guard.label}]", float(not_reversed), 0.0,
                                  f"{len(on_guard)} event(s)"))
            if action.coordinate_indices is not None:
                shape = max((inv.shape_velocity_delta or 0.0 for _, inv in on_guard), default=0.0)
                records.append(_check(f"horizontal_shape_velocity[{guard.label}]", shape, SHAPE_VELOCITY_TOL))
    return records


def pullback_checks(
    sys: MechanicalSystem, guards: Sequence[Guard], traj: HybridTrajectory, event_tol: float
) -> List[CheckRecord]:
    form = 0.0
    kinetic = 0.0
    events = traj.events[:MAX_PULLBACK_EVENTS]
    for event in events:
        pre = event.outcome.pre
        report = symplectic_pullback_check(
            sys, guards[event.guard_index], pre.q, pre.p, fd_step=PULLBACK_FD_STEP, event_tol=event_tol
        )
        form = max(form, report.form_deviation)
        kinetic = max(kinetic, report.kinetic_deviation)
    detail = f"{len(events)} event(s), fd_step {PULLBACK_FD_STEP:g}"
    return [
        _check("symplectic_pullback", form, PULLBACK_TOL, detail),
        _check("metric_pullback", kinetic, KINETIC_TOL, detail),
    ]


def run_suite(
    sys: MechanicalSystem,
    action: Optional[SymmetryAction],
    guards: Sequence[Guard],
    s0: MomentumState,
    config: IntegratorConfig,
    samples: int = 16,
    class_tol: float = CLASS_TOL,
) -> Tuple[HybridTrajectory, List[GuardClass], List[CheckRecord]]:
    """Simulate, classify and check; returns the trajectory, guard classes and check records."""
    logger.info(f"Running verification suite for {sys.name} with {len(guards)} guard(s)")
    traj = simulate_hybrid(sys, action, guards, s0, config)

    records = [_check("termination", 1.0 if traj.termination is Termination.ERROR else 0.0, 0.0,
                      traj.termination.value)]
    records.extend(corner_condition_checks(sys, guards, traj, config.event_tol))
    records.append(event_order_check(traj, config))

    classes: List[GuardClass] = []
    if action is not None and action.k > 0:
        classes = classify_guards(sys, action, guards, s0.q.q, samples, class_tol)
        records.extend(classification_checks(sys, action, guards, classes, traj))

    records.extend(pullback_checks(sys, guards, traj, config.event_tol))
    passed = all(r.passed for r in records)
    logger.info(f"Suite {'passed' if passed else 'FAILED'}: {sum(r.passed for r in records)}/{len(records)} checks")
    return traj, classes, records
