#!/usr/bin/env python3
"""
Tests for hbs.verify and hbs.acceptance: invariants at impacts, symplectic
pullback, Noether levels, hybrid action and the built-in suite.
Run with pytest, or directly: python test_verify.py
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hbs.acceptance import run_suite
from hbs.bundle import coordinate_action, mechanical_connection, momentum_map
from hbs.hybridflow import HybridTrajectory, ImpactEvent, simulate_hybrid
from hbs.impact import Guard, coordinate_guard, project_to_surface, resolve_impact_momentum
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    VelocityState,
    legendre_to_momentum,
    legendre_to_velocity,
)
from hbs.models import IntegratorConfig
from hbs.systems import (
    default_action,
    free_particle_2d,
    pendulum_cart,
    pendulum_cart_exterior_guard,
    pendulum_cart_horizontal_guard,
    pendulum_cart_interior_guard,
)
from hbs.verify import (
    ConnectionVerdict,
    adapted_frame,
    connection_verdict,
    hybrid_action_check,
    impact_invariants,
    noether_report,
    shape_velocity_check,
    symplectic_pullback_check,
)


def ellipsoid_system() -> MechanicalSystem:
    return MechanicalSystem(
        "diagonal-3d",
        3,
        mass_matrix=lambda q: np.diag([1.0, 2.0, 3.0]),
        potential=lambda q: 0.0,
        potential_gradient=lambda q: np.zeros(3),
        mass_matrix_derivative=lambda q: [np.zeros((3, 3))] * 3,
    )


def sphere_guard() -> Guard:
    return Guard(h=lambda q: float(q @ q - 1.0), grad_h=lambda q: 2.0 * q, label="sphere")


def test_connection_verdicts():
    assert connection_verdict(np.array([1.0]), np.array([1.0])) is ConnectionVerdict.PRESERVED
    assert connection_verdict(np.array([1.0]), np.array([-1.0])) is ConnectionVerdict.REVERSED
    assert connection_verdict(np.array([1.0]), np.array([0.3])) is ConnectionVerdict.OTHER
    # zero connection is both; Preserved wins
    assert connection_verdict(np.array([0.0]), np.array([0.0])) is ConnectionVerdict.PRESERVED


def test_adapted_frame_is_orthonormal():
    grad = np.array([0.3, -1.2, 2.0])
    normal, tangents = adapted_frame(grad)
    frame = np.column_stack([normal, tangents])
    assert_allclose(frame.T @ frame, np.eye(3), atol=1e-14)
    assert_allclose(normal, grad / np.linalg.norm(grad))
    assert_allclose(adapted_frame(grad)[1], tangents)


def single_impact(sys, action, guard, state: VelocityState) -> HybridTrajectory:
    outcome = resolve_impact_momentum(sys, guard, legendre_to_momentum(sys, state))
    event = ImpactEvent(
        t_star=0.0,
        outcome=outcome,
        guard_label=guard.label,
        momentum_pre=momentum_map(action, outcome.pre),
        momentum_post=momentum_map(action, outcome.post),
        connection_pre=mechanical_connection(sys, action, legendre_to_velocity(sys, outcome.pre)),
        connection_post=mechanical_connection(sys, action, legendre_to_velocity(sys, outcome.post)),
    )
    return HybridTrajectory(segments=[[(0.0, outcome.pre)], [(0.0, outcome.post)]], events=[event])


def test_exterior_impact_changes_connection_and_level():
    sys = pendulum_cart()
    action = default_action(sys)
    traj = single_impact(sys, action, pendulum_cart_exterior_guard(0.0), VelocityState([0.0, 0.0], [0.0, 1.0]))
    assert_allclose(traj.events[0].outcome.pre.p, [1.0, 2.0])

    event = impact_invariants(traj, sys, action).events[0]
    assert event.connection_pre[0] == pytest.approx(1.0, abs=1e-12)
    assert event.connection_post[0] == pytest.approx(0.0, abs=1e-12)
    assert event.verdict is ConnectionVerdict.OTHER
    assert shape_velocity_check(traj.events[0], sys, action) == pytest.approx(2.0, abs=1e-12)

    mu_pre, mu_post = noether_report(traj, sys, action).levels[0]
    assert mu_pre[0] == pytest.approx(2.0, abs=1e-12)
    assert mu_post[0] - mu_pre[0] == pytest.approx(-2.0, abs=1e-12)


def test_interior_impact_flips_shape_velocity():
    sys = pendulum_cart()
    action = default_action(sys)
    traj = single_impact(sys, action, pendulum_cart_interior_guard(0.0), VelocityState([0.0, 0.0], [1.0, 0.0]))
    assert shape_velocity_check(traj.events[0], sys, action) == pytest.approx(2.0, abs=1e-12)
    assert impact_invariants(traj, sys, action).verdicts == [ConnectionVerdict.PRESERVED]


def test_horizontal_run_reverses_connection():
    sys = pendulum_cart(m=0.7, M=1.9, l=1.3)
    action = default_action(sys)
    guards = [pendulum_cart_horizontal_guard(sys, 1.0), pendulum_cart_horizontal_guard(sys, -1.0)]
    traj = simulate_hybrid(sys, action, guards, MomentumState([0.0, 0.0], [0.4, 2.0]), IntegratorConfig(dt=1e-3, t_end=5.0))

    report = impact_invariants(traj, sys, action)
    assert len(report.events) >= 2
    assert all(v is ConnectionVerdict.REVERSED for v in report.verdicts)
    assert all(e.shape_velocity_delta <= 1e-9 for e in report.events)
    assert report.max_abs_delta_h <= 1e-10 * 10


def test_noether_levels_on_the_slab():
    sys = free_particle_2d()
    action = default_action(sys)
    guards = [coordinate_guard(0, 1.0), coordinate_guard(0, -1.0)]
    traj = simulate_hybrid(sys, action, guards, MomentumState([0.0, 0.0], [1.0, 0.5]), IntegratorConfig(dt=0.01, t_end=4.0))

    report = noether_report(traj, sys, action)
    assert report.max_segment_drift == 0.0
    assert len(report.levels) == 2
    mu_pre, mu_post = report.levels[0]
    assert_allclose(mu_pre, [1.0, 0.5])
    assert_allclose(mu_post, [-1.0, 0.5])
    assert report.max_event_jump == pytest.approx(2.0)
    assert not report.hybrid_constant

    cart = coordinate_action([1], 2)
    assert noether_report(traj, sys, cart).hybrid_constant


def test_pullback_on_builtin_guards():
    sys = pendulum_cart()
    rng = np.random.default_rng(11)
    guards = [
        pendulum_cart_interior_guard(0.1),
        pendulum_cart_exterior_guard(0.5),
        pendulum_cart_horizontal_guard(sys, 0.2),
    ]
    for guard in guards:
        for _ in range(5):
            q = project_to_surface(guard, rng.uniform(-1.0, 1.0, 2))
            p = rng.uniform(0.5, 2.0, 2)
            report = symplectic_pullback_check(sys, guard, q, p)
            assert report.form_deviation <= 1e-6
            assert report.kinetic_deviation <= 1e-10
            assert report.tangential_momentum_deviation <= 1e-12
            assert report.jacobian.shape == (3, 3)
            assert report.labels == ["s_1", "p_1", "p_2"]


def test_pullback_contracts_with_the_step():
    sys = ellipsoid_system()
    q = np.array([0.3, -0.5, 0.8])
    q = q / np.linalg.norm(q)
    p = np.array([0.7, 0.2, -0.4])

    coarse = symplectic_pullback_check(sys, sphere_guard(), q, p, fd_step=1e-2).form_deviation
    fine = symplectic_pullback_check(sys, sphere_guard(), q, p, fd_step=2.5e-3).form_deviation
    assert 10.0 <= coarse / fine <= 24.0


def test_hybrid_action_on_pendulum_guards():
    sys = pendulum_cart()
    action = default_action(sys)
    shifts = [[0.5], [-2.0], [10.0]]

    interior = pendulum_cart_interior_guard(0.3)
    states = [MomentumState([0.3, 0.0], [1.0, 0.2]), MomentumState([0.3, 1.5], [-0.4, 2.0])]
    report = hybrid_action_check(sys, action, interior, states, shifts)
    assert report.surface_invariant
    assert report.max_equivariance_deviation <= 1e-12

    exterior = pendulum_cart_exterior_guard(0.0)
    report = hybrid_action_check(sys, action, exterior, [MomentumState([0.3, 0.0], [1.0, 0.2])], shifts)
    assert not report.surface_invariant
    assert report.max_equivariance_deviation is None


def test_suite_passes_for_vertical_guard():
    sys = pendulum_cart()
    config = IntegratorConfig(dt=1e-3, t_end=3.0)
    traj, classes, checks = run_suite(
        sys, default_action(sys), [pendulum_cart_interior_guard(0.2)], MomentumState([0.0, 0.0], [2.0, 1.0]), config
    )
    failed = [c.name for c in checks if not c.passed]
    assert failed == []
    assert classes[0].kind.value == "Vertical"
    assert {"corner_energy", "vertical_preserved[interior theta=0.2]", "symplectic_pullback"} <= {c.name for c in checks}
    assert len(traj.events) >= 2


def test_suite_passes_for_horizontal_guards():
    sys = pendulum_cart()
    guards = [pendulum_cart_horizontal_guard(sys, 1.0), pendulum_cart_horizontal_guard(sys, -1.0)]
    _, classes, checks = run_suite(
        sys, default_action(sys), guards, MomentumState([0.0, 0.0], [0.5, 2.5]), IntegratorConfig(dt=1e-3, t_end=3.0)
    )
    assert [c.kind.value for c in classes] == ["Horizontal", "Horizontal"]
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    assert any(c.name.startswith("horizontal_reversed") for c in checks)


if __name__ == "__main__":
    import sys as _sys
    _sys.exit(pytest.main([__file__, "-v"]))
