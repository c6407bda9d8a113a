#!/usr/bin/env python3
"""
Tests for hbs.impact: elastic impacts, guard helpers and classification.
Run with pytest, or directly: python test_impact.py
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hbs.bundle import coordinate_action
from hbs.errors import DegenerateGradient, GrazingImpact, InconsistentSamples, OffSurface
from hbs.impact import (
    Crossing,
    Guard,
    GuardClassKind,
    classify_guard,
    coordinate_guard,
    guard_gradient,
    guard_value,
    impact_kind,
    normal_speed,
    project_to_surface,
    resolve_impact_momentum,
    resolve_impact_velocity,
    surface_samples,
)
from hbs.mechsys import MomentumState, VelocityState, hamiltonian
from hbs.systems import (
    default_action,
    free_particle_2d,
    pendulum_cart,
    pendulum_cart_exterior_guard,
    pendulum_cart_horizontal_guard,
    pendulum_cart_interior_guard,
    pendulum_cart_surface_seeds,
)


def test_coordinate_guard_reflects_free_particle():
    sys = free_particle_2d()
    wall = coordinate_guard(0, 1.0)
    outcome = resolve_impact_momentum(sys, wall, MomentumState([1.0, 0.3], [2.0, -0.5]))

    assert outcome.alpha == pytest.approx(-4.0)
    assert_allclose(outcome.post.p, [-2.0, -0.5])
    assert outcome.energy_post == pytest.approx(outcome.energy_pre, rel=1e-15)
    assert_allclose(outcome.post.q.q, outcome.pre.q.q)


def test_impact_preserves_energy_on_curved_guard():
    sys = pendulum_cart(m=0.6, M=4.0, l=1.7)
    guard = pendulum_cart_horizontal_guard(sys, level=0.25)
    q = project_to_surface(guard, np.array([1.1, 0.0]))
    pre = MomentumState(q, [0.8, -1.3])
    outcome = resolve_impact_momentum(sys, guard, pre)

    assert abs(outcome.energy_post - outcome.energy_pre) <= 1e-12 * max(1.0, abs(outcome.energy_pre))
    assert normal_speed(sys, guard, outcome.post) == pytest.approx(-normal_speed(sys, guard, pre), rel=1e-12)
    assert hamiltonian(sys, outcome.post) == pytest.approx(outcome.energy_post)


def test_impact_is_an_involution():
    rng = np.random.default_rng(4)
    for _ in range(100):
        sys = pendulum_cart(*rng.uniform(0.2, 5.0, 3))
        guard = pendulum_cart_horizontal_guard(sys, level=rng.uniform(-1, 1))
        q = project_to_surface(guard, rng.uniform(-2, 2, 2))
        pre = MomentumState(q, [rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)])

        once = resolve_impact_momentum(sys, guard, pre).post
        twice = resolve_impact_momentum(sys, guard, once).post
        assert_allclose(twice.p, pre.p, atol=1e-10 * max(1.0, np.linalg.norm(pre.p)))


def test_velocity_side_interior_impact():
    m, M, l = 1.0, 2.0, 0.5
    sys = pendulum_cart(m=m, M=M, l=l)
    theta, theta_dot, x_dot = 0.3, 1.4, -0.6
    post, alpha = resolve_impact_velocity(
        sys, pendulum_cart_interior_guard(0.3), VelocityState([theta, 2.0], [theta_dot, x_dot])
    )
    assert post.v[0] == pytest.approx(-theta_dot, rel=1e-12)
    assert post.v[1] == pytest.approx(x_dot + 2 * m * l * np.cos(theta) * theta_dot / (M + m), rel=1e-12)
    assert alpha < 0


def test_impact_errors():
    sys = free_particle_2d()
    wall = coordinate_guard(0, 1.0)
    with pytest.raises(OffSurface):
        resolve_impact_momentum(sys, wall, MomentumState([0.5, 0.0], [1.0, 0.0]))
    with pytest.raises(GrazingImpact):
        resolve_impact_momentum(sys, wall, MomentumState([1.0, 0.0], [1e-12, 1.0]))
    # at rest on the wall the only root is α = 0
    with pytest.raises(GrazingImpact):
        resolve_impact_momentum(sys, coordinate_guard(0, 0.0), MomentumState([0.0, 0.0], [0.0, 0.0]))

    cusp = Guard(h=lambda q: float(q[0] ** 2), label="cusp")
    with pytest.raises(DegenerateGradient):
        resolve_impact_momentum(sys, cusp, MomentumState([0.0, 0.0], [1.0, 0.0]))


def test_guard_helpers():
    circle = Guard(h=lambda q: float(q @ q - 1.0), label="circle")
    q = np.array([0.6, 0.9])
    assert guard_value(circle, q) == pytest.approx(0.17)
    assert_allclose(guard_gradient(circle, q), 2 * q, atol=1e-8)

    on = project_to_surface(circle, np.array([2.0, 1.0]))
    assert abs(guard_value(circle, on)) <= 1e-14
    samples = surface_samples(circle, [np.array([2.0, 0.0]), np.array([0.1, -0.3])])
    assert all(abs(guard_value(circle, s)) <= 1e-14 for s in samples)

    flat = coordinate_guard(0, 1.0)
    seeds = [np.array([0.0, 2.0]), np.array([5.0, 2.0]), np.array([1.0, 3.0])]
    assert_allclose(surface_samples(flat, seeds), [[1.0, 2.0], [1.0, 3.0]])

    wall = coordinate_guard(1, -0.5, Crossing.DECREASING)
    assert wall.crossing is Crossing.DECREASING
    assert wall.label == "q[1]=-0.5"


def test_pendulum_cart_guard_classification():
    sys = pendulum_cart(m=1.2, M=0.8, l=1.5)
    action = default_action(sys)
    seeds = pendulum_cart_surface_seeds(16)

    guards = [
        pendulum_cart_interior_guard(0.4),
        pendulum_cart_exterior_guard(0.0),
        pendulum_cart_horizontal_guard(sys, 0.3),
    ]
    kinds = [classify_guard(sys, action, g, surface_samples(g, seeds)).kind for g in guards]
    assert kinds == [GuardClassKind.VERTICAL, GuardClassKind.NEITHER, GuardClassKind.HORIZONTAL]

    results = [classify_guard(sys, action, g, surface_samples(g, seeds)) for g in guards]
    assert all(r.consistent for r in results)
    assert all(r.samples == 16 for r in results)
    assert [impact_kind(g, r) for g, r in zip(guards, results)] == ["interior", "exterior", "exterior"]


def test_inconsistent_samples():
    sys = pendulum_cart()
    action = default_action(sys)
    # θ = 0.3 x²: tangent to the fibers only at x = 0.
    bowl = Guard(h=lambda q: float(q[0] - 0.3 * q[1] ** 2), label="bowl")
    samples = [np.array([0.0, 0.0]), np.array([0.3, 1.0])]

    result = classify_guard(sys, action, bowl, samples)
    assert result.kind is GuardClassKind.NEITHER
    assert not result.consistent
    assert impact_kind(bowl, result) == "unspecified"

    with pytest.raises(InconsistentSamples):
        classify_guard(sys, action, bowl, samples, strict=True)
    with pytest.raises(OffSurface):
        classify_guard(sys, action, bowl, [np.array([1.0, 0.0])])
    with pytest.raises(InconsistentSamples):
        classify_guard(sys, action, bowl, [])


def test_full_rank_action_makes_every_guard_horizontal(caplog):
    sys = free_particle_2d()
    action = coordinate_action([0, 1], 2)
    wall = coordinate_guard(0, 1.0)
    result = classify_guard(sys, action, wall, [np.array([1.0, 0.0]), np.array([1.0, 3.0])])
    assert result.kind is GuardClassKind.HORIZONTAL
    assert "group dimension 2 >= 2" in caplog.text


if __name__ == "__main__":
    import sys as _sys
    _sys.exit(pytest.main([__file__, "-v"]))
