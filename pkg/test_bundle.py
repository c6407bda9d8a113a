#!/usr/bin/env python3
"""
Tests for hbs.bundle: momentum map, locked inertia, mechanical connection.
Run with pytest, or directly: python test_bundle.py
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hbs.bundle import (
    SymmetryAction,
    check_generators_commute,
    check_lagrangian_invariance,
    coordinate_action,
    generator_matrix,
    group_shift,
    horizontal_vertical_split,
    locked_inertia,
    mechanical_connection,
    momentum_map,
    shape_coordinates,
    shape_velocity,
)
from hbs.errors import DimensionMismatch, NotPositiveDefinite, ShapeProjectionUnavailable
from hbs.mechsys import MomentumState, VelocityState, legendre_to_momentum, mass_matrix
from hbs.systems import default_action, free_particle_2d, pendulum_cart


def rotation_action() -> SymmetryAction:
    return SymmetryAction(
        k=2,
        generators=(lambda q: np.array([-q[1], q[0]]), lambda q: np.array([1.0, 0.0])),
        label="rotation and x-translation",
    )


def test_coordinate_action_and_generator_matrix():
    action = coordinate_action([1], 2)
    assert action.k == 1
    assert action.coordinate_indices == (1,)
    assert_allclose(generator_matrix(action, np.array([0.3, 5.0])), [[0.0], [1.0]])
    assert generator_matrix(coordinate_action([], 2), np.zeros(2)).shape == (2, 0)
    with pytest.raises(DimensionMismatch):
        coordinate_action([2], 2)


def test_pendulum_cart_momentum_inertia_connection():
    m, M, l = 1.5, 2.5, 0.8
    sys = pendulum_cart(m=m, M=M, l=l)
    action = default_action(sys)
    q = np.array([0.7, -2.0])
    v = np.array([1.2, 0.4])

    p = legendre_to_momentum(sys, VelocityState(q, v)).p
    mu = momentum_map(action, MomentumState(q, p)).mu
    assert_allclose(mu, [p[1]])
    assert_allclose(locked_inertia(sys, action, q), [[M + m]])

    connection = mechanical_connection(sys, action, VelocityState(q, v)).xi
    expected = (m * l * np.cos(0.7) * 1.2 + (M + m) * 0.4) / (M + m)
    assert_allclose(connection, [expected], rtol=1e-14)


def test_horizontal_vertical_split():
    sys = pendulum_cart()
    action = default_action(sys)
    s = VelocityState([0.4, 1.0], [0.9, -0.3])
    v_hor, v_ver = horizontal_vertical_split(sys, action, s)

    assert_allclose(v_hor + v_ver, s.v, atol=1e-15)
    M = mass_matrix(sys, s.q)
    assert abs(float(generator_matrix(action, s.q.q)[:, 0] @ M @ v_hor)) < 1e-14
    assert v_ver[0] == 0.0


def test_empty_action_has_empty_connection():
    sys = free_particle_2d()
    empty = coordinate_action([], 2)
    assert mechanical_connection(sys, empty, VelocityState([0.0, 0.0], [1.0, 1.0])).xi.size == 0
    assert momentum_map(empty, MomentumState([0.0, 0.0], [1.0, 1.0])).mu.size == 0


def test_degenerate_generators_rejected():
    sys = free_particle_2d()
    twice = coordinate_action([0, 0], 2)
    with pytest.raises(NotPositiveDefinite):
        locked_inertia(sys, twice, [0.0, 0.0])


def test_lagrangian_invariance():
    sys = pendulum_cart()
    rng = np.random.default_rng(7)
    samples = [VelocityState(rng.uniform(-3, 3, 2), rng.uniform(-2, 2, 2)) for _ in range(10)]

    report = check_lagrangian_invariance(sys, default_action(sys), samples)
    assert report.max_derivative < 1e-8
    assert report.samples == 10

    swing = coordinate_action([0], 2)
    assert check_lagrangian_invariance(sys, swing, samples).max_derivative > 1e-2

    with pytest.raises(ValueError):
        check_lagrangian_invariance(sys, default_action(sys), [])


def test_rotation_is_a_symmetry_of_the_free_particle():
    sys = free_particle_2d()
    rotation = SymmetryAction(k=1, generators=(lambda q: np.array([-q[1], q[0]]),), label="rotation")
    samples = [VelocityState([0.5, -1.0], [0.3, 2.0]), VelocityState([2.0, 1.0], [-1.0, 0.5])]
    assert check_lagrangian_invariance(sys, rotation, samples).max_derivative < 1e-8


def test_generators_commute():
    assert check_generators_commute(coordinate_action([0, 1], 2), np.array([0.3, 0.4])) == 0.0
    assert check_generators_commute(rotation_action(), np.array([0.3, 0.4])) == pytest.approx(1.0, rel=1e-6)


def test_shape_projection_and_group_shift():
    action = coordinate_action([1], 2)
    assert_allclose(shape_coordinates(action, [0.3, 5.0]), [0.3])
    assert_allclose(shape_velocity(action, [1.0, -2.0]), [1.0])
    assert_allclose(group_shift(action, [0.3, 5.0], [2.0]), [0.3, 7.0])

    with pytest.raises(ShapeProjectionUnavailable):
        shape_velocity(rotation_action(), [1.0, 0.0])
    with pytest.raises(ShapeProjectionUnavailable):
        group_shift(rotation_action(), [1.0, 0.0], [0.1, 0.2])


def test_connection_reproduces_generators():
    rng = np.random.default_rng(21)
    cases = [
        (pendulum_cart(m=0.7, M=2.3, l=1.4), None),
        (free_particle_2d(), None),
        (free_particle_2d(), rotation_action()),
    ]
    for sys, action in cases:
        action = action or default_action(sys)
        for _ in range(200):
            q = np.array([rng.uniform(0.5, 2.0), rng.uniform(-2.0, 2.0)])
            c = rng.uniform(-3.0, 3.0, action.k)
            v = generator_matrix(action, q) @ c
            xi = mechanical_connection(sys, action, VelocityState(q, v)).xi
            assert_allclose(xi, c, rtol=0, atol=1e-12 * max(1.0, np.abs(c).max()))


def test_connection_is_invariant_along_fibers():
    sys = pendulum_cart(m=1.3, M=0.6, l=2.0)
    action = default_action(sys)
    rng = np.random.default_rng(22)
    for _ in range(50):
        q = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-5, 5)])
        v = rng.uniform(-3, 3, 2)
        shifted = group_shift(action, q, [rng.uniform(-10, 10)])
        before = mechanical_connection(sys, action, VelocityState(q, v)).xi
        after = mechanical_connection(sys, action, VelocityState(shifted, v)).xi
        assert np.array_equal(before, after)


def test_full_rank_coordinate_action_warns(caplog):
    coordinate_action([1], 2)
    assert "no shape space" not in caplog.text
    coordinate_action([0, 1], 2)
    assert "no shape space" in caplog.text


if __name__ == "__main__":
    import sys as _sys
    _sys.exit(pytest.main([__file__, "-v"]))
