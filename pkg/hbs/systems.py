"""
Named system registry and the built-in systems, guards and symmetry actions.

pendulum-cart: q = (θ, x), mass m on a massless rod of length l hanging from a
cart of mass M. Kinetic metric

    M(θ) = [[m l²,      m l cosθ],
            [m l cosθ,  M + m   ]],

potential V(θ) = −m l g cosθ. The cart position x is cyclic.

free-particle-2d: identity metric, V = 0.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from hbs.bundle import SymmetryAction, coordinate_action
from hbs.errors import UnknownSystem
from hbs.impact import Crossing, Guard, coordinate_guard
from hbs.mechsys import MechanicalSystem

logger = logging.getLogger(__name__)

SystemFactory = Callable[..., MechanicalSystem]


@dataclass(frozen=True)
class SystemEntry:
    name: str
    factory: SystemFactory
    defaults: Mapping[str, float] = field(default_factory=dict)
    description: str = ""
    symmetry: tuple = ()


SYSTEM_REGISTRY: Dict[str, SystemEntry] = {}


def register_system(
    name: str,
    factory: SystemFactory,
    defaults: Optional[Mapping[str, float]] = None,
    description: str = "",
    symmetry: tuple = (),
) -> None:
    """Register a system factory; `symmetry` lists the default coordinate generators."""
    SYSTEM_REGISTRY[name] = SystemEntry(name, factory, dict(defaults or {}), description, tuple(symmetry))


def get_entry(name: str) -> SystemEntry:
    if name not in SYSTEM_REGISTRY:
        raise UnknownSystem(f"unknown system '{name}'; known systems: {sorted(SYSTEM_REGISTRY)}")
    return SYSTEM_REGISTRY[name]


def build_system(name: str, params: Optional[Mapping[str, float]] = None) -> MechanicalSystem:
    entry = get_entry(name)
    params = dict(params or {})
    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise UnknownSystem(f"system '{name}' has no parameter(s) {sorted(unknown)}; expected {sorted(entry.defaults)}")
    merged = {**entry.defaults, **params}
    return entry.factory(**merged)


def list_systems() -> List[SystemEntry]:
    return [SYSTEM_REGISTRY[name] for name in sorted(SYSTEM_REGISTRY)]


def default_action(sys: MechanicalSystem) -> Optional[SymmetryAction]:
    entry = SYSTEM_REGISTRY.get(sys.name)
    if entry is None or not entry.symmetry:
        return None
    indices = [sys.coordinate_names.index(c) for c in entry.symmetry]
    return coordinate_action(indices, sys.n, label=f"{sys.name} translations")


def pendulum_cart(m: float = 1.0, M: float = 1.0, l: float = 1.0, gravity: float = 9.8) -> MechanicalSystem:
    if min(m, M, l) <= 0:
        raise ValueError(f"pendulum-cart needs positive m, M, l; got m={m}, M={M}, l={l}")

    def mass_matrix(q: np.ndarray) -> np.ndarray:
        c = np.cos(q[0])
        return np.array([[m * l * l, m * l * c], [m * l * c, M + m]])

    def mass_matrix_derivative(q: np.ndarray):
        s = np.sin(q[0])
        return [np.array([[0.0, -m * l * s], [-m * l * s, 0.0]]), np.zeros((2, 2))]

    def potential(q: np.ndarray) -> float:
        return -m * l * gravity * np.cos(q[0])

    def potential_gradient(q: np.ndarray) -> np.ndarray:
        return np.array([m * l * gravity * np.sin(q[0]), 0.0])

    return MechanicalSystem(
        name="pendulum-cart",
        n=2,
        mass_matrix=mass_matrix,
        potential=potential,
        potential_gradient=potential_gradient,
        mass_matrix_derivative=mass_matrix_derivative,
        coordinate_names=("theta", "x"),
        params={"m": m, "M": M, "l": l, "gravity": gravity},
    )


def free_particle_2d() -> MechanicalSystem:
    return MechanicalSystem(
        name="free-particle-2d",
        n=2,
        mass_matrix=lambda q: np.eye(2),
        potential=lambda q: 0.0,
        potential_gradient=lambda q: np.zeros(2),
        mass_matrix_derivative=lambda q: [np.zeros((2, 2)), np.zeros((2, 2))],
        coordinate_names=("x1", "x2"),
        params={},
    )


register_system(
    "pendulum-cart",
    pendulum_cart,
    defaults={"m": 1.0, "M": 1.0, "l": 1.0, "gravity": 9.8},
    description="pendulum on a cart, q = (theta, x), symmetry: cart translation",
    symmetry=("x",),
)
register_system(
    "free-particle-2d",
    free_particle_2d,
    defaults={},
    description="free particle in the plane, identity metric, V = 0",
    symmetry=("x1", "x2"),
)


def pendulum_cart_interior_guard(angle: float = 0.0, crossing: Crossing = Crossing.BOTH) -> Guard:
    """θ = angle: a union of fibers, so vertical."""
    return coordinate_guard(0, angle, crossing, label=f"interior theta={angle:g}", exterior=False)


def pendulum_cart_exterior_guard(z: float = 0.0, crossing: Crossing = Crossing.BOTH) -> Guard:
    """Cart wall x = z; projects onto the whole shape circle."""
    return coordinate_guard(1, z, crossing, label=f"exterior x={z:g}", exterior=True)


def pendulum_cart_horizontal_guard(
    sys: MechanicalSystem, level: float = 0.0, crossing: Crossing = Crossing.BOTH
) -> Guard:
    """
    f(θ, x) = (m l/(M+m)) sinθ + x − level. df = 𝒜 on velocities, so the
    metric normal of this guard is vertical.
    """
    params = sys.params
    c = params["m"] * params["l"] / (params["M"] + params["m"])

    def h(q: np.ndarray) -> float:
        return float(c * np.sin(q[0]) + q[1] - level)

    def grad_h(q: np.ndarray) -> np.ndarray:
        return np.array([c * np.cos(q[0]), 1.0])

    return Guard(
        h=h,
        grad_h=grad_h,
        crossing=Crossing(crossing),
        label=f"horizontal f={level:g}",
        exterior=True,
    )


def pendulum_cart_surface_seeds(count: int, x: float = 0.0) -> List[np.ndarray]:
    """θ on a uniform grid over the circle, offset by half a cell; x spread around `x`."""
    return [
        np.array([-np.pi + 2.0 * np.pi * (k + 0.5) / count, x + 0.5 * (k - count // 2)])
        for k in range(count)
    ]
