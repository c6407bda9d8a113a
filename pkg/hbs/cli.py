"""
Configuration-driven front-end: parse a YAML run description, execute it in
run, classify or verify mode and write the trajectory CSV and report JSON.

Exit codes: 0 success, 1 error, 2 verification suite failed.
"""
import asyncio
import json
import logging
import re
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import aiofiles
import numpy as np
import yaml
from pydantic import ValidationError

from hbs import utils
from hbs.acceptance import classify_guards, run_suite
from hbs.bundle import SymmetryAction, coordinate_action, mechanical_connection, momentum_map
from hbs.errors import ConfigParseError, ConfigValidationError, HBSError
from hbs.hybridflow import HybridTrajectory, Termination, simulate_hybrid
from hbs.impact import Crossing, Guard, GuardClass, coordinate_guard, impact_kind
from hbs.mechsys import (
    MechanicalSystem,
    MomentumState,
    VelocityState,
    hamiltonian,
    legendre_to_momentum,
    legendre_to_velocity,
)
from hbs.models import (
    EventRecord,
    GuardClassRecord,
    GuardSpec,
    Mode,
    RunConfig,
    RunReport,
)
from hbs.systems import (
    build_system,
    default_action,
    list_systems,
    pendulum_cart_exterior_guard,
    pendulum_cart_horizontal_guard,
    pendulum_cart_interior_guard,
)
from hbs.verify import impact_invariants

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SUITE_FAILED = 2

CONFIG_SUFFIXES = (".yaml", ".yml")
PENDULUM_BUILTINS = ("interior", "exterior", "horizontal")

# floats travel through json.dumps as marked strings and are unquoted afterwards
FLOAT_MARK = "\x00"
MARKED_FLOAT = re.compile(r'"\\u0000([^"\\]*)\\u0000"')


def parse_config(text: str, default_name: Optional[str] = None) -> RunConfig:
    """
    Parse and validate config text. Raises ConfigParseError for malformed YAML
    and ConfigValidationError (with the key path) for anything that parses but
    does not describe a runnable system.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is not None:
            raise ConfigParseError(problem, mark.line + 1, mark.column + 1)
        raise ConfigParseError(problem)

    if not isinstance(data, dict):
        raise ConfigParseError("config must be a mapping of sections")
    if default_name and "name" not in data:
        data["name"] = default_name

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigValidationError(first["msg"], tuple(first["loc"]))

    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    """Checks that need the system: name, parameters, dimensions, indices."""
    try:
        sys = build_system(config.system.name, config.system.params)
    except HBSError as e:
        raise ConfigValidationError(str(e), ("system",))
    except (TypeError, ValueError) as e:
        raise ConfigValidationError(str(e), ("system", "params"))

    if len(config.initial.q) != sys.n:
        raise ConfigValidationError(
            f"{sys.name} has {sys.n} coordinates but q has {len(config.initial.q)}", ("initial", "q")
        )
    build_action(sys, config)
    for i, spec in enumerate(config.guards):
        build_guard(sys, spec, ("guards", i))


def resolve_index(sys: MechanicalSystem, index, key: Tuple) -> int:
    if isinstance(index, str):
        if index not in sys.coordinate_names:
            raise ConfigValidationError(
                f"unknown coordinate '{index}'; {sys.name} has {list(sys.coordinate_names)}", key
            )
        return sys.coordinate_names.index(index)
    if not 0 <= index < sys.n:
        raise ConfigValidationError(f"index {index} out of range for {sys.n} coordinates", key)
    return int(index)


def build_action(sys: MechanicalSystem, config: RunConfig) -> Optional[SymmetryAction]:
    coordinates = config.symmetry.coordinates
    if coordinates is None:
        return default_action(sys)
    if coordinates == "none":
        return None
    indices = [resolve_index(sys, c, ("symmetry", "coordinates", i)) for i, c in enumerate(coordinates)]
    if len(set(indices)) != len(indices):
        raise ConfigValidationError("repeated symmetry coordinate", ("symmetry", "coordinates"))
    return coordinate_action(indices, sys.n, label=f"{sys.name} translations {indices}")


def build_guard(sys: MechanicalSystem, spec: GuardSpec, key: Tuple = ("guards",)) -> Guard:
    crossing = Crossing(spec.crossing)
    if spec.kind == "coordinate":
        index = resolve_index(sys, spec.index, key + ("index",))
        name = sys.coordinate_names[index]
        guard = coordinate_guard(index, spec.value, crossing, label=f"{name}={spec.value:g}")
    elif spec.kind == "pendulum-cart-horizontal" or spec.builtin == "horizontal":
        if sys.name != "pendulum-cart":
            raise ConfigValidationError(f"horizontal guard needs pendulum-cart, not {sys.name}", key + ("kind",))
        guard = pendulum_cart_horizontal_guard(sys, spec.level, crossing)
    else:
        if sys.name != "pendulum-cart" or spec.builtin not in PENDULUM_BUILTINS:
            raise ConfigValidationError(
                f"unknown builtin guard '{spec.builtin}' for {sys.name}; pendulum-cart has {list(PENDULUM_BUILTINS)}",
                key + ("builtin",),
            )
        if spec.builtin == "interior":
            guard = pendulum_cart_interior_guard(spec.value, crossing)
        else:
            guard = pendulum_cart_exterior_guard(spec.value, crossing)

    if spec.label:
        guard = replace(guard, label=spec.label)
    if spec.exterior is not None:
        guard = replace(guard, exterior=spec.exterior)
    return guard


def build_initial_state(sys: MechanicalSystem, config: RunConfig) -> MomentumState:
    initial = config.initial
    if initial.p is not None:
        return MomentumState(initial.q, initial.p)
    return legendre_to_momentum(sys, VelocityState(initial.q, initial.v))


def trajectory_csv(sys: MechanicalSystem, action: Optional[SymmetryAction], traj: HybridTrajectory) -> str:
    """One row per sample; events show up as a pre row and a post row sharing t."""
    k = action.k if action is not None else 0
    header = (
        ["t"]
        + [f"q_{i + 1}" for i in range(sys.n)]
        + [f"p_{i + 1}" for i in range(sys.n)]
        + ["H"]
        + [f"mu_{a + 1}" for a in range(k)]
        + [f"A_{a + 1}" for a in range(k)]
        + ["segment_id"]
    )
    lines = [",".join(header)]
    for segment_id, segment in enumerate(traj.segments):
        for t, state in segment:
            values = [t, *state.q.q, *state.p, hamiltonian(sys, state)]
            if k:
                values.extend(momentum_map(action, state).mu)
                values.extend(mechanical_connection(sys, action, legendre_to_velocity(sys, state)).xi)
            lines.append(",".join([utils.format_float(v) for v in values] + [str(segment_id)]))
    return "\n".join(lines) + "\n"


def _floats(values) -> List[float]:
    return [float(v) for v in np.asarray(values).reshape(-1)]


def event_records(
    sys: MechanicalSystem, action: Optional[SymmetryAction], traj: HybridTrajectory
) -> List[EventRecord]:
    symmetric = action is not None and action.k > 0
    invariants = impact_invariants(traj, sys, action if symmetric else coordinate_action([], sys.n, "none"))
    records = []
    for i, (event, inv) in enumerate(zip(traj.events, invariants.events)):
        records.append(EventRecord(
            index=i,
            t_star=event.t_star,
            guard=event.guard_label,
            alpha=event.outcome.alpha,
            delta_h=inv.delta_h,
            delta_mu=_floats(inv.delta_mu),
            mu_pre=_floats(event.momentum_pre.mu),
            mu_post=_floats(event.momentum_post.mu),
            connection_pre=_floats(inv.connection_pre),
            connection_post=_floats(inv.connection_post),
            verdict=inv.verdict.value if symmetric else "n/a",
            shape_velocity_delta=inv.shape_velocity_delta if symmetric else None,
        ))
    return records


def classification_records(guards: Sequence[Guard], classes: Sequence[GuardClass]) -> List[GuardClassRecord]:
    return [
        GuardClassRecord(
            guard=guard.label,
            kind=guard_class.kind.value,
            impact=impact_kind(guard, guard_class),
            consistent=guard_class.consistent,
            samples=guard_class.samples,
            max_vertical_residual=guard_class.max_vertical_residual,
            max_horizontal_residual=guard_class.max_horizontal_residual,
        )
        for guard, guard_class in zip(guards, classes)
    ]


def _mark_floats(value):
    if isinstance(value, float):
        if not np.isfinite(value):
            return None
        text = utils.format_float(value)
        if text.lstrip("-").isdigit():
            text += ".0"
        return f"{FLOAT_MARK}{text}{FLOAT_MARK}"
    if isinstance(value, dict):
        return {k: _mark_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_mark_floats(v) for v in value]
    return value


def report_json(report: RunReport) -> str:
    """Fixed key order and 17-significant-digit floats, so reruns are byte-identical."""
    text = json.dumps(_mark_floats(report.model_dump(mode="json")), indent=2, sort_keys=False)
    return MARKED_FLOAT.sub(r"\1", text) + "\n"


def compute(config: RunConfig) -> Tuple[int, RunReport, Optional[str]]:
    """
    Synchronous part of execute: returns (exit code, report, trajectory CSV or
    None when the mode writes no trajectory).
    """
    sys = build_system(config.system.name, config.system.params)
    action = build_action(sys, config)
    guards = [build_guard(sys, spec, ("guards", i)) for i, spec in enumerate(config.guards)]
    report = RunReport(
        name=config.name,
        mode=config.mode.value,
        system=sys.name,
        params={k: float(v) for k, v in sys.params.items()},
    )

    if config.mode is Mode.CLASSIFY:
        if action is None or action.k == 0:
            raise ConfigValidationError("classify mode needs a symmetry", ("symmetry", "coordinates"))
        s0 = build_initial_state(sys, config)
        classes = classify_guards(sys, action, guards, s0.q.q, config.classify.samples, config.classify.class_tol)
        report.classifications = classification_records(guards, classes)
        return EXIT_OK, report, None

    s0 = build_initial_state(sys, config)
    if config.mode is Mode.VERIFY:
        traj, classes, checks = run_suite(
            sys, action, guards, s0, config.integrator, config.classify.samples, config.classify.class_tol
        )
        report.classifications = classification_records(guards, classes)
        report.checks = checks
        report.passed = all(c.passed for c in checks)
        code = EXIT_OK if report.passed else EXIT_SUITE_FAILED
        csv_text = None
    else:
        traj = simulate_hybrid(sys, action, guards, s0, config.integrator)
        csv_text = trajectory_csv(sys, action, traj)
        code = EXIT_ERROR if traj.termination is Termination.ERROR else EXIT_OK

    report.termination = traj.termination.value
    report.error = traj.error
    report.events = event_records(sys, action, traj)
    return code, report, csv_text


async def execute(config: RunConfig, out_dir: Path) -> Tuple[int, List[Path]]:
    """Run one config and write its files under out_dir/<config name>/."""
    target = Path(out_dir) / config.name
    logger.info(f"Executing '{config.name}' in {config.mode.value} mode")
    code, report, csv_text = await asyncio.to_thread(compute, config)

    written: List[Path] = []
    report.files = [config.output.report]
    if csv_text is not None:
        report.files.insert(0, config.output.trajectory)
        written.append(await utils.write_output(target / config.output.trajectory, csv_text))
    written.append(await utils.write_output(target / config.output.report, report_json(report)))

    for path in written:
        logger.info(f"Wrote {path}")
    return code, written


async def load_config(path: Path, mode: Optional[Mode] = None) -> RunConfig:
    """Read and parse one config file; the run name defaults to the file stem."""
    async with aiofiles.open(path, "r", encoding="utf-8") as f:
        text = await f.read()
    config = parse_config(text, default_name=utils.get_config_id(str(path)))
    if mode is not None:
        config = config.model_copy(update={"mode": mode})
    return config


async def _guarded(path: Path, work) -> Tuple[int, List[Path]]:
    try:
        return await work
    except (HBSError, OSError) as e:
        logger.error(f"{path}: {e}")
        return EXIT_ERROR, []


async def execute_path(path: Path, out_dir: Path, mode: Optional[Mode] = None) -> Tuple[int, List[Path]]:
    """Read, parse and execute one config file; errors are logged and become exit code 1."""
    path = Path(path)

    async def work():
        return await execute(await load_config(path, mode), out_dir)

    return await _guarded(path, work())


def config_files(directory: Path) -> List[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix in CONFIG_SUFFIXES and p.is_file())


async def execute_batch(directory: Path, out_dir: Path, mode: Optional[Mode] = None) -> Dict[Path, int]:
    """
    Run every config in a directory concurrently; returns the exit code per file.
    Configs sharing a run name would write into the same directory, so all of
    them are rejected before anything runs.
    """
    paths = config_files(directory)
    logger.info(f"Batch of {len(paths)} config(s) from {directory}")

    async def load(path: Path):
        try:
            return await load_config(path, mode)
        except (HBSError, OSError) as e:
            logger.error(f"{path}: {e}")
            return None

    configs = dict(zip(paths, await asyncio.gather(*(load(p) for p in paths))))
    owners: Dict[str, List[Path]] = {}
    for path, config in configs.items():
        if config is not None:
            owners.setdefault(config.name, []).append(path)

    codes: Dict[Path, int] = {}
    runnable = []
    for path, config in configs.items():
        if config is None:
            codes[path] = EXIT_ERROR
        elif len(owners[config.name]) > 1:
            logger.error(f"{path}: run name '{config.name}' is shared with {[p.name for p in owners[config.name]]}")
            codes[path] = EXIT_ERROR
        else:
            runnable.append((path, config))

    results = await asyncio.gather(*(_guarded(path, execute(config, out_dir)) for path, config in runnable))
    for (path, _), (code, _) in zip(runnable, results):
        codes[path] = code
    return {path: codes[path] for path in paths}


def combined_exit_code(codes: Sequence[int]) -> int:
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return max(codes, default=EXIT_OK)


def describe_systems() -> List[str]:
    lines = []
    for entry in list_systems():
        defaults = ", ".join(f"{k}={v:g}" for k, v in entry.defaults.items()) or "no parameters"
        symmetry = ", ".join(entry.symmetry) or "none"
        lines.append(f"{entry.name}: {entry.description} [{defaults}; symmetry: {symmetry}]")
    return lines
