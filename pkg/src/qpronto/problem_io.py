"""Problem file parsing, validation, and result serialization.

Problem files are TOML documents with sections::

    [system]            n, x0, H0, channels (Hj + fj_kind per channel)
    [horizon]           T, N
    [cost]              terminal, effort, populations
    [regulator]         mode, c_R, c_P
    [guess]             kind plus parameters or tabulated series
    [solver]            tol, max_iter
    [gate]              target, active        (optional; gate problems)

Complex matrices and vectors are given as dense row-major ``real``/``imag``
arrays; basis vectors may use the ``{level = k}`` shorthand.  Every module
invariant is checked at parse time and reported with its section and field.
"""

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cost import (
    ConstantSchedule,
    EffortWeight,
    IncrementalCost,
    PopulationPenalty,
    TabulatedSchedule,
    TanhRampSchedule,
    TerminalCost,
)
from .curves import TimeGrid
from .embedding import embed_quadratic, embed_state
from .errors import ProblemFormatError
from .gates import GateProblem, stack_problem
from .hamiltonian import ChannelFunction, ControlHamiltonian
from .regulator import RegulatorSpec
from .solver import InitialGuess, Problem, SolveResult

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class LoadedProblem:
    title: str
    problem: Problem
    guess: InitialGuess
    tol: float
    max_iter: int


def _fail(section: str, field: str, message: str):
    raise ProblemFormatError(f"[{section}] {field}: {message}")


def _require(table: dict, section: str, field: str):
    if field not in table:
        _fail(section, field, "required field is missing")
    return table[field]


def _complex_matrix(node, section: str, field: str, n: int) -> np.ndarray:
    if not isinstance(node, dict) or not ({"real", "imag"} & set(node)):
        _fail(section, field, "expected a table with 'real' and/or 'imag' arrays")
    out = np.zeros((n, n), dtype=complex)
    for part, factor in (("real", 1.0), ("imag", 1.0j)):
        if part in node:
            arr = np.asarray(node[part], dtype=float)
            if arr.shape != (n, n):
                _fail(section, field, f"'{part}' must be a {n} x {n} array, got {arr.shape}")
            out += factor * arr
    return out


def _complex_vector(node, section: str, field: str, n: int) -> np.ndarray:
    if isinstance(node, dict) and "level" in node:
        level = node["level"]
        if not isinstance(level, int) or not 0 <= level < n:
            _fail(section, field, f"level must be an integer in [0, {n}), got {level!r}")
        out = np.zeros(n, dtype=complex)
        out[level] = 1.0
        return out
    if not isinstance(node, dict) or not ({"real", "imag"} & set(node)):
        _fail(section, field, "expected {level = k} or a table with 'real'/'imag' arrays")
    out = np.zeros(n, dtype=complex)
    for part, factor in (("real", 1.0), ("imag", 1.0j)):
        if part in node:
            arr = np.asarray(node[part], dtype=float)
            if arr.shape != (n,):
                _fail(section, field, f"'{part}' must have length {n}, got {arr.shape}")
            out += factor * arr
    return out


def _unit_vector(node, section: str, field: str, n: int) -> np.ndarray:
    psi = _complex_vector(node, section, field, n)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        _fail(section, field, f"must be unit norm, |psi| = {nrm:.12f}")
    return psi


def _schedule(node, section: str, field: str):
    if not isinstance(node, dict) or "kind" not in node:
        _fail(section, field, "expected a schedule table with a 'kind' entry")

    def entry(key):
        if key not in node:
            _fail(section, f"{field}.{key}", "required field is missing")
        return node[key]

    kind = node["kind"]
    try:
        if kind == "constant":
            return ConstantSchedule(float(entry("value")))
        if kind == "tanh_ramp":
            return TanhRampSchedule(
                float(entry("scale")), float(entry("shift")), float(entry("offset"))
            )
        if kind == "tabulated":
            return TabulatedSchedule(np.asarray(entry("values"), dtype=float))
    except (TypeError, ValueError) as exc:
        _fail(section, field, str(exc))
    _fail(section, field, f"unknown schedule kind {kind!r}")


def _channel_function(node, section: str) -> ChannelFunction:
    kind = node.get("fj_kind", "identity")
    try:
        if isinstance(kind, dict):
            return ChannelFunction(
                kind.get("kind", "scaled_affine"),
                float(kind.get("a", 1.0)),
                float(kind.get("b", 0.0)),
            )
        return ChannelFunction(kind)
    except ValueError as exc:
        _fail(section, "fj_kind", str(exc))


def load_problem(path: str) -> LoadedProblem:
    """Parse and validate a problem file."""
    try:
        with open(path, "rb") as handle:
            doc = tomllib.load(handle)
    except OSError as exc:
        raise ProblemFormatError(f"cannot read problem file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ProblemFormatError(f"problem file {path} is not valid TOML: {exc}") from exc

    title = doc.get("title", os.path.splitext(os.path.basename(path))[0])

    system = doc.get("system")
    if not isinstance(system, dict):
        _fail("system", "-", "section is missing")
    n = _require(system, "system", "n")
    if not isinstance(n, int) or n < 1:
        _fail("system", "n", f"must be a positive integer, got {n!r}")

    h0 = _complex_matrix(_require(system, "system", "H0"), "system", "H0", n)
    channel_nodes = _require(system, "system", "channels")
    if not isinstance(channel_nodes, list) or not channel_nodes:
        _fail("system", "channels", "at least one control channel is required")
    channels = []
    for j, node in enumerate(channel_nodes):
        section = f"system.channels[{j}]"
        hj = _complex_matrix(_require(node, section, "Hj"), section, "Hj", n)
        channels.append((hj, _channel_function(node, section)))

    horizon = doc.get("horizon")
    if not isinstance(horizon, dict):
        _fail("horizon", "-", "section is missing")
    try:
        grid = TimeGrid(float(_require(horizon, "horizon", "T")), int(_require(horizon, "horizon", "N")))
    except (TypeError, ValueError) as exc:
        _fail("horizon", "T/N", str(exc))

    gate_node = doc.get("gate")
    gate = None
    if gate_node is not None:
        target = _complex_matrix(_require(gate_node, "gate", "target"), "gate", "target", n)
        active = _require(gate_node, "gate", "active")
        if not isinstance(active, list) or not active:
            _fail("gate", "active", "expected a nonempty list of column indices")
        try:
            gate = GateProblem(
                h0,
                tuple(hj for hj, _ in channels),
                tuple(fn for _, fn in channels),
                target,
                tuple(active),
            )
        except ValueError as exc:
            _fail("gate", "target/active", str(exc))

    cost_node = doc.get("cost")
    if not isinstance(cost_node, dict):
        _fail("cost", "-", "section is missing")
    terminal_node = _require(cost_node, "cost", "terminal")
    terminal_kind = _require(terminal_node, "cost.terminal", "kind")

    if gate is not None:
        if terminal_kind != "gate":
            _fail("cost.terminal", "kind", "gate problems require kind = 'gate'")
        try:
            model, x0, terminal = stack_problem(gate)
        except ValueError as exc:
            _fail("gate", "target", str(exc))
    else:
        if terminal_kind == "gate":
            _fail("cost.terminal", "kind", "kind 'gate' requires a [gate] section")
        psi_target = _unit_vector(
            _require(terminal_node, "cost.terminal", "target"), "cost.terminal", "target", n
        )
        try:
            model = ControlHamiltonian.from_complex(h0, channels)
            if terminal_kind == "zero_phase":
                terminal = TerminalCost.zero_phase(psi_target)
            elif terminal_kind == "arbitrary_phase":
                terminal = TerminalCost.arbitrary_phase(psi_target)
            else:
                _fail("cost.terminal", "kind", f"unknown terminal kind {terminal_kind!r}")
        except ValueError as exc:
            _fail("system", "H0/channels", str(exc))
        x0 = embed_state(_unit_vector(_require(system, "system", "x0"), "system", "x0", n))

    m = len(channels)
    effort_node = _require(cost_node, "cost", "effort")
    if "diagonal" in effort_node:
        diag = effort_node["diagonal"]
        if not isinstance(diag, list) or len(diag) != m:
            _fail("cost.effort", "diagonal", f"expected one schedule per channel ({m})")
        effort = EffortWeight(
            diagonal=tuple(
                _schedule(node, "cost.effort", f"diagonal[{j}]") for j, node in enumerate(diag)
            )
        )
    elif "matrix" in effort_node:
        mat = np.asarray(effort_node["matrix"], dtype=float)
        if mat.shape != (m, m):
            _fail("cost.effort", "matrix", f"must be {m} x {m}, got {mat.shape}")
        effort = EffortWeight(matrix=mat)
    else:
        _fail("cost.effort", "-", "expected 'diagonal' schedules or a constant 'matrix'")

    penalties = []
    for idx, node in enumerate(cost_node.get("populations", [])):
        section = f"cost.populations[{idx}]"
        weight = _schedule(_require(node, section, "weight"), section, "weight")
        phi = _unit_vector(_require(node, section, "state"), section, "state", n)
        projector = np.outer(phi, phi.conj())
        if gate is not None:
            projector = np.kron(np.eye(gate.n_blocks), projector)
        penalties.append(PopulationPenalty(weight, embed_quadratic(projector)))
    incremental = IncrementalCost(effort, tuple(penalties))

    ts = grid.times()
    try:
        effort.sample(ts)
        for pen in penalties:
            pen.sampled_weight(ts)
    except ValueError as exc:
        _fail("cost", "effort/populations", str(exc))

    reg_node = doc.get("regulator", {})
    try:
        regulator = RegulatorSpec(
            mode=reg_node.get("mode", "arbitrary_phase"),
            c_r=float(reg_node.get("c_R", 1.0)),
            c_p=float(reg_node.get("c_P", 1.0)),
        )
    except ValueError as exc:
        _fail("regulator", "mode/c_R/c_P", str(exc))

    problem = Problem(
        model=model,
        grid=grid,
        x0=x0,
        terminal=terminal,
        incremental=incremental,
        regulator=regulator,
        gate=gate,
    )

    guess = _parse_guess(doc.get("guess"), problem, n, os.path.dirname(os.path.abspath(path)))

    solver_node = doc.get("solver", {})
    tol = float(solver_node.get("tol", 1e-6))
    max_iter = int(solver_node.get("max_iter", 100))
    if tol <= 0:
        _fail("solver", "tol", f"must be positive, got {tol}")
    if max_iter < 1:
        _fail("solver", "max_iter", f"must be at least 1, got {max_iter}")

    return LoadedProblem(title, problem, guess, tol, max_iter)


def _parse_guess(node, problem: Problem, n: int, base_dir: str) -> InitialGuess:
    if not isinstance(node, dict):
        _fail("guess", "-", "section is missing")
    kind = _require(node, "guess", "kind")
    ts = problem.grid.times()
    m = problem.model.n_controls

    if kind == "tanh_connect":
        if problem.gate is not None:
            _fail("guess", "kind", "tanh_connect applies to single-wavefunction problems")
        target = embed_state(_unit_vector(_require(node, "guess", "target"), "guess", "target", n))
        ramp = 0.5 * (np.tanh(2.0 * np.pi * ts / problem.grid.duration - np.pi) + 1.0)
        states = problem.x0 + ramp[:, None] * (target - problem.x0)
        # optional seed pulses break structural symmetries of the zero-input curve
        inputs = _parse_pulses(node, ts, m) if "pulse" in node else None
        return InitialGuess(states=states, inputs=inputs)

    if kind == "pulse":
        return InitialGuess(inputs=_parse_pulses(node, ts, m))

    if kind == "tabulated":
        if "trajectory_csv" in node:
            csv_path = os.path.join(base_dir, node["trajectory_csv"])
            try:
                times, states, inputs = read_trajectory_csv(csv_path)
            except (OSError, ValueError) as exc:
                _fail("guess", "trajectory_csv", str(exc))
            if len(times) != problem.grid.n_nodes:
                _fail(
                    "guess",
                    "trajectory_csv",
                    f"has {len(times)} rows, grid needs {problem.grid.n_nodes}",
                )
            return InitialGuess(states=states, inputs=inputs)
        states = node.get("states")
        inputs = node.get("inputs")
        if states is None and inputs is None:
            _fail("guess", "states/inputs", "tabulated guess needs states, inputs, or a CSV")
        return InitialGuess(
            states=None if states is None else np.asarray(states, dtype=float),
            inputs=None if inputs is None else np.asarray(inputs, dtype=float),
        )

    _fail("guess", "kind", f"unknown guess kind {kind!r}")


def _parse_pulses(node, ts, m) -> np.ndarray:
    pulses = node.get("pulse")
    if not isinstance(pulses, list) or len(pulses) != m:
        _fail("guess", "pulse", f"expected one pulse table per channel ({m})")
    inputs = np.zeros((len(ts), m))
    for j, pulse in enumerate(pulses):
        field = f"pulse[{j}]"

        def entry(key):
            if key not in pulse:
                _fail("guess", f"{field}.{key}", "required field is missing")
            return float(pulse[key])

        form = pulse.get("form")
        if form == "zero":
            continue
        if form == "gaussian_cosine":
            envelope = np.exp(-(((ts - entry("center")) / entry("width")) ** 2))
            inputs[:, j] = entry("amplitude") * envelope * np.cos(entry("carrier") * ts)
        elif form == "sine":
            inputs[:, j] = entry("amplitude") * np.sin(entry("frequency") * ts)
        else:
            _fail("guess", f"{field}.form", f"unknown pulse form {form!r}")
    return inputs


# --------------------------------------------------------------------------
# result serialization

def _format_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_trajectory_csv(path: str, grid: TimeGrid, states: np.ndarray, inputs: np.ndarray):
    nx = states.shape[1]
    m = inputs.shape[1]
    header = ["t"] + [f"x_{i + 1}" for i in range(nx)] + [f"u_{j + 1}" for j in range(m)]
    ts = grid.times()
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for i in range(grid.n_nodes):
            handle.write(_format_row([ts[i], *states[i], *inputs[i]]) + "\n")


def read_trajectory_csv(path: str):
    """Read a trajectory table back into (times, states, inputs)."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    nx = sum(1 for name in header if name.startswith("x_"))
    m = sum(1 for name in header if name.startswith("u_"))
    if header[0] != "t" or len(header) != 1 + nx + m:
        raise ValueError(f"{path} does not look like a trajectory table")
    data = np.asarray(rows, dtype=float)
    return data[:, 0], data[:, 1 : 1 + nx], data[:, 1 + nx :]


def population_header(n_levels: int, n_blocks: int):
    if n_blocks == 1:
        return [f"F_{k}" for k in range(n_levels)]
    return [f"b{b}_F{k}" for b in range(n_blocks) for k in range(n_levels)]


def write_populations_csv(path: str, grid: TimeGrid, pops: np.ndarray):
    """``pops`` has shape (nodes, n_blocks, n_levels)."""
    nodes, n_blocks, n_levels = pops.shape
    header = ["t"] + population_header(n_levels, n_blocks)
    ts = grid.times()
    flat = pops.reshape(nodes, n_blocks * n_levels)
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for i in range(nodes):
            handle.write(_format_row([ts[i], *flat[i]]) + "\n")


def record_to_json(rec) -> str:
    return json.dumps(
        {
            "iteration": rec.iteration,
            "cost": rec.cost,
            "descent": rec.descent,
            "sigma": rec.sigma,
            "step": rec.step_kind,
            "backtracks": rec.backtracks,
        }
    )


def write_convergence_jsonl(path: str, records):
    with open(path, "w") as handle:
        for rec in records:
            handle.write(record_to_json(rec) + "\n")


def write_summary_json(path: str, summary: dict):
    with open(path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=False)
        handle.write("\n")
