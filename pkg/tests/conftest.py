import time

import numpy as np
import pytest

import qpronto as qp
from qpronto.problem_io import load_problem


def shipped(name):
    from qpronto.cli import resolve_problem_path

    return load_problem(resolve_problem_path(name))


@pytest.fixture()
def rng():
    # fresh fixed-seed generator per test keeps draws order-independent
    return np.random.default_rng(20240817)


def _run(name, use_regulator=True, tol=None, max_iter=None):
    loaded = shipped(name)
    opts = qp.SolverOptions(
        tol=tol if tol is not None else loaded.tol,
        max_iter=max_iter if max_iter is not None else loaded.max_iter,
        use_regulator=use_regulator,
    )
    start = time.monotonic()
    result = qp.solve(loaded.problem, loaded.guess, opts)
    runtime = time.monotonic() - start
    return {"loaded": loaded, "result": result, "runtime": runtime}


@pytest.fixture(scope="session")
def lambda_effort_run():
    return _run("lambda_effort")


@pytest.fixture(scope="session")
def lambda_penalty_run():
    return _run("lambda_penalty")


@pytest.fixture(scope="session")
def lambda_effort_noreg_run():
    return _run("lambda_effort", use_regulator=False)


@pytest.fixture(scope="session")
def flux_effort_run():
    return _run("fluxonium_xgate_effort")


@pytest.fixture(scope="session")
def flux_penalty_run():
    return _run("fluxonium_xgate_penalty")


# small two-level transfer problem used across unit tests
TOY_PROBLEM_TOML = """\
title = "toy"

[system]
n = 2
x0 = {level = 0}
H0 = {real = [[0.0, 0.0], [0.0, 1.0]]}

[[system.channels]]
fj_kind = "identity"
Hj = {real = [[0.0, 0.5], [0.5, 0.0]]}

[horizon]
T = 3.0
N = 60

[cost.terminal]
kind = "zero_phase"
target = {level = 1}

[cost.effort]
diagonal = [{kind = "constant", value = 0.1}]

[regulator]
mode = "global_phase"
c_R = 1.0
c_P = 1.0

[guess]
kind = "tanh_connect"
target = {level = 1}

[solver]
tol = 1e-6
max_iter = 60
"""


@pytest.fixture()
def toy_problem_path(tmp_path):
    path = tmp_path / "toy.toml"
    path.write_text(TOY_PROBLEM_TOML)
    return str(path)


def build_toy_problem(steps=60):
    h0 = np.diag([0.0, 1.0]).astype(complex)
    hx = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
    model = qp.ControlHamiltonian.from_complex(h0, [(hx, qp.ChannelFunction("identity"))])
    grid = qp.TimeGrid(3.0, steps)
    terminal = qp.TerminalCost.zero_phase(np.array([0.0, 1.0], dtype=complex))
    incremental = qp.IncrementalCost(qp.EffortWeight(diagonal=(qp.ConstantSchedule(0.1),)))
    return qp.Problem(
        model,
        grid,
        qp.embed_state([1.0, 0.0]),
        terminal,
        incremental,
        qp.RegulatorSpec("global_phase", 1.0, 1.0),
    )


def toy_guess(problem):
    ts = problem.grid.times()
    ramp = 0.5 * (np.tanh(2 * np.pi * ts / problem.grid.duration - np.pi) + 1.0)
    target = qp.embed_state([0.0, 1.0])
    states = problem.x0 + ramp[:, None] * (target - problem.x0)
    return qp.InitialGuess(states=states)


def random_model(rng, n=3, m=2, kinds=("identity", "sin", "one_minus_cos"), scale=1.0):
    """Random control Hamiltonian with a mix of channel nonlinearities."""
    from oracles import random_hermitian

    channels = []
    for j in range(m):
        fn = qp.ChannelFunction(kinds[j % len(kinds)])
        channels.append((random_hermitian(n, rng, scale), fn))
    return qp.ControlHamiltonian.from_complex(random_hermitian(n, rng, scale), channels)
