"""Projected Newton main loop with regulator tracking and Armijo backtracking.

Each iteration linearizes the dynamics around the current trajectory,
rebuilds the tracking regulator, solves the adjoint equation, attempts the
full-Newton LQ subproblem (falling back to quasi-Newton weights if its
Riccati sweep fails), prices the step, and line-searches the projected
update.  The loop exits when the predicted decrease -Dg drops below the
tolerance.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cost import IncrementalCost, TerminalCost, eval_cost, expand
from .curves import Curve, TimeGrid, Trajectory, displace
from .errors import ArmijoStall, MaxIterationsExceeded, RiccatiFailure
from .gates import GateProblem
from .hamiltonian import ControlHamiltonian, linearize_along
from .newton import (
    compute_update,
    curvature_terms,
    full_newton_weights,
    quasi_newton_weights,
    solve_adjoint,
    solve_lq,
)
from .projection import project
from .regulator import GainSchedule, RegulatorSpec, build_regulator_costs, riccati_gain

X0_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Exit tolerance on -Dg, iteration budget, and Armijo constants."""

    tol: float = 1e-6
    max_iter: int = 100
    armijo_alpha: float = 0.4
    armijo_beta: float = 0.7
    sigma_cap_coeff: float = 0.6
    sigma_min: float = 1e-8
    use_regulator: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.armijo_alpha < 1 or not 0 < self.armijo_beta < 1:
            raise ValueError("Armijo constants must lie strictly between 0 and 1")


@dataclass(frozen=True)
class Problem:
    """Everything needed to run the solver on one optimal control problem."""

    model: ControlHamiltonian
    grid: TimeGrid
    x0: np.ndarray
    terminal: TerminalCost
    incremental: IncrementalCost
    regulator: RegulatorSpec = RegulatorSpec()
    gate: Optional[GateProblem] = None

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if x0.shape != (self.model.dim,):
            raise ValueError(f"x0 must have length {self.model.dim}, got {x0.shape}")

    @property
    def n_blocks(self) -> int:
        return self.gate.n_blocks if self.gate is not None else 1

    @property
    def n_levels(self) -> int:
        return self.model.n_levels // self.n_blocks


@dataclass(frozen=True)
class InitialGuess:
    """State and/or input samples seeding the solver.

    Provide both for a full curve, inputs alone (states filled by open-loop
    simulation), or states alone (inputs set to zero).  Any provided state
    curve is pinned to the problem's initial state.
    """

    states: Optional[np.ndarray] = None
    inputs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.states is None and self.inputs is None:
            raise ValueError("an initial guess needs states, inputs, or both")


@dataclass(frozen=True)
class ConvergenceRecord:
    iteration: int
    cost: float
    descent: float
    sigma: float
    step_kind: str
    backtracks: int


@dataclass
class SolveResult:
    trajectory: Trajectory
    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return sum(1 for rec in self.records if rec.sigma > 0.0)

    @property
    def final_cost(self) -> float:
        return self.records[-1].cost if self.records else float("nan")

    @property
    def final_descent(self) -> float:
        return self.records[-1].descent if self.records else float("nan")


def build_initial_curve(problem: Problem, guess: InitialGuess) -> Curve:
    """Assemble the starting curve, simulating states open-loop if absent."""
    grid = problem.grid
    nodes = grid.n_nodes
    m = problem.model.n_controls
    if guess.inputs is not None:
        inputs = np.array(guess.inputs, dtype=float)
        if inputs.shape != (nodes, m):
            raise ValueError(f"guess inputs must be ({nodes}, {m}), got {inputs.shape}")
    else:
        inputs = np.zeros((nodes, m))

    if guess.states is not None:
        states = np.array(guess.states, dtype=float)
        if states.shape != (nodes, problem.model.dim):
            raise ValueError(
                f"guess states must be ({nodes}, {problem.model.dim}), got {states.shape}"
            )
        if np.linalg.norm(states[0] - problem.x0) > X0_MATCH_TOL:
            states[0] = problem.x0
        return Curve(grid, states, inputs)

    zero_gain = GainSchedule.zeros(nodes, m, problem.model.dim)
    seed = Curve(grid, np.broadcast_to(problem.x0, (nodes, problem.model.dim)), inputs)
    open_loop = project(problem.model, seed, zero_gain)
    return Curve(grid, open_loop.states, inputs)


def _regulator_gain(problem: Problem, reference: Curve, opts: SolverOptions) -> GainSchedule:
    if not opts.use_regulator:
        return GainSchedule.zeros(
            problem.grid.n_nodes, problem.model.n_controls, problem.model.dim
        )
    a, b = linearize_along(problem.model, reference.states, reference.inputs)
    q_r, r_r, pi_r = build_regulator_costs(problem.regulator, reference)
    gains, _ = riccati_gain(a, b, q_r, r_r, pi_r, problem.grid)
    return gains


def armijo_search(problem, xi, zeta, descent, cost, gains, opts: SolverOptions):
    """Backtracking line search on the projected update.

    The initial step is capped so the state perturbation stays within a
    fixed fraction of the initial-state norm; acceptance requires
    g(sigma) <= g + alpha * sigma * Dg.  Raises :class:`ArmijoStall` when
    sigma shrinks below ``sigma_min`` without sufficient decrease.
    """
    if not descent < 0:
        raise ValueError(f"line search requires a descent direction, got Dg = {descent}")
    peak = float(np.linalg.norm(zeta.z, axis=1).max())
    x0_norm = float(np.linalg.norm(problem.x0))
    sigma = 1.0 if peak <= 0 else min(1.0, opts.sigma_cap_coeff * x0_norm / peak)

    backtracks = 0
    while sigma >= opts.sigma_min:
        candidate = project(problem.model, displace(xi, zeta, sigma), gains)
        trial_cost = eval_cost(problem.terminal, problem.incremental, candidate)
        if trial_cost <= cost + opts.armijo_alpha * sigma * descent:
            return candidate, trial_cost, sigma, backtracks
        sigma *= opts.armijo_beta
        backtracks += 1
    raise ArmijoStall(f"no sufficient decrease above sigma = {opts.sigma_min:g}")


def solve(
    problem: Problem,
    guess: InitialGuess,
    opts: SolverOptions = SolverOptions(),
    on_iteration=None,
) -> SolveResult:
    """Run the projected Newton loop from an initial guess.

    Returns the final trajectory and the per-iteration convergence records.
    Raises :class:`MaxIterationsExceeded` or :class:`ArmijoStall` with the
    partial result attached when the loop terminates abnormally.
    """
    grid = problem.grid
    eta = build_initial_curve(problem, guess)
    gains = _regulator_gain(problem, eta, opts)
    xi = project(problem.model, eta, gains)
    cost = eval_cost(problem.terminal, problem.incremental, xi)

    records = []

    def record(iteration, cost_at_start, descent, sigma, kind, backtracks):
        rec = ConvergenceRecord(iteration, cost_at_start, descent, sigma, kind, backtracks)
        records.append(rec)
        if on_iteration is not None:
            on_iteration(rec)

    for iteration in range(opts.max_iter):
        cost_k = cost
        a, b = linearize_along(problem.model, xi.states, xi.inputs)
        expansion = expand(problem.terminal, problem.incremental, xi)
        gains = _regulator_gain(problem, xi, opts)
        chi = solve_adjoint(a, b, gains, expansion.q, expansion.r, expansion.pi, grid)

        s_tilde, r_tilde = curvature_terms(problem.model, xi, chi)
        try:
            weights = full_newton_weights(expansion, s_tilde, r_tilde)
            lq = solve_lq(a, b, weights, expansion.q, expansion.r, expansion.pi, grid)
            zeta, descent = compute_update(a, b, lq, expansion, grid)
            if descent > 0:
                raise RiccatiFailure("full Newton step is not a descent direction")
        except RiccatiFailure:
            weights = quasi_newton_weights(expansion)
            lq = solve_lq(a, b, weights, expansion.q, expansion.r, expansion.pi, grid)
            zeta, descent = compute_update(a, b, lq, expansion, grid)

        if -descent < opts.tol:
            record(iteration, cost_k, descent, 0.0, weights.kind, 0)
            return SolveResult(xi, records, converged=True)

        try:
            xi, cost, sigma, backtracks = armijo_search(
                problem, xi, zeta, descent, cost_k, gains, opts
            )
        except ArmijoStall as stall:
            record(iteration, cost_k, descent, 0.0, weights.kind, 0)
            stall.result = SolveResult(xi, records, converged=False)
            raise
        record(iteration, cost_k, descent, sigma, weights.kind, backtracks)

    raise MaxIterationsExceeded(
        f"descent tolerance {opts.tol:g} not reached in {opts.max_iter} iterations",
        result=SolveResult(xi, records, converged=False),
    )
