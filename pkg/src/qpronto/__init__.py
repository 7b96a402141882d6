"""Projected-Newton trajectory optimization for closed quantum systems.

The solver works on the real embedding of the Schrodinger dynamics: curves
of state-input samples are projected onto the trajectory manifold by a
closed-loop simulation with an LQR tracking gain, and descent directions
come from a per-iteration linear-quadratic subproblem solved by backward
Riccati sweeps.
"""

from .cost import (
    ConstantSchedule,
    EffortWeight,
    IncrementalCost,
    PopulationPenalty,
    QuadraticExpansion,
    TabulatedSchedule,
    TanhRampSchedule,
    TerminalCost,
    eval_cost,
    expand,
)
from .curves import Curve, TangentCurve, TimeGrid, Trajectory, displace, trapezoid
from .embedding import (
    embed_generator,
    embed_quadratic,
    embed_state,
    extract_state,
    phase_projector,
)
from .errors import (
    ArmijoStall,
    MaxIterationsExceeded,
    NonFiniteError,
    NonFiniteRiccati,
    ProblemFormatError,
    QprontoError,
    RiccatiFailure,
)
from .gates import GateProblem, block_wavefunctions, gate_fidelity, populations, stack_problem
from .hamiltonian import (
    ChannelFunction,
    ControlHamiltonian,
    eval_generator,
    linearize,
    linearize_along,
    second_order_term,
)
from .newton import (
    LqSolution,
    NewtonWeights,
    compute_update,
    curvature_terms,
    full_newton_weights,
    quasi_newton_weights,
    solve_adjoint,
    solve_lq,
)
from .problem_io import LoadedProblem, load_problem
from .projection import project, tangent_project, tangent_defect, trajectory_defect
from .regulator import (
    GainSchedule,
    RegulatorSpec,
    build_regulator_costs,
    riccati_gain,
    solve_regulator,
)
from .solver import (
    ConvergenceRecord,
    InitialGuess,
    Problem,
    SolveResult,
    SolverOptions,
    armijo_search,
    build_initial_curve,
    solve,
)

__version__ = "0.1.0"
