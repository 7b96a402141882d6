"""Stacked multi-wavefunction problems for unitary gate synthesis.

A gate problem evolves one copy of the base system per *active* target
column, all driven by the shared input.  Columns outside the active set
carry no terminal or incremental cost and cannot influence the optimizer,
so they are simply not simulated; for the X-gate on a three-level system
this reproduces the two coupled Schrodinger equations of the original
optimal control problem.
"""

from dataclasses import dataclass

import numpy as np

from .cost import TerminalCost
from .curves import Trajectory
from .embedding import embed_state
from .hamiltonian import ControlHamiltonian

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class GateProblem:
    """Base system (complex matrices), target unitary, and active columns."""

    drift: np.ndarray
    couplings: tuple
    functions: tuple
    target: np.ndarray
    active: tuple

    def __post_init__(self):
        drift = np.array(self.drift, dtype=complex)
        target = np.array(self.target, dtype=complex)
        drift.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "target", target)
        object.__setattr__(
            self, "couplings", tuple(np.asarray(h, dtype=complex) for h in self.couplings)
        )
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "active", tuple(int(i) for i in self.active))

        n = drift.shape[0]
        if target.shape != (n, n):
            raise ValueError(f"target must be {n} x {n}, got {target.shape}")
        gram = target.conj().T @ target
        defect = np.abs(gram - np.eye(n)).max()
        if defect > ORTHONORMAL_TOL:
            raise ValueError(f"target columns are not orthonormal: max|U^dag U - I| = {defect:.3e}")
        if not self.active:
            raise ValueError("at least one active column is required")
        if len(set(self.active)) != len(self.active) or not all(
            0 <= i < n for i in self.active
        ):
            raise ValueError(f"active columns must be distinct indices below {n}")

    @property
    def n_levels(self) -> int:
        return self.drift.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.active)


def stack_problem(gate: GateProblem):
    """Replicate the base system once per active column.

    Returns the stacked real model, the stacked initial state (basis vector
    per block), and the terminal cost 0.5 sum_i |psi_i(T) - U_i|^2 over the
    active columns.
    """
    d = gate.n_blocks
    n = gate.n_levels
    eye_d = np.eye(d)
    model = ControlHamiltonian.from_complex(
        np.kron(eye_d, gate.drift),
        [(np.kron(eye_d, hj), fn) for hj, fn in zip(gate.couplings, gate.functions)],
    )
    psi0 = np.zeros(d * n, dtype=complex)
    targets = np.zeros(d * n, dtype=complex)
    for block, col in enumerate(gate.active):
        psi0[block * n + col] = 1.0
        targets[block * n : (block + 1) * n] = gate.target[:, col]
    return model, embed_state(psi0), TerminalCost.gate(embed_state(targets))


def stack_projector(gate: GateProblem, projector: np.ndarray) -> np.ndarray:
    """Lift a per-wavefunction complex operator to every stacked block."""
    return np.kron(np.eye(gate.n_blocks), np.asarray(projector, dtype=complex))


def block_wavefunctions(x: np.ndarray, n_levels: int, n_blocks: int = 1) -> np.ndarray:
    """Split a stacked real state into its complex wavefunction blocks."""
    x = np.asarray(x, dtype=float)
    half = n_levels * n_blocks
    if x.size != 2 * half:
        raise ValueError(f"expected a real vector of length {2 * half}, got {x.size}")
    re = x[:half].reshape(n_blocks, n_levels)
    im = x[half:].reshape(n_blocks, n_levels)
    return re + 1j * im


def populations(states: np.ndarray, n_levels: int, n_blocks: int = 1) -> np.ndarray:
    """Level occupations |<n|psi_b(t)>|^2, shape (nodes, n_blocks, n_levels)."""
    states = np.asarray(states, dtype=float)
    half = n_levels * n_blocks
    re = states[:, :half].reshape(-1, n_blocks, n_levels)
    im = states[:, half:].reshape(-1, n_blocks, n_levels)
    return re * re + im * im


def gate_fidelity(xi: Trajectory, gate: GateProblem) -> float:
    """Overlap fidelity (d + |Tr(U U_targ^dag)|^2) / (d^2 + d) on the active
    computational subspace; leakage out of it lowers the trace naturally."""
    d = gate.n_blocks
    psi = block_wavefunctions(xi.states[-1], gate.n_levels, d)
    active = list(gate.active)
    u_achieved = psi[:, active].T
    u_target = gate.target[np.ix_(active, active)]
    tr = np.trace(u_achieved @ u_target.conj().T)
    return float((d + abs(tr) ** 2) / (d * d + d))
