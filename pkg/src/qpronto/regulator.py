"""Finite-horizon LQR tracking gain around an arbitrary state-input curve.

The gain K_r(t) = R_r^-1 B^T P_r comes from integrating the differential
Riccati equation

    -dP/dt = A^T P + P A - K_r^T R_r K_r + Q_r,   P(T) = Pi_r,

backward with fixed-step RK4, linearly interpolating the gridded data at
half-steps and symmetrizing P after every step.  Weight choices:

* ``global_phase``   -- Q_r = I, R_r = c_R I, Pi_r = c_P I; penalizes any
  deviation from the reference, including its global phase;
* ``arbitrary_phase`` -- Q_r = Phi(alpha(t)), Pi_r = c_P Phi(alpha(T));
  the phase orbit of the reference is free.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curves import Curve, TimeGrid
from .embedding import phase_projector
from .errors import NonFiniteRiccati
from .hamiltonian import ControlHamiltonian, linearize_along

_MODES = ("global_phase", "arbitrary_phase")


@dataclass(frozen=True)
class RegulatorSpec:
    mode: str = "arbitrary_phase"
    c_r: float = 1.0
    c_p: float = 1.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown regulator mode {self.mode!r}; expected one of {_MODES}")
        if not self.c_r > 0:
            raise ValueError(f"c_R must be positive, got {self.c_r}")
        if self.c_p < 0:
            raise ValueError(f"c_P must be nonnegative, got {self.c_p}")


@dataclass(frozen=True)
class GainSchedule:
    """Time-indexed feedback gains (n_nodes, m, nx) plus an optional affine term."""

    gains: np.ndarray
    affine: Optional[np.ndarray] = None

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 3:
            raise ValueError(f"gains must be (n_nodes, m, nx), got {gains.shape}")
        if not np.isfinite(gains).all():
            raise ValueError("gain schedule contains non-finite entries")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        if self.affine is not None:
            affine = np.array(self.affine, dtype=float)
            affine.setflags(write=False)
            object.__setattr__(self, "affine", affine)

    @classmethod
    def zeros(cls, n_nodes: int, n_inputs: int, n_states: int) -> "GainSchedule":
        return cls(np.zeros((n_nodes, n_inputs, n_states)))


def build_regulator_costs(spec: RegulatorSpec, eta: Curve):
    """Tracking weights (Q_r(t), R_r, Pi_r) around the reference curve."""
    nx = eta.n_states
    r_r = spec.c_r * np.eye(eta.n_inputs)
    if spec.mode == "global_phase":
        q_r = np.broadcast_to(np.eye(nx), (eta.grid.n_nodes, nx, nx))
        return q_r, r_r, spec.c_p * np.eye(nx)
    q_r = np.stack([phase_projector(alpha) for alpha in eta.states])
    return q_r, r_r, spec.c_p * phase_projector(eta.states[-1])


def _time_indexed(arr: np.ndarray, n_nodes: int, rank: int = 2) -> np.ndarray:
    """Broadcast constant data of the given base rank to one entry per node."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == rank:
        return np.broadcast_to(arr, (n_nodes,) + arr.shape)
    if arr.ndim != rank + 1 or arr.shape[0] != n_nodes:
        raise ValueError(f"expected ({n_nodes}, ...) data of rank {rank + 1}, got {arr.shape}")
    return arr


def riccati_gain(a, b, q, r, p_final, grid: TimeGrid):
    """Backward sweep of the tracking Riccati equation.

    Accepts gridded or constant weights; returns (GainSchedule, P) with P
    symmetric at every node.  Raises :class:`NonFiniteRiccati` if the value
    matrix diverges.
    """
    nodes = grid.n_nodes
    a = _time_indexed(a, nodes)
    b = _time_indexed(b, nodes)
    q = _time_indexed(q, nodes)
    r = _time_indexed(r, nodes)
    dt = grid.dt
    nx, m = b.shape[1], b.shape[2]

    def rate(a_s, b_s, q_s, r_s, p):
        m_s = b_s.T @ p
        k_s = np.linalg.solve(r_s, m_s)
        return -(a_s.T @ p + p @ a_s - m_s.T @ k_s + q_s)

    p_traj = np.empty((nodes, nx, nx))
    p_traj[-1] = 0.5 * (p_final + p_final.T)
    p = p_traj[-1]
    for i in range(nodes - 2, -1, -1):
        a0, a1 = a[i + 1], a[i]
        b0, b1 = b[i + 1], b[i]
        q0, q1 = q[i + 1], q[i]
        r0, r1 = r[i + 1], r[i]
        am, bm, qm, rm = 0.5 * (a0 + a1), 0.5 * (b0 + b1), 0.5 * (q0 + q1), 0.5 * (r0 + r1)
        k1 = rate(a0, b0, q0, r0, p)
        k2 = rate(am, bm, qm, rm, p - 0.5 * dt * k1)
        k3 = rate(am, bm, qm, rm, p - 0.5 * dt * k2)
        k4 = rate(a1, b1, q1, r1, p - dt * k3)
        p = p - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = 0.5 * (p + p.T)
        if not np.isfinite(p).all():
            raise NonFiniteRiccati(
                f"regulator Riccati diverged at node {i}; grid too coarse or bad weights"
            )
        p_traj[i] = p

    gains = np.empty((nodes, m, nx))
    for i in range(nodes):
        gains[i] = np.linalg.solve(r[i], b[i].T @ p_traj[i])
    return GainSchedule(gains), p_traj


def solve_regulator(model: ControlHamiltonian, eta: Curve, spec: RegulatorSpec) -> GainSchedule:
    """Tracking gain K_r(t) for the projection operator around ``eta``."""
    a, b = linearize_along(model, eta.states, eta.inputs)
    q_r, r_r, pi_r = build_regulator_costs(spec, eta)
    gains, _ = riccati_gain(a, b, q_r, r_r, pi_r, eta.grid)
    return gains
