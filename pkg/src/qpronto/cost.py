"""Terminal and incremental costs with exact gradients and Hessians.

Terminal kinds:

* ``zero_phase``  -- 0.5 |x(T) - x_target|^2, the convex form of the
  phase-sensitive overlap cost 1 - Re<psi(T)|psi_target>;
* ``arbitrary_phase`` -- 0.5 x(T)^T G x(T) with G the embedded projector
  complement I - |psi_target><psi_target|, phase-agnostic;
* ``gate`` -- zero-phase cost against a stacked multi-wavefunction target
  (one block per active basis column).

The incremental cost is a strongly convex input effort 0.5 u^T R(t) u plus
optional population penalties 0.5 q(t) x^T G_pop x.  State-input cross
terms are not supported, so the mixed Hessian block is identically zero.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curves import Curve, TimeGrid, trapezoid
from .embedding import embed_quadratic, embed_state


# --------------------------------------------------------------------------
# scalar schedules

@dataclass(frozen=True)
class ConstantSchedule:
    value: float

    def sample(self, ts: np.ndarray) -> np.ndarray:
        return np.full(len(ts), float(self.value))


@dataclass(frozen=True)
class TanhRampSchedule:
    """scale * tanh(2 t + shift) + offset (the slope 2 matches the ramp
    r(t) = tanh(2t - T) used by the shipped problems)."""

    scale: float
    shift: float
    offset: float

    def sample(self, ts: np.ndarray) -> np.ndarray:
        return self.scale * np.tanh(2.0 * ts + self.shift) + self.offset


@dataclass(frozen=True)
class TabulatedSchedule:
    values: np.ndarray

    def sample(self, ts: np.ndarray) -> np.ndarray:
        values = np.asarray(self.values, dtype=float)
        if values.shape != ts.shape:
            raise ValueError(
                f"tabulated schedule has {values.shape[0]} samples, grid has {ts.shape[0]}"
            )
        return values.copy()


# --------------------------------------------------------------------------
# cost specification

@dataclass(frozen=True)
class EffortWeight:
    """Schedule of symmetric positive definite m x m input weights R(t)."""

    diagonal: Optional[tuple] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.diagonal is None) == (self.matrix is None):
            raise ValueError("specify exactly one of diagonal schedules or a constant matrix")
        if self.diagonal is not None:
            object.__setattr__(self, "diagonal", tuple(self.diagonal))

    @property
    def n_inputs(self) -> int:
        if self.diagonal is not None:
            return len(self.diagonal)
        return np.asarray(self.matrix).shape[0]

    def sample(self, ts: np.ndarray) -> np.ndarray:
        """R(t) at every node, validated positive definite."""
        m = self.n_inputs
        out = np.zeros((len(ts), m, m))
        if self.diagonal is not None:
            for j, sched in enumerate(self.diagonal):
                out[:, j, j] = sched.sample(ts)
        else:
            mat = np.asarray(self.matrix, dtype=float)
            if mat.shape != (m, m) or np.abs(mat - mat.T).max() > 1e-12 * max(np.abs(mat).max(), 1.0):
                raise ValueError("constant effort weight must be a symmetric matrix")
            out[:] = mat
        eigs = np.linalg.eigvalsh(out)
        if eigs.min() <= 0.0:
            raise ValueError(
                f"effort weight loses positive definiteness (min eigenvalue {eigs.min():.3e})"
            )
        return out


@dataclass(frozen=True)
class PopulationPenalty:
    """0.5 * weight(t) * x^T projector x with a pre-embedded projector."""

    weight: object
    projector: np.ndarray

    def __post_init__(self):
        proj = np.array(self.projector, dtype=float)
        proj.setflags(write=False)
        object.__setattr__(self, "projector", proj)

    @classmethod
    def on_state(cls, weight, phi) -> "PopulationPenalty":
        phi = np.asarray(phi, dtype=complex)
        return cls(weight, embed_quadratic(np.outer(phi, phi.conj())))

    def sampled_weight(self, ts: np.ndarray) -> np.ndarray:
        w = self.weight.sample(ts)
        if w.min() < 0.0:
            raise ValueError(f"population penalty weight must be >= 0, min is {w.min():.3e}")
        return w


@dataclass(frozen=True)
class IncrementalCost:
    effort: EffortWeight
    populations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "populations", tuple(self.populations))


@dataclass(frozen=True)
class TerminalCost:
    kind: str
    target: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero_phase", "arbitrary_phase", "gate"):
            raise ValueError(f"unknown terminal cost kind {self.kind!r}")
        for name in ("target", "weight"):
            val = getattr(self, name)
            if val is not None:
                arr = np.array(val, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.kind in ("zero_phase", "gate") and self.target is None:
            raise ValueError(f"{self.kind} terminal cost requires a target state")
        if self.kind == "arbitrary_phase" and self.weight is None:
            raise ValueError("arbitrary_phase terminal cost requires a weight matrix")

    @classmethod
    def zero_phase(cls, psi_target) -> "TerminalCost":
        return cls("zero_phase", target=embed_state(psi_target))

    @classmethod
    def arbitrary_phase(cls, psi_target) -> "TerminalCost":
        psi = np.asarray(psi_target, dtype=complex)
        gamma = np.eye(psi.size) - np.outer(psi, psi.conj())
        return cls("arbitrary_phase", target=embed_state(psi), weight=embed_quadratic(gamma))

    @classmethod
    def gate(cls, stacked_target_x) -> "TerminalCost":
        return cls("gate", target=np.asarray(stacked_target_x, dtype=float))

    def value(self, x_final: np.ndarray) -> float:
        if self.kind == "arbitrary_phase":
            return 0.5 * float(x_final @ self.weight @ x_final)
        err = x_final - self.target
        return 0.5 * float(err @ err)

    def gradient(self, x_final: np.ndarray) -> np.ndarray:
        if self.kind == "arbitrary_phase":
            return self.weight @ x_final
        return x_final - self.target

    def hessian(self, dim: int) -> np.ndarray:
        if self.kind == "arbitrary_phase":
            return self.weight.copy()
        return np.eye(dim)


@dataclass(frozen=True)
class QuadraticExpansion:
    """Exact first and second derivatives of the cost along a trajectory.

    ``pi``/``Pi`` are the terminal gradient and Hessian, the remaining
    fields are gridded: q (nodes, 2n), r (nodes, m), Q (nodes, 2n, 2n),
    S (nodes, 2n, m), R (nodes, m, m).
    """

    pi: np.ndarray
    Pi: np.ndarray
    q: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray


def eval_cost(terminal: TerminalCost, incremental: IncrementalCost, xi: Curve) -> float:
    """m(x(T)) plus the trapezoid-rule integral of the incremental cost."""
    ts = xi.grid.times()
    r_of_t = incremental.effort.sample(ts)
    integrand = 0.5 * np.einsum("ni,nij,nj->n", xi.inputs, r_of_t, xi.inputs)
    for pen in incremental.populations:
        w = pen.sampled_weight(ts)
        integrand += 0.5 * w * np.einsum("ni,ij,nj->n", xi.states, pen.projector, xi.states)
    return terminal.value(xi.states[-1]) + trapezoid(integrand, xi.grid.dt)


def expand(terminal: TerminalCost, incremental: IncrementalCost, xi: Curve) -> QuadraticExpansion:
    """Analytic quadratic expansion of the cost around ``xi``."""
    ts = xi.grid.times()
    nodes, nx = xi.states.shape
    m = xi.inputs.shape[1]

    r_of_t = incremental.effort.sample(ts)
    r_lin = np.einsum("nij,nj->ni", r_of_t, xi.inputs)

    q_lin = np.zeros((nodes, nx))
    q_quad = np.zeros((nodes, nx, nx))
    for pen in incremental.populations:
        w = pen.sampled_weight(ts)
        q_lin += w[:, None] * (xi.states @ pen.projector.T)
        q_quad += w[:, None, None] * pen.projector

    return QuadraticExpansion(
        pi=terminal.gradient(xi.states[-1]),
        Pi=terminal.hessian(nx),
        q=q_lin,
        r=r_lin,
        Q=q_quad,
        S=np.zeros((nodes, nx, m)),
        R=r_of_t,
    )


def directional_derivative(expansion: QuadraticExpansion, zeta, grid: TimeGrid) -> float:
    """First cost variation pi.z(T) + integral of (q.z + r.v)."""
    integrand = np.einsum("ni,ni->n", expansion.q, zeta.z) + np.einsum(
        "ni,ni->n", expansion.r, zeta.v
    )
    return float(expansion.pi @ zeta.z[-1]) + trapezoid(integrand, grid.dt)
