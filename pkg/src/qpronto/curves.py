"""Time grids and discretized state-input data.

All curves, trajectories, and gain schedules in a problem share one uniform
grid of ``steps + 1`` nodes.  A :class:`Curve` is an arbitrary pair of
state and input samples; a :class:`Trajectory` is a curve produced by the
closed-loop projection and therefore consistent with the discrete dynamics.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, duration] with ``steps`` RK4 steps."""

    duration: float
    steps: int

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"horizon must be positive, got {self.duration}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.duration / self.steps

    @property
    def n_nodes(self) -> int:
        return self.steps + 1

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.steps + 1)


def _frozen_array(obj, name, value, dtype=float):
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True)
class Curve:
    """State samples (n_nodes, nx) paired with input samples (n_nodes, m)."""

    grid: TimeGrid
    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = _frozen_array(self, "states", self.states)
        inputs = _frozen_array(self, "inputs", self.inputs)
        nodes = self.grid.n_nodes
        if states.ndim != 2 or states.shape[0] != nodes:
            raise ValueError(f"states must be ({nodes}, nx), got {states.shape}")
        if inputs.ndim != 2 or inputs.shape[0] != nodes:
            raise ValueError(f"inputs must be ({nodes}, m), got {inputs.shape}")

    @property
    def n_states(self) -> int:
        return self.states.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class Trajectory(Curve):
    """A curve lying on the trajectory manifold (image of the projection)."""


@dataclass(frozen=True)
class TangentCurve:
    """Linearized-dynamics perturbation [z(t), v(t)] with z(0) = 0."""

    grid: TimeGrid
    z: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        z = _frozen_array(self, "z", self.z)
        v = _frozen_array(self, "v", self.v)
        nodes = self.grid.n_nodes
        if z.ndim != 2 or z.shape[0] != nodes:
            raise ValueError(f"z must be ({nodes}, nx), got {z.shape}")
        if v.ndim != 2 or v.shape[0] != nodes:
            raise ValueError(f"v must be ({nodes}, m), got {v.shape}")
        if z.size and np.abs(z[0]).max() > 1e-12:
            raise ValueError("tangent curves start from z(0) = 0")


def displace(xi: Curve, zeta: TangentCurve, sigma: float) -> Curve:
    """Gridwise affine combination ``xi + sigma * zeta`` (generally off-manifold)."""
    return Curve(xi.grid, xi.states + sigma * zeta.z, xi.inputs + sigma * zeta.v)


def trapezoid(values: np.ndarray, dt: float) -> float:
    """Composite trapezoid rule for node samples of an integrand."""
    values = np.asarray(values, dtype=float)
    return dt * (values.sum(axis=0) - 0.5 * (values[0] + values[-1]))
