"""Control Hamiltonian H(u) = H0 + sum_j Hj fj(uj) in real coordinates.

Each channel owns a scalar C^2 function of its own input component, so the
mixed second partials d^2H/dui duj vanish for i != j and the second-order
term of the vector field H(u)x is diagonal in the channel index.
"""

from dataclasses import dataclass

import numpy as np

from .embedding import embed_generator

SKEW_RTOL = 1e-12

_FN_KINDS = ("identity", "sin", "one_minus_cos", "scaled_affine")


@dataclass(frozen=True)
class ChannelFunction:
    """Scalar channel nonlinearity with value, slope, and curvature.

    ``scaled_affine`` evaluates ``a * u + b``; the other kinds ignore the
    parameters.
    """

    kind: str = "identity"
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in _FN_KINDS:
            raise ValueError(f"unknown channel function {self.kind!r}; expected one of {_FN_KINDS}")

    def value(self, u):
        if self.kind == "identity":
            return np.asarray(u, dtype=float)
        if self.kind == "sin":
            return np.sin(u)
        if self.kind == "one_minus_cos":
            return 1.0 - np.cos(u)
        return self.a * np.asarray(u, dtype=float) + self.b

    def slope(self, u):
        if self.kind == "identity":
            return np.ones_like(np.asarray(u, dtype=float))
        if self.kind == "sin":
            return np.cos(u)
        if self.kind == "one_minus_cos":
            return np.sin(u)
        return np.full_like(np.asarray(u, dtype=float), self.a)

    def curvature(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "sin":
            return -np.sin(u)
        if self.kind == "one_minus_cos":
            return np.cos(u)
        return np.zeros_like(u)


IDENTITY_FN = ChannelFunction("identity")


def _check_skew(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.array(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
        raise ValueError(f"{what} must be square with even dimension, got {mat.shape}")
    scale = max(np.abs(mat).max(), 1.0)
    defect = np.abs(mat + mat.T).max()
    if defect > SKEW_RTOL * scale:
        raise ValueError(f"{what} is not skew-symmetric: max|M + M^T| = {defect:.3e}")
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class ControlHamiltonian:
    """Drift generator plus control channels, all in real 2n x 2n form."""

    drift: np.ndarray
    couplings: tuple
    functions: tuple

    def __post_init__(self):
        drift = _check_skew(self.drift, "drift generator")
        object.__setattr__(self, "drift", drift)
        couplings = tuple(
            _check_skew(h, f"channel {j} generator") for j, h in enumerate(self.couplings)
        )
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "functions", tuple(self.functions))
        if len(couplings) != len(self.functions):
            raise ValueError("one channel function is required per coupling matrix")
        for h in couplings:
            if h.shape != drift.shape:
                raise ValueError("all channel generators must match the drift dimension")

    @classmethod
    def from_complex(cls, h0, channels) -> "ControlHamiltonian":
        """Build from a Hermitian drift and (Hermitian, ChannelFunction) pairs."""
        couplings = []
        functions = []
        for hj, fn in channels:
            couplings.append(embed_generator(hj))
            functions.append(fn)
        return cls(embed_generator(h0), tuple(couplings), tuple(functions))

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_levels(self) -> int:
        return self.dim // 2

    @property
    def n_controls(self) -> int:
        return len(self.couplings)


def eval_generator(model: ControlHamiltonian, u: np.ndarray) -> np.ndarray:
    """H(u) = H0 + sum_j Hj fj(uj); skew-symmetric for any input."""
    out = model.drift.copy()
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        out += float(fn.value(u[j])) * hj
    return out


def linearize(model: ControlHamiltonian, x: np.ndarray, u: np.ndarray):
    """First derivative of the vector field H(u)x at (x, u).

    Returns ``A = H(u)`` and ``B`` whose j-th column is ``Hj fj'(uj) x``.
    """
    a = eval_generator(model, u)
    b = np.empty((model.dim, model.n_controls))
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        b[:, j] = float(fn.slope(u[j])) * (hj @ x)
    return a, b


def second_order_term(model: ControlHamiltonian, x, u, z, v) -> np.ndarray:
    """Second directional derivative of H(u)x along the perturbation (z, v).

    Equals ``2 sum_j (dH/duj) vj z + sum_j (d2H/duj^2) vj^2 x``; the mixed
    channel partials vanish because each fj depends on uj alone.
    """
    out = np.zeros(model.dim)
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        out += 2.0 * float(fn.slope(u[j])) * v[j] * (hj @ z)
        curv = float(fn.curvature(u[j]))
        if curv != 0.0:
            out += curv * v[j] * v[j] * (hj @ x)
    return out


def generators_along(model: ControlHamiltonian, inputs: np.ndarray) -> np.ndarray:
    """H(u(t)) at every grid node, shape (n_nodes, 2n, 2n)."""
    inputs = np.asarray(inputs, dtype=float)
    out = np.broadcast_to(model.drift, (inputs.shape[0],) + model.drift.shape).copy()
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        out += fn.value(inputs[:, j])[:, None, None] * hj
    return out


def linearize_along(model: ControlHamiltonian, states: np.ndarray, inputs: np.ndarray):
    """Gridded linearization (A(t), B(t)) along a state-input curve."""
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    a = generators_along(model, inputs)
    b = np.empty((states.shape[0], model.dim, model.n_controls))
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        b[:, :, j] = fn.slope(inputs[:, j])[:, None] * (states @ hj.T)
    return a, b
