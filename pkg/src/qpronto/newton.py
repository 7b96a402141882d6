"""Per-iteration LQ subproblem: adjoint state, curvature terms, Riccati sweep.

The full Newton weights add the second-order terms (S~, R~) built from the
adjoint to the plain cost Hessians; when the resulting Riccati sweep fails
(indefinite input weight, blow-up, or non-finite values) the caller retries
with the quasi-Newton weights, which are positive semi-definite by
construction.
"""

from dataclasses import dataclass

import numpy as np

from .cost import QuadraticExpansion
from .curves import TangentCurve, TimeGrid, trapezoid
from .errors import NonFiniteError, RiccatiFailure
from .hamiltonian import ControlHamiltonian
from .projection import closed_loop_linear_rollout
from .regulator import GainSchedule, _time_indexed

R_MIN_EIG = 1e-10
P_MAX_NORM = 1e12


@dataclass(frozen=True)
class NewtonWeights:
    """LQ weights (Q(t), S(t), R(t), Pi) tagged full or quasi Newton."""

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    Pi: np.ndarray
    kind: str = "full_newton"


@dataclass(frozen=True)
class LqSolution:
    """Optimizer feedback K_o(t), affine term v_o(t), and value function (P, p)."""

    gains: np.ndarray
    affine: np.ndarray
    P: np.ndarray
    p: np.ndarray


def solve_adjoint(a, b, gains: GainSchedule, q, r, pi, grid: TimeGrid) -> np.ndarray:
    """Backward RK4 of -chi' = (A - B K_r)^T chi + q - K_r^T r, chi(T) = pi.

    With K_r = 0 this is the plain co-state equation -chi' = A^T chi + q.
    """
    nodes = grid.n_nodes
    a = _time_indexed(a, nodes)
    b = _time_indexed(b, nodes)
    q = _time_indexed(q, nodes, rank=1)
    r = _time_indexed(r, nodes, rank=1)
    k = gains.gains
    a_cl = a - np.einsum("nij,njk->nik", b, k)
    w = q - np.einsum("nji,nj->ni", k, r)
    dt = grid.dt

    chi = np.empty((nodes, a.shape[1]))
    chi[-1] = pi
    cur = chi[-1]
    for i in range(nodes - 2, -1, -1):
        a0, a1 = a_cl[i + 1], a_cl[i]
        w0, w1 = w[i + 1], w[i]
        am, wm = 0.5 * (a0 + a1), 0.5 * (w0 + w1)
        k1 = -(a0.T @ cur + w0)
        k2 = -(am.T @ (cur - 0.5 * dt * k1) + wm)
        k3 = -(am.T @ (cur - 0.5 * dt * k2) + wm)
        k4 = -(a1.T @ (cur - dt * k3) + w1)
        cur = cur - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(cur).all():
            raise NonFiniteError(f"adjoint sweep diverged at node {i}")
        chi[i] = cur
    return chi


def curvature_terms(model: ControlHamiltonian, xi, chi: np.ndarray):
    """Second-order weight corrections (S~(t), R~(t)) from the adjoint.

    Column j of S~ is (Hj fj'(uj))^T chi; R~ is diagonal with entries
    chi^T Hj fj''(uj) x (mixed channel partials vanish).  For every tangent
    direction, [z; v]^T [[0, S~], [S~^T, R~]] [z; v] equals the adjoint
    contraction with the second-order term of the vector field.
    """
    nodes = chi.shape[0]
    nx = model.dim
    m = model.n_controls
    s_t = np.zeros((nodes, nx, m))
    r_t = np.zeros((nodes, m, m))
    for j, (hj, fn) in enumerate(zip(model.couplings, model.functions)):
        slope = fn.slope(xi.inputs[:, j])
        s_t[:, :, j] = slope[:, None] * (chi @ hj)
        curv = fn.curvature(xi.inputs[:, j])
        if np.any(curv != 0.0):
            r_t[:, j, j] = curv * np.einsum("ni,ni->n", chi, xi.states @ hj.T)
    return s_t, r_t


def full_newton_weights(expansion: QuadraticExpansion, s_tilde, r_tilde) -> NewtonWeights:
    return NewtonWeights(
        Q=expansion.Q,
        S=expansion.S + s_tilde,
        R=expansion.R + r_tilde,
        Pi=expansion.Pi,
        kind="full_newton",
    )


def quasi_newton_weights(expansion: QuadraticExpansion) -> NewtonWeights:
    return NewtonWeights(
        Q=expansion.Q, S=expansion.S, R=expansion.R, Pi=expansion.Pi, kind="quasi_newton"
    )


def solve_lq(a, b, weights: NewtonWeights, q, r, pi, grid: TimeGrid) -> LqSolution:
    """Backward sweep of the coupled optimizer Riccati system.

        -P' = A^T P + P A - K_o^T R K_o + Q,      P(T) = Pi,
        -p' = (A - B K_o)^T p - K_o^T r^T + q^T,  p(T) = pi,
         K_o = R^-1 (B^T P + S^T),  v_o = R^-1 (B^T p + r^T).

    Raises :class:`RiccatiFailure` when R(t) is not positive definite on the
    grid, when |P| exceeds the blow-up bound, or when values become
    non-finite; the caller then falls back to quasi-Newton weights.
    """
    nodes = grid.n_nodes
    a = _time_indexed(a, nodes)
    b = _time_indexed(b, nodes)
    w_q = _time_indexed(weights.Q, nodes)
    w_s = _time_indexed(weights.S, nodes)
    w_r = _time_indexed(weights.R, nodes)
    q = _time_indexed(q, nodes, rank=1)
    r = _time_indexed(r, nodes, rank=1)
    eigs = np.linalg.eigvalsh(w_r)
    if eigs.min() <= R_MIN_EIG:
        raise RiccatiFailure(
            f"input weight loses positive definiteness (min eigenvalue {eigs.min():.3e})"
        )
    dt = grid.dt
    nx, m = b.shape[1], b.shape[2]

    def rates(a_s, b_s, q_s, s_s, r_s, ql_s, rl_s, p_mat, p_vec):
        m_s = b_s.T @ p_mat + s_s.T
        k_o = np.linalg.solve(r_s, m_s)
        p_mat_dot = -(a_s.T @ p_mat + p_mat @ a_s - m_s.T @ k_o + q_s)
        p_vec_dot = -((a_s - b_s @ k_o).T @ p_vec - k_o.T @ rl_s + ql_s)
        return p_mat_dot, p_vec_dot

    p_traj = np.empty((nodes, nx, nx))
    p_vec_traj = np.empty((nodes, nx))
    p_mat = 0.5 * (weights.Pi + weights.Pi.T)
    p_vec = np.asarray(pi, dtype=float).copy()
    p_traj[-1] = p_mat
    p_vec_traj[-1] = p_vec

    def data(i):
        return a[i], b[i], w_q[i], w_s[i], w_r[i], q[i], r[i]

    for i in range(nodes - 2, -1, -1):
        d0 = data(i + 1)
        d1 = data(i)
        dm = tuple(0.5 * (x0 + x1) for x0, x1 in zip(d0, d1))
        k1p, k1v = rates(*d0, p_mat, p_vec)
        k2p, k2v = rates(*dm, p_mat - 0.5 * dt * k1p, p_vec - 0.5 * dt * k1v)
        k3p, k3v = rates(*dm, p_mat - 0.5 * dt * k2p, p_vec - 0.5 * dt * k2v)
        k4p, k4v = rates(*d1, p_mat - dt * k3p, p_vec - dt * k3v)
        p_mat = p_mat - (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        p_vec = p_vec - (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        p_mat = 0.5 * (p_mat + p_mat.T)
        if not (np.isfinite(p_mat).all() and np.isfinite(p_vec).all()):
            raise RiccatiFailure(f"optimizer Riccati produced non-finite values at node {i}")
        if np.abs(p_mat).max() > P_MAX_NORM:
            raise RiccatiFailure(f"optimizer Riccati blew up at node {i}")
        p_traj[i] = p_mat
        p_vec_traj[i] = p_vec

    gains = np.empty((nodes, m, nx))
    affine = np.empty((nodes, m))
    for i in range(nodes):
        gains[i] = np.linalg.solve(w_r[i], b[i].T @ p_traj[i] + w_s[i].T)
        affine[i] = np.linalg.solve(w_r[i], b[i].T @ p_vec_traj[i] + r[i])
    return LqSolution(gains=gains, affine=affine, P=p_traj, p=p_vec_traj)


def compute_update(a, b, lq: LqSolution, expansion: QuadraticExpansion, grid: TimeGrid):
    """Roll the optimizer feedback forward and price the step.

    Integrates z' = A z + B v with v = -v_o - K_o z from z(0) = 0 and
    returns the tangent step together with the predicted first-order cost
    change Dg = pi.z(T) + integral(q.z + r.v).
    """
    z, v = closed_loop_linear_rollout(a, b, lq.gains, -lq.affine, grid.dt)
    zeta = TangentCurve(grid, z, v)
    integrand = np.einsum("ni,ni->n", expansion.q, z) + np.einsum("ni,ni->n", expansion.r, v)
    descent = float(expansion.pi @ z[-1]) + trapezoid(integrand, grid.dt)
    return zeta, descent
