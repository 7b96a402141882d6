"""Independent reference computations used to check the solver machinery.

Nothing here calls the integrators under test: complex propagation goes
through an eigendecomposition, and the linear-quadratic oracle solves the
discretized problem as one dense least-squares system.
"""

import numpy as np


def random_hermitian(n, rng, scale=1.0):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (m + m.conj().T)


def random_unit(n, rng):
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def propagate_hermitian(h, psi0, t):
    """psi(t) = exp(-i H t) psi0 for Hermitian H, via eigendecomposition."""
    evals, evecs = np.linalg.eigh(h)
    return evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi0))


def rk4_step_matrices(a0, am, a1, b0, bm, b1, dt):
    """One-step transition matrices of the interpolated-input RK4 scheme.

    Returns (Phi, G0, G1) such that z+ = Phi z + G0 v0 + G1 v1 where v0, v1
    are the node inputs and the half-step input is their average.
    """
    n = a0.shape[0]
    m = b0.shape[1]

    def step(z, v0, v1):
        vm = 0.5 * (v0 + v1)
        k1 = a0 @ z + b0 @ v0
        k2 = am @ (z + 0.5 * dt * k1) + bm @ vm
        k3 = am @ (z + 0.5 * dt * k2) + bm @ vm
        k4 = a1 @ (z + dt * k3) + b1 @ v1
        return z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    phi = step(np.eye(n), np.zeros((m, n)), np.zeros((m, n)))
    g0 = step(np.zeros((n, m)), np.eye(m), np.zeros((m, m)))
    g1 = step(np.zeros((n, m)), np.zeros((m, m)), np.eye(m))
    return phi, g0, g1


class DenseLq:
    """Dense transcription of a time-varying LQ optimal control problem.

    States are eliminated through the RK4 one-step matrices, leaving the
    stacked node inputs as the only decision variables; the quadratic cost
    is assembled explicitly and minimized by a single symmetric solve.
    """

    def __init__(self, a, b, grid):
        self.grid = grid
        nodes = grid.n_nodes
        dt = grid.dt
        n = a.shape[1]
        m = b.shape[2]
        self.n, self.m = n, m
        # sensitivity of z_i to every node input, built step by step
        sens = np.zeros((nodes, n, nodes * m))
        for i in range(nodes - 1):
            am = 0.5 * (a[i] + a[i + 1])
            bm = 0.5 * (b[i] + b[i + 1])
            phi, g0, g1 = rk4_step_matrices(a[i], am, a[i + 1], b[i], bm, b[i + 1], dt)
            sens[i + 1] = phi @ sens[i]
            sens[i + 1, :, i * m : (i + 1) * m] += g0
            sens[i + 1, :, (i + 1) * m : (i + 2) * m] += g1
        self.sens = sens

    def rollout(self, v):
        return np.einsum("nij,j->ni", self.sens, v.reshape(-1))

    def cost(self, v, q, r, pi, Q, S, R, Pi):
        z = self.rollout(v)
        dt = self.grid.dt
        integrand = (
            np.einsum("ni,ni->n", q, z)
            + np.einsum("ni,ni->n", r, v)
            + 0.5 * np.einsum("ni,nij,nj->n", z, Q, z)
            + np.einsum("ni,nij,nj->n", z, S, v)
            + 0.5 * np.einsum("ni,nij,nj->n", v, R, v)
        )
        quad = dt * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
        return float(pi @ z[-1] + 0.5 * z[-1] @ Pi @ z[-1] + quad)

    def solve(self, q, r, pi, Q, S, R, Pi):
        """Exact minimizer of the transcribed quadratic cost over node inputs."""
        nodes = self.grid.n_nodes
        dt = self.grid.dt
        m = self.m
        nv = nodes * m
        w = np.full(nodes, dt)
        w[0] = w[-1] = 0.5 * dt

        eye_blocks = np.zeros((nodes, m, nv))
        for i in range(nodes):
            eye_blocks[i, :, i * m : (i + 1) * m] = np.eye(m)

        hess = np.zeros((nv, nv))
        grad = np.zeros(nv)
        for i in range(nodes):
            d = self.sens[i]
            e = eye_blocks[i]
            hess += w[i] * (d.T @ Q[i] @ d + d.T @ S[i] @ e + e.T @ S[i].T @ d + e.T @ R[i] @ e)
            grad += w[i] * (d.T @ q[i] + e.T @ r[i])
        d_final = self.sens[-1]
        hess += d_final.T @ Pi @ d_final
        grad += d_final.T @ pi
        hess = 0.5 * (hess + hess.T)
        v = np.linalg.solve(hess, -grad)
        return v.reshape(nodes, m)
