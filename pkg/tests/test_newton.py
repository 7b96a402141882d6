import numpy as np
import pytest

import qpronto as qp
from qpronto.newton import (
    compute_update,
    curvature_terms,
    full_newton_weights,
    quasi_newton_weights,
    solve_adjoint,
    solve_lq,
)
from conftest import random_model
from oracles import DenseLq, random_unit


def zero_gains(nodes, m, nx):
    return qp.GainSchedule.zeros(nodes, m, nx)


def test_adjoint_zero_data(rng):
    grid = qp.TimeGrid(1.0, 50)
    nodes = grid.n_nodes
    a = rng.normal(size=(2, 2))
    a = np.broadcast_to(0.5 * (a - a.T), (nodes, 2, 2))
    b = np.ones((nodes, 2, 1))
    chi = solve_adjoint(a, b, zero_gains(nodes, 1, 2), np.zeros((nodes, 2)), np.zeros((nodes, 1)), np.zeros(2), grid)
    assert np.abs(chi).max() == 0.0


def test_adjoint_scalar_closed_form():
    # -chi' = a chi with chi(T) = 1  ->  chi(t) = exp(a (T - t))
    grid = qp.TimeGrid(1.0, 400)
    nodes = grid.n_nodes
    a_val = 0.7
    a = np.full((nodes, 1, 1), a_val)
    b = np.ones((nodes, 1, 1))
    chi = solve_adjoint(
        a, b, zero_gains(nodes, 1, 1), np.zeros((nodes, 1)), np.zeros((nodes, 1)), np.ones(1), grid
    )
    expected = np.exp(a_val * (grid.duration - grid.times()))
    assert np.abs(chi[:, 0] - expected).max() < 1e-8


def test_adjoint_krotov_reduction(rng):
    # with zero gain the sweep solves the plain co-state equation; check
    # against the same equation integrated through the regulator-free form
    grid = qp.TimeGrid(1.0, 300)
    nodes = grid.n_nodes
    model = random_model(rng, n=2, m=1)
    ts = grid.times()
    inputs = 0.3 * np.cos(ts)[:, None]
    states = np.tile(qp.embed_state(random_unit(2, rng)), (nodes, 1))
    a, b = qp.linearize_along(model, states, inputs)
    q = rng.normal(size=(nodes, 4))
    pi = rng.normal(size=4)
    chi = solve_adjoint(a, b, zero_gains(nodes, 1, 4), q, np.zeros((nodes, 1)), pi, grid)
    # crude reference: fine-step backward Euler on -chi' = A^T chi + q
    fine = 8
    dt = grid.dt / fine
    ref = pi.copy()
    for i in range(nodes - 2, -1, -1):
        for k in range(fine):
            frac = 1.0 - (k + 0.5) / fine
            a_mid = a[i] * (1 - frac) + a[i + 1] * frac
            q_mid = q[i] * (1 - frac) + q[i + 1] * frac
            ref = ref + dt * (a_mid.T @ ref + q_mid)
    assert np.abs(chi[0] - ref).max() < 1e-3


def test_adjoint_detects_blowup():
    grid = qp.TimeGrid(10.0, 100)
    nodes = grid.n_nodes
    a = np.full((nodes, 1, 1), 500.0)
    b = np.ones((nodes, 1, 1))
    with pytest.raises(qp.NonFiniteError):
        solve_adjoint(
            a, b, zero_gains(nodes, 1, 1), np.zeros((nodes, 1)), np.zeros((nodes, 1)),
            np.ones(1), grid,
        )


def test_curvature_terms_zero_adjoint(rng):
    model = random_model(rng, n=3, m=2)
    grid = qp.TimeGrid(1.0, 20)
    xi = qp.Curve(grid, rng.normal(size=(21, 6)), rng.normal(size=(21, 2)))
    s_t, r_t = curvature_terms(model, xi, np.zeros((21, 6)))
    assert np.abs(s_t).max() == 0.0 and np.abs(r_t).max() == 0.0


def test_curvature_terms_linear_channels(rng):
    model = random_model(rng, n=3, m=2, kinds=("identity",))
    grid = qp.TimeGrid(1.0, 20)
    xi = qp.Curve(grid, rng.normal(size=(21, 6)), rng.normal(size=(21, 2)))
    chi = rng.normal(size=(21, 6))
    _, r_t = curvature_terms(model, xi, chi)
    assert np.abs(r_t).max() == 0.0


def test_curvature_quadratic_form_identity(rng):
    # [z; v]^T [[0, S~], [S~^T, R~]] [z; v] equals chi . Lambda(z, v)
    model = random_model(rng, n=3, m=3)
    grid = qp.TimeGrid(1.0, 10)
    xi = qp.Curve(grid, rng.normal(size=(11, 6)), rng.normal(size=(11, 3)))
    chi = rng.normal(size=(11, 6))
    s_t, r_t = curvature_terms(model, xi, chi)
    for i in (0, 4, 10):
        z = rng.normal(size=6)
        v = rng.normal(size=3)
        lam = qp.second_order_term(model, xi.states[i], xi.inputs[i], z, v)
        quad = 2 * z @ s_t[i] @ v + v @ r_t[i] @ v
        assert abs(chi[i] @ lam - quad) < 1e-10


def test_weights_additivity(rng):
    model = random_model(rng, n=2, m=2)
    grid = qp.TimeGrid(1.0, 15)
    terminal = qp.TerminalCost.zero_phase(random_unit(2, rng))
    incremental = qp.IncrementalCost(
        qp.EffortWeight(diagonal=(qp.ConstantSchedule(1.0), qp.ConstantSchedule(2.0)))
    )
    xi = qp.Curve(grid, rng.normal(size=(16, 4)), rng.normal(size=(16, 2)))
    expansion = qp.expand(terminal, incremental, xi)
    chi = rng.normal(size=(16, 4))
    s_t, r_t = curvature_terms(model, xi, chi)
    full = full_newton_weights(expansion, s_t, r_t)
    quasi = quasi_newton_weights(expansion)
    assert np.array_equal(full.S, quasi.S + s_t)
    assert np.array_equal(full.R, quasi.R + r_t)
    assert np.array_equal(full.Q, quasi.Q)
    assert full.kind == "full_newton" and quasi.kind == "quasi_newton"


def _trivial_weights(nodes, nx, m, R=None):
    return qp.NewtonWeights(
        Q=np.zeros((nodes, nx, nx)),
        S=np.zeros((nodes, nx, m)),
        R=np.broadcast_to(np.eye(m) if R is None else R, (nodes, m, m)),
        Pi=np.zeros((nx, nx)),
        kind="quasi_newton",
    )


def test_lq_all_zero_data():
    grid = qp.TimeGrid(1.0, 30)
    nodes = grid.n_nodes
    a = np.zeros((nodes, 2, 2))
    b = np.ones((nodes, 2, 1))
    lq = solve_lq(
        a, b, _trivial_weights(nodes, 2, 1), np.zeros((nodes, 2)), np.zeros((nodes, 1)),
        np.zeros(2), grid,
    )
    assert np.abs(lq.P).max() == 0.0
    assert np.abs(lq.gains).max() == 0.0
    assert np.abs(lq.affine).max() == 0.0
    zeta, descent = compute_update(a, b, lq, _zero_expansion(nodes, 2, 1), grid)
    assert np.abs(zeta.z).max() == 0.0 and descent == 0.0


def _zero_expansion(nodes, nx, m):
    return qp.QuadraticExpansion(
        pi=np.zeros(nx),
        Pi=np.zeros((nx, nx)),
        q=np.zeros((nodes, nx)),
        r=np.zeros((nodes, m)),
        Q=np.zeros((nodes, nx, nx)),
        S=np.zeros((nodes, nx, m)),
        R=np.broadcast_to(np.eye(m), (nodes, m, m)),
    )


def test_lq_scalar_tanh_surrogate():
    grid = qp.TimeGrid(2.0, 1000)
    nodes = grid.n_nodes
    a = np.zeros((nodes, 1, 1))
    b = np.ones((nodes, 1, 1))
    weights = qp.NewtonWeights(
        Q=np.broadcast_to(np.eye(1), (nodes, 1, 1)),
        S=np.zeros((nodes, 1, 1)),
        R=np.broadcast_to(np.eye(1), (nodes, 1, 1)),
        Pi=np.zeros((1, 1)),
        kind="full_newton",
    )
    lq = solve_lq(a, b, weights, np.zeros((nodes, 1)), np.zeros((nodes, 1)), np.zeros(1), grid)
    expected = np.tanh(grid.duration - grid.times())
    assert np.abs(lq.P[:, 0, 0] - expected).max() < 1e-6
    assert np.abs(lq.gains[:, 0, 0] - expected).max() < 1e-6
    assert np.abs(lq.p).max() == 0.0
    assert np.abs(lq.affine).max() == 0.0


def test_lq_rejects_indefinite_input_weight():
    grid = qp.TimeGrid(1.0, 20)
    nodes = grid.n_nodes
    weights = _trivial_weights(nodes, 2, 1)
    bad_r = np.broadcast_to(np.eye(1), (nodes, 1, 1)).copy()
    bad_r[7] = -0.5
    weights = qp.NewtonWeights(Q=weights.Q, S=weights.S, R=bad_r, Pi=weights.Pi, kind="full_newton")
    with pytest.raises(qp.RiccatiFailure, match="positive definiteness"):
        solve_lq(
            np.zeros((nodes, 2, 2)), np.ones((nodes, 2, 1)), weights,
            np.zeros((nodes, 2)), np.zeros((nodes, 1)), np.zeros(2), grid,
        )


def test_lq_detects_escape():
    # strongly indefinite state weight escapes in finite time
    grid = qp.TimeGrid(3.0, 600)
    nodes = grid.n_nodes
    weights = qp.NewtonWeights(
        Q=np.broadcast_to(-4.0 * np.eye(1), (nodes, 1, 1)),
        S=np.zeros((nodes, 1, 1)),
        R=np.broadcast_to(np.eye(1), (nodes, 1, 1)),
        Pi=np.zeros((1, 1)),
        kind="full_newton",
    )
    with pytest.raises(qp.RiccatiFailure):
        solve_lq(
            np.zeros((nodes, 1, 1)), np.ones((nodes, 1, 1)), weights,
            np.zeros((nodes, 1)), np.zeros((nodes, 1)), np.zeros(1), grid,
        )


def test_lq_matches_dense_oracle(rng):
    # random four-state, two-input problem against the dense transcription
    grid = qp.TimeGrid(2.0, 400)
    nodes = grid.n_nodes
    n, m = 4, 2
    a_mat = rng.normal(size=(n, n)) * 0.4
    b_mat = rng.normal(size=(n, m))
    a = np.broadcast_to(a_mat, (nodes, n, n))
    b = np.broadcast_to(b_mat, (nodes, n, m))

    w = rng.normal(size=(n + m, n + m))
    w = w @ w.T * 0.1 + 0.05 * np.eye(n + m)  # PSD joint weight, PD input block
    Q = np.broadcast_to(w[:n, :n], (nodes, n, n))
    S = np.broadcast_to(w[:n, n:], (nodes, n, m))
    R = np.broadcast_to(w[n:, n:] + 0.2 * np.eye(m), (nodes, m, m))
    Pi = rng.normal(size=(n, n))
    Pi = Pi @ Pi.T * 0.3
    q = rng.normal(size=(nodes, n)) * 0.3
    r = rng.normal(size=(nodes, m)) * 0.3
    pi = rng.normal(size=n)

    weights = qp.NewtonWeights(Q=Q, S=S, R=R, Pi=Pi, kind="full_newton")
    lq = solve_lq(a, b, weights, q, r, pi, grid)
    expansion = qp.QuadraticExpansion(pi=pi, Pi=Pi, q=q, r=r, Q=Q, S=S, R=R)
    zeta, descent = compute_update(a, b, lq, expansion, grid)
    assert descent < 0

    oracle = DenseLq(a, b, grid)
    ours = oracle.cost(zeta.v, q, r, pi, Q, S, R, Pi)
    best = oracle.cost(oracle.solve(q, r, pi, Q, S, R, Pi), q, r, pi, Q, S, R, Pi)
    assert ours >= best - 1e-9
    assert ours - best <= 1e-6 * max(1.0, abs(best))


def test_adjoint_riccati_consistency():
    # with K_r := K_o and matching data the adjoint reproduces p(t)
    grid = qp.TimeGrid(1.5, 500)
    nodes = grid.n_nodes
    a = np.full((nodes, 1, 1), 0.3)
    b = np.ones((nodes, 1, 1))
    ts = grid.times()
    q = np.sin(ts)[:, None]
    r = 0.2 * np.cos(ts)[:, None]
    pi = np.array([0.7])
    weights = qp.NewtonWeights(
        Q=np.broadcast_to(np.eye(1), (nodes, 1, 1)),
        S=np.zeros((nodes, 1, 1)),
        R=np.broadcast_to(np.eye(1), (nodes, 1, 1)),
        Pi=0.5 * np.eye(1),
        kind="full_newton",
    )
    lq = solve_lq(a, b, weights, q, r, pi, grid)
    chi = solve_adjoint(a, b, qp.GainSchedule(lq.gains), q, r, pi, grid)
    assert np.abs(chi - lq.p).max() < 1e-6
