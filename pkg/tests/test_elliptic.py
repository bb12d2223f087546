import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import piecewise_linear_l2_error, robin_stencil_3
from penrose_fife import SpatialMesh, assemble_robin, dual_h1_norm, riesz_representative, solve_singular_elliptic
from penrose_fife.elliptic import dual_inner
from penrose_fife.errors import NegativityLoss, ShapeError


def l2(mesh, w):
    return float(np.sqrt(mesh.weights @ (w * w)))


def test_three_node_stencil_matches_hand_assembly():
    op = assemble_robin(SpatialMesh.uniform(3))
    K, B, W = robin_stencil_3()
    np.testing.assert_allclose(op.stiffness.toarray(), K, atol=1e-15)
    np.testing.assert_allclose(op.matrix.toarray(), K + B, atol=1e-15)
    np.testing.assert_allclose(op.weights, np.diag(W))
    # strong form: ghost-node rows divided by the trapezoid weights
    u = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, 0.0, -0.7])
    strong = np.linalg.solve(W, (K + B) @ u - B @ g)
    np.testing.assert_allclose(op.apply(u, g), strong, rtol=1e-14)
    dx = 0.5
    ghost_left = u[1] + 2 * dx * (g[0] - u[0])  # -(u_1 - u_-1)/(2dx) + u_0 = g_0
    assert op.apply(u, g)[0] == pytest.approx(-(ghost_left - 2 * u[0] + u[1]) / dx**2)


def test_apply_zero_and_matched_constants():
    op = assemble_robin(SpatialMesh.uniform(17))
    assert np.all(op.apply(np.zeros(17)) == 0.0)
    c = -0.8
    np.testing.assert_allclose(op.apply(np.full(17, c), np.full(17, c)), 0.0, atol=1e-13)


def test_apply_consistency_orders():
    """Interior rows are second-order consistent, the ghost-node boundary rows first-order."""
    inner, edge = [], []
    for n in (33, 65, 129):
        m = SpatialMesh.uniform(n)
        x = m.points[:, 0]
        u = np.cos(2 * x)
        g = np.zeros(n)
        g[0] = u[0]  # -u'(0) + u(0), u'(0) = 0
        g[-1] = -2 * np.sin(2.0) + u[-1]
        err = np.abs(assemble_robin(m).apply(u, g) - 4 * np.cos(2 * x))
        inner.append(np.max(err[1:-1]))
        edge.append(max(err[0], err[-1]))
    assert np.all(np.log2(np.array(inner[:-1]) / np.array(inner[1:])) > 1.8)
    assert np.all(np.log2(np.array(edge[:-1]) / np.array(edge[1:])) > 0.9)


@pytest.mark.parametrize("G,gb,expected", [(2.0, -0.5, -0.5), (1.0, -1.0, -1.0)])
@pytest.mark.parametrize("h", [1e-3, 0.1, 10.0])
def test_constant_exact_solutions(G, gb, expected, h):
    m = SpatialMesh.uniform(21)
    u = solve_singular_elliptic(assemble_robin(m), np.full(21, G), np.full(21, gb), h, tol=1e-13)
    np.testing.assert_allclose(u, expected, rtol=1e-12)


def _quadratic(n, h=0.1):
    m = SpatialMesh.uniform(n)
    x = m.points[:, 0]
    exact = lambda s: -1.0 - s * (1.0 - s)  # noqa: E731
    G = 1.0 / (1.0 + x - x * x) - 2.0 * h
    u = solve_singular_elliptic(assemble_robin(m), G, np.zeros(n), h, tol=1e-13)
    return m, x, u, exact


def test_quadratic_manufactured_solution():
    """The quadratic is reproduced exactly at the nodes; the piecewise-linear
    reconstruction converges at second order in L2."""
    errs = []
    for dx in (1 / 32, 1 / 64, 1 / 128):
        m, x, u, exact = _quadratic(int(round(1 / dx)) + 1)
        assert l2(m, u - exact(x)) < 1e-12
        errs.append(piecewise_linear_l2_error(x, u, exact))
    slope = np.polyfit(np.log([1 / 32, 1 / 64, 1 / 128]), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_nonpolynomial_manufactured_solution_nodal_second_order():
    h = 0.1
    errs = []
    for n in (33, 65, 129):
        m = SpatialMesh.uniform(n)
        x = m.points[:, 0]
        us = -1.0 - 0.3 * np.cos(3 * x)
        G = -1.0 / us - h * 2.7 * np.cos(3 * x)
        gb = np.zeros(n)
        gb[0] = us[0]
        gb[-1] = 0.9 * np.sin(3.0) + us[-1]
        u = solve_singular_elliptic(assemble_robin(m), G, gb, h, tol=1e-13)
        errs.append(l2(m, u - us))
    slope = np.polyfit(np.log([1 / 32, 1 / 64, 1 / 128]), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_residual_history_is_monotone_and_init_independent():
    m = SpatialMesh.uniform(65)
    x = m.points[:, 0]
    op = assemble_robin(m)
    G = 1.0 + 0.8 * np.sin(7 * x)
    gb = np.full(65, -0.3)
    u1, info = solve_singular_elliptic(op, G, gb, 0.05, u_init=np.full(65, -1.0), return_info=True)
    assert np.all(np.diff(info.residual_history) <= 0)
    u2 = solve_singular_elliptic(op, G, gb, 0.05, u_init=-0.01 - x)
    assert l2(m, u1 - u2) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 5.0), st.floats(-2.0, 0.0))
def test_solution_is_negative(seed, h, gb):
    m = SpatialMesh.uniform(33)
    G = np.random.default_rng(seed).uniform(-1.0, 3.0, 33)
    u = solve_singular_elliptic(assemble_robin(m), G, np.full(33, gb), h)
    assert np.all(u < 0)


def test_positive_boundary_datum_rejected():
    m = SpatialMesh.uniform(9)
    with pytest.raises(NegativityLoss):
        solve_singular_elliptic(assemble_robin(m), np.ones(9), np.full(9, 0.5), 0.1)
    with pytest.raises(ShapeError):
        solve_singular_elliptic(assemble_robin(m), np.ones(8), -1.0, 0.1)


def test_two_dimensional_constant_solution():
    m = SpatialMesh.uniform(9, dimension=2)
    u = solve_singular_elliptic(assemble_robin(m), np.full(m.size, 2.0), np.full(m.size, -0.5), 0.3, tol=1e-13)
    np.testing.assert_allclose(u, -0.5, rtol=1e-12)


def test_dual_norm_examples():
    m = SpatialMesh.uniform(65)
    op = assemble_robin(m)
    assert dual_h1_norm(op, np.zeros(65)) == 0.0
    np.testing.assert_allclose(riesz_representative(op, np.ones(65)), 1.0, rtol=1e-13)
    assert dual_h1_norm(op, np.ones(65)) == pytest.approx(1.0, rel=1e-13)


def test_dual_norm_of_cosine_converges_at_second_order():
    exact = 1.0 / np.sqrt(2.0 * (1.0 + np.pi**2))
    errs = []
    for n in (33, 65, 129):
        m = SpatialMesh.uniform(n)
        errs.append(abs(dual_h1_norm(assemble_robin(m), np.cos(np.pi * m.points[:, 0])) - exact))
    assert errs[-1] < 1e-4
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_dual_inner_accepts_columns():
    m = SpatialMesh.uniform(20)
    op = assemble_robin(m)
    rng = np.random.default_rng(5)
    A = rng.normal(size=(20, 3))
    cols = dual_inner(op, A, A)
    for k in range(3):
        assert cols[k] == pytest.approx(dual_h1_norm(op, A[:, k]) ** 2, rel=1e-12)
    # the dual norm is dominated by the L2 norm
    assert np.all(np.sqrt(cols) <= np.sqrt(m.weights @ A**2) * (1 + 1e-12))
