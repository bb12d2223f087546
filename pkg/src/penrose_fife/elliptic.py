"""Robin Laplacian, the singular elliptic solve and the (H^1)* Riesz map.

Operators are stored in weighted ("weak") form: for node vectors ``u`` and
boundary datum ``g`` the strong ghost-node Laplacian is

    -Delta_R u = W^{-1} (A u - B g),    A = K + B,

with ``W`` the trapezoid weights, ``K`` the symmetric stiffness matrix and
``B`` the diagonal boundary weights. Multiplying each ghost-node row by its
trapezoid weight is what makes ``A`` symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .errors import MeshError, NegativityLoss, NoConvergence, ShapeError, SolveError


def _stiffness_1d(n, dx):
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / dx


def assemble_stiffness(mesh):
    """Symmetric positive semidefinite ``K`` with ``u^T K u = ||grad u||^2``."""
    if any(not dx > 0 for dx in mesh.spacing):
        raise MeshError(f"degenerate spacing {mesh.spacing}")
    parts = [_stiffness_1d(n, dx) for n, dx in zip(mesh.shape, mesh.spacing)]
    if mesh.dimension == 1:
        return parts[0].tocsr()
    wx, wy = mesh.axis_weights
    kx, ky = parts
    return (sp.kron(kx, sp.diags(wy)) + sp.kron(sp.diags(wx), ky)).tocsr()


@dataclass(frozen=True, eq=False)
class RobinOperator:
    mesh: object
    stiffness: sp.csr_matrix
    boundary: np.ndarray
    weights: np.ndarray

    @cached_property
    def matrix(self):
        """SPD weighted operator ``K + B``."""
        return (self.stiffness + sp.diags(self.boundary)).tocsc()

    def load(self, g_bd):
        """Right-hand side contribution ``B g`` of the boundary datum."""
        return self.boundary * g_bd

    def apply(self, u, g_bd=0.0):
        """Nodal ``-Delta u`` with the Robin datum ``g_bd`` folded into the ghost nodes."""
        return (self.matrix @ u - self.boundary * g_bd) / self.weights

    @cached_property
    def riesz(self):
        """LU factors of ``K + W``, the zero-flux ``(-Delta + I)`` in weighted form."""
        return splu((self.stiffness + sp.diags(self.weights)).tocsc())


def assemble_robin(mesh):
    return RobinOperator(mesh, assemble_stiffness(mesh), mesh.boundary_weights, mesh.weights)


def alpha(r):
    """Singular term ``-1/r`` on ``r < 0``."""
    return -1.0 / r


def alpha_prime(r):
    return 1.0 / (r * r)


def _l2(op, r):
    return float(np.sqrt(np.dot(op.weights, r * r)))


@dataclass
class EllipticInfo:
    iterations: int
    residual: float
    residual_history: list


def solve_singular_elliptic(op, G, G_bd, h, u_init=None, tol=1e-10, max_iter=100,
                            return_info=False):
    """Solve ``-1/u - h Delta u = G`` with ``d_nu u + u = G_bd`` for ``u < 0``.

    Damped Newton on the weighted residual; every accepted iterate stays in
    the negative cone and decreases the discrete L2 residual.
    """
    mesh = op.mesh
    G = np.asarray(G, dtype=float)
    G_bd = np.broadcast_to(np.asarray(G_bd, dtype=float), (mesh.size,))
    if G.shape != (mesh.size,):
        raise ShapeError(f"G has shape {G.shape}, mesh has {mesh.size} nodes")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if np.any(G_bd[mesh.boundary_nodes] > 0):
        raise NegativityLoss("boundary datum must be nonpositive")

    if u_init is None:
        u = -1.0 / np.clip(G, 0.1, None)
    else:
        u = np.array(u_init, dtype=float)
        if np.any(u >= 0):
            u = np.minimum(u, -1e-3)

    w = op.weights
    A = op.matrix
    load = op.load(G_bd)

    def residual(x):
        return alpha(x) - G + h * (A @ x - load) / w

    r = residual(u)
    rnorm = _l2(op, r)
    history = [rnorm]
    it = 0
    while rnorm > tol:
        if it >= max_iter:
            raise NoConvergence(f"singular elliptic solve: residual {rnorm:.3e} after {it} iterations")
        jac = sp.diags(w * alpha_prime(u)) + h * A
        try:
            du = spsolve(jac.tocsc(), -w * r)
        except RuntimeError as exc:  # singular factorisation
            raise SolveError(str(exc)) from exc
        if np.max(np.abs(du)) <= 64 * np.finfo(float).eps * np.max(np.abs(u)):
            break  # residual is at its rounding floor; further steps cannot reduce it
        lam = 1.0
        while True:
            trial = u + lam * du
            if np.all(trial < 0):
                r_trial = residual(trial)
                n_trial = _l2(op, r_trial)
                if n_trial <= (1.0 - 1e-4 * lam) * rnorm or n_trial <= tol:
                    break
            lam *= 0.5
            if lam < 1e-12:
                if not np.all(u + 1e-12 * du < 0):
                    raise NegativityLoss("Newton iterate left the negative cone")
                raise NoConvergence(f"line search stalled at residual {rnorm:.3e}")
        u, r, rnorm = trial, r_trial, n_trial
        history.append(rnorm)
        it += 1
    if return_info:
        return u, EllipticInfo(it, rnorm, history)
    return u


def riesz_representative(op, w):
    """``z`` solving the zero-flux ``(-Delta + I) z = w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[0] != op.mesh.size:
        raise ShapeError(f"field of length {w.shape[0]} does not match {op.mesh.size} nodes")
    rhs = (op.weights * w.T).T
    z = op.riesz.solve(np.ascontiguousarray(rhs))
    if not np.all(np.isfinite(z)):
        raise SolveError("Riesz solve produced non-finite values")
    return z


def dual_inner(op, a, b):
    """``(H^1)*`` inner product of two node vectors (or columns of two arrays)."""
    zb = riesz_representative(op, b)
    return np.sum((op.weights * np.asarray(a, dtype=float).T).T * zb, axis=0)


def dual_h1_norm(op, w):
    return float(np.sqrt(max(dual_inner(op, w, w), 0.0)))
