"""Ready-made problems: the default 1D scenario and a spatially homogeneous one."""
from __future__ import annotations

import numpy as np

from .domain import ProblemSpec, SpatialMesh, cubic_beta
from .kernel import build_kernel, gaussian_kernel, zero_kernel


def default_problem(nodes=128, T=1.0, kernel_width=0.1, beta_coeff=1.0, pi_slope=-1.0,
                    phi_amp=0.5, g_value=-1.0, theta0=1.0):
    """Cubic beta, ``pi(r) = -r``, Gaussian kernel, ``phi0 = phi_amp cos(pi x)`` on (0, 1)."""
    mesh = SpatialMesh.uniform(nodes)
    x = mesh.points[:, 0]
    return ProblemSpec(
        mesh=mesh,
        kernel=build_kernel(gaussian_kernel(kernel_width), mesh),
        nonlinearity=cubic_beta(beta_coeff, pi_slope),
        T=T,
        f=lambda pts, t: 0.0,
        g=lambda pts, t: g_value,
        theta0=np.full(mesh.size, theta0),
        phi0=phi_amp * np.cos(np.pi * x),
        v0=np.zeros(mesh.size),
        name="default",
    )


def piecewise_in_time(values, T):
    """``g(x, t) = values[k]`` for ``t in (k h, (k + 1) h]`` with ``h = T / len(values)``.

    At ``t = 0`` the first value is used.
    """
    values = np.asarray(values, dtype=float)
    N = len(values)

    def g(pts, t):
        k = int(np.ceil(t * N / T - 1e-12)) - 1
        return values[min(max(k, 0), N - 1)]

    return g


def homogeneous_problem(boundary_values, T=1.0, nodes=16, f_value=0.5, theta0=1.5,
                        phi0=0.2, v0=-0.3, kernel_width=None, beta_coeff=1.0, pi_slope=-1.0):
    """Constant data; with ``boundary_values`` equal to the level values of ``u`` the
    discrete solution stays spatially constant at every step.

    The kernel is zero unless ``kernel_width`` is given; the nonlocal term
    vanishes on constants either way.
    """
    mesh = SpatialMesh.uniform(nodes)
    J = zero_kernel() if kernel_width is None else gaussian_kernel(kernel_width)
    return ProblemSpec(
        mesh=mesh,
        kernel=build_kernel(J, mesh),
        nonlinearity=cubic_beta(beta_coeff, pi_slope),
        T=T,
        f=lambda pts, t: f_value,
        g=piecewise_in_time(boundary_values, T),
        theta0=np.full(mesh.size, theta0),
        phi0=np.full(mesh.size, phi0),
        v0=np.full(mesh.size, v0),
        name="homogeneous",
    )
