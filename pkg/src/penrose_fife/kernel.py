"""Nonlocal interaction: kernel tables, ``a(x)`` and the discrete convolution."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import KernelError, ShapeError


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel samples on the difference lattice of a mesh.

    ``samples[k]`` (1D) or ``samples[k, l]`` (2D) holds ``J`` at the offset
    ``((k - nx + 1) dx, (l - ny + 1) dy)``. Samples are exactly symmetric.
    """

    mesh: object
    samples: np.ndarray
    a: np.ndarray
    sup_bound: float
    strategy: str

    @cached_property
    def matrix(self):
        """Dense ``J(x_i - x_j)`` matrix used by the direct path."""
        idx = []
        for n in self.mesh.shape:
            i = np.arange(n)
            idx.append(np.subtract.outer(i, i) + n - 1)
        if self.mesh.dimension == 1:
            return self.samples[idx[0]]
        ix, iy = idx
        nx, ny = self.mesh.shape
        big = self.samples[ix[:, None, :, None], iy[None, :, None, :]]
        return big.reshape(nx * ny, nx * ny)

    @cached_property
    def _fft_plan(self):
        shape = self.mesh.shape
        fshape = tuple(sfft.next_fast_len(2 * n - 1, real=True) for n in shape)
        khat = sfft.rfftn(self.samples, fshape)
        return fshape, khat


def build_kernel(J, mesh, strategy="auto"):
    """Sample ``J`` on the mesh difference lattice and precompute ``a``.

    ``J`` receives an array of offsets of shape ``(..., dim)`` and returns
    kernel values of shape ``(...)``.
    """
    lattice = np.meshgrid(
        *[np.arange(-(n - 1), n) * dx for n, dx in zip(mesh.shape, mesh.spacing)],
        indexing="ij",
    )
    offsets = np.stack(lattice, axis=-1)
    raw = np.asarray(J(offsets), dtype=float)
    raw = np.broadcast_to(raw, offsets.shape[:-1])
    if not np.all(np.isfinite(raw)):
        raise KernelError("kernel is not finite on the difference lattice")
    flipped = raw[tuple(slice(None, None, -1) for _ in range(raw.ndim))]
    scale = float(np.max(np.abs(raw))) if raw.size else 0.0
    if np.max(np.abs(raw - flipped)) > 1e-12 * scale:
        raise KernelError("kernel is not symmetric: J(-x) != J(x)")
    samples = 0.5 * (raw + flipped)

    if strategy == "auto":
        strategy = "fast-transform"
    if strategy not in ("direct", "fast-transform"):
        raise KernelError(f"unknown evaluation strategy {strategy!r}")

    table = KernelTable(mesh, samples, np.zeros(mesh.size), 0.0, strategy)
    ones = np.ones(mesh.size)
    a = convolve(table, ones)
    absolute = KernelTable(mesh, np.abs(samples), np.zeros(mesh.size), 0.0, strategy)
    sup = float(np.max(convolve(absolute, ones)))
    object.__setattr__(table, "a", a)
    object.__setattr__(table, "sup_bound", sup)
    table.a.setflags(write=False)
    return table


def convolve(table, phi, method=None):
    """Trapezoid approximation of ``(J * phi)(x_i) = sum_j J(x_i - x_j) w_j phi_j``."""
    mesh = table.mesh
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.size,):
        raise ShapeError(f"field of shape {phi.shape} does not match {mesh.size} nodes")
    method = method or table.strategy
    weighted = mesh.weights * phi
    if method == "direct":
        return table.matrix @ weighted
    fshape, khat = table._fft_plan
    grid = weighted.reshape(mesh.shape)
    full = sfft.irfftn(khat * sfft.rfftn(grid, fshape), fshape)
    window = tuple(slice(n - 1, 2 * n - 1) for n in mesh.shape)
    return np.ascontiguousarray(full[window]).ravel()


def nonlocal_term(table, phi):
    """``a(x) phi - (J * phi)``; vanishes on constants."""
    return table.a * phi - convolve(table, phi)


def gaussian_kernel(width=0.1, strength=1.0):
    """Normalised Gaussian with integral ``strength`` over the whole space."""
    width, strength = float(width), float(strength)

    def J(offsets):
        d = offsets.shape[-1]
        r2 = np.sum(offsets**2, axis=-1)
        norm = (2.0 * np.pi * width**2) ** (d / 2.0)
        return strength * np.exp(-0.5 * r2 / width**2) / norm

    return J


def constant_kernel(value=1.0):
    return lambda offsets: np.full(offsets.shape[:-1], float(value))


def zero_kernel():
    return constant_kernel(0.0)


def tabulated_kernel(radii, values):
    """Radial kernel from a table, linearly interpolated, zero past the last radius."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)

    def J(offsets):
        r = np.sqrt(np.sum(offsets**2, axis=-1))
        return np.interp(r, radii, values, right=0.0)

    return J
