"""Data model: meshes, nonlinearities, problem data and single time levels."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .errors import DomainError, MeshError, ShapeError

if TYPE_CHECKING:
    from .elliptic import RobinOperator
    from .kernel import KernelTable

# f(x, t) / g(x, t): x has shape (n_nodes, dim), t is a float.
SpaceTimeFunction = Callable[[np.ndarray, float], np.ndarray]


def _axis_weights(n, dx):
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


@dataclass(frozen=True, eq=False)
class SpatialMesh:
    """Uniform tensor-product node mesh on ``[0, L1] x ... x [0, Ld]``.

    Nodes are flattened in C order (last axis fastest). Interior weights are
    the tensor-product trapezoid rule; boundary weights are the trapezoid rule
    along each boundary edge, so that in 1D each endpoint carries weight 1.
    """

    shape: tuple
    extent: tuple

    def __post_init__(self):
        if len(self.shape) not in (1, 2) or len(self.extent) != len(self.shape):
            raise MeshError("only 1D and 2D meshes are supported")
        if any(int(n) < 3 for n in self.shape):
            raise MeshError(f"need at least 3 nodes per axis, got {self.shape}")
        if any(not np.isfinite(L) or L <= 0 for L in self.extent):
            raise MeshError(f"degenerate extent {self.extent}")
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "extent", tuple(float(L) for L in self.extent))

    @classmethod
    def uniform(cls, nodes, extent=1.0, dimension=1):
        nodes = np.broadcast_to(np.atleast_1d(nodes), (dimension,))
        extent = np.broadcast_to(np.atleast_1d(extent), (dimension,))
        return cls(tuple(int(n) for n in nodes), tuple(float(L) for L in extent))

    @property
    def dimension(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return tuple(L / (n - 1) for n, L in zip(self.shape, self.extent))

    @cached_property
    def axes(self):
        return tuple(np.linspace(0.0, L, n) for n, L in zip(self.shape, self.extent))

    @cached_property
    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @cached_property
    def axis_weights(self):
        return tuple(_axis_weights(n, dx) for n, dx in zip(self.shape, self.spacing))

    @cached_property
    def weights(self):
        w = self.axis_weights[0]
        for wa in self.axis_weights[1:]:
            w = np.multiply.outer(w, wa)
        return np.ascontiguousarray(w).ravel()

    @cached_property
    def boundary_weights(self):
        if self.dimension == 1:
            bw = np.zeros(self.shape[0])
            bw[0] = bw[-1] = 1.0
            return bw
        wx, wy = self.axis_weights
        bw = np.zeros(self.shape)
        bw[0, :] += wy
        bw[-1, :] += wy
        bw[:, 0] += wx
        bw[:, -1] += wx
        return bw.ravel()

    @cached_property
    def boundary_nodes(self):
        return np.flatnonzero(self.boundary_weights > 0)

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def check_field(self, values, name="field"):
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            return np.full(self.size, float(values))
        if values.shape != (self.size,):
            raise ShapeError(f"{name} has shape {values.shape}, mesh has {self.size} nodes")
        return values


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Monotone part ``beta`` (with primitive ``beta_hat``) and Lipschitz part ``pi``.

    ``beta_bound(lo, hi)`` returns a Lipschitz bound of ``beta`` on ``[lo, hi]``.
    Derivatives are optional; without them the scalar solver falls back to
    pure bisection.
    """

    beta: Callable[[np.ndarray], np.ndarray]
    beta_hat: Callable[[np.ndarray], np.ndarray]
    pi: Callable[[np.ndarray], np.ndarray]
    pi_lipschitz: float
    beta_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    pi_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    beta_bound: Optional[Callable[[float, float], float]] = None
    name: str = "custom"


def cubic_beta(coeff=1.0, pi_slope=-1.0):
    """``beta(r) = coeff r^3`` with linear ``pi(r) = pi_slope r``."""
    c, s = float(coeff), float(pi_slope)
    return NonlinearitySpec(
        beta=lambda r: c * np.asarray(r) ** 3,
        beta_hat=lambda r: 0.25 * c * np.asarray(r) ** 4,
        pi=lambda r: s * np.asarray(r),
        pi_lipschitz=abs(s),
        beta_prime=lambda r: 3.0 * c * np.asarray(r) ** 2,
        pi_prime=lambda r: np.full(np.shape(r), s),
        beta_bound=lambda lo, hi: 3.0 * c * max(lo * lo, hi * hi),
        name="cubic",
    )


def piecewise_beta(coeff=1.0, pi_slope=-1.0, knee=1.0):
    """Dead-zone ``beta``: zero on ``[-knee, knee]``, slope ``coeff`` outside."""
    c, s, k = float(coeff), float(pi_slope), float(knee)

    def beta(r):
        r = np.asarray(r, dtype=float)
        return c * (r - np.clip(r, -k, k))

    def beta_hat(r):
        r = np.asarray(r, dtype=float)
        return 0.5 * c * (r - np.clip(r, -k, k)) ** 2

    return NonlinearitySpec(
        beta=beta,
        beta_hat=beta_hat,
        pi=lambda r: s * np.asarray(r),
        pi_lipschitz=abs(s),
        beta_prime=lambda r: c * (np.abs(np.asarray(r)) > k).astype(float),
        pi_prime=lambda r: np.full(np.shape(r), s),
        beta_bound=lambda lo, hi: c,
        name="piecewise",
    )


def linear_beta(coeff=1.0, pi_slope=-1.0):
    c, s = float(coeff), float(pi_slope)
    return NonlinearitySpec(
        beta=lambda r: c * np.asarray(r, dtype=float),
        beta_hat=lambda r: 0.5 * c * np.asarray(r, dtype=float) ** 2,
        pi=lambda r: s * np.asarray(r, dtype=float),
        pi_lipschitz=abs(s),
        beta_prime=lambda r: np.full(np.shape(r), c),
        pi_prime=lambda r: np.full(np.shape(r), s),
        beta_bound=lambda lo, hi: abs(c),
        name="linear",
    )


def polynomial_beta(coeffs, pi_slope=-1.0):
    """Odd polynomial ``beta(r) = sum_k c_k r^(2k+1)``.

    Nonnegative coefficients keep ``beta`` nondecreasing; anything else is
    left for :func:`validate_problem` to reject.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    s = float(pi_slope)
    if c.size == 0:
        raise DomainError("polynomial beta needs at least one coefficient")
    powers = 2 * np.arange(c.size) + 1

    def beta(r):
        r = np.asarray(r, dtype=float)
        return sum(ck * r**p for ck, p in zip(c, powers))

    def beta_hat(r):
        r = np.asarray(r, dtype=float)
        return sum(ck * r ** (p + 1) / (p + 1) for ck, p in zip(c, powers))

    def beta_prime(r):
        r = np.asarray(r, dtype=float)
        return sum(ck * p * r ** (p - 1) for ck, p in zip(c, powers)) + np.zeros_like(r)

    def beta_bound(lo, hi):
        m = max(abs(lo), abs(hi))
        return float(sum(abs(ck) * p * m ** (p - 1) for ck, p in zip(c, powers)))

    return NonlinearitySpec(
        beta=beta,
        beta_hat=beta_hat,
        pi=lambda r: s * np.asarray(r, dtype=float),
        pi_lipschitz=abs(s),
        beta_prime=beta_prime,
        pi_prime=lambda r: np.full(np.shape(r), s),
        beta_bound=beta_bound,
        name="custom",
    )


def _as_nodal(values, mesh):
    values = np.asarray(values, dtype=float)
    return np.broadcast_to(values, (mesh.size,)).copy() if values.ndim == 0 else values


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Everything needed to integrate the discrete system on one mesh.

    ``f`` and ``g`` are callables ``(points, t) -> values``; ``g`` is only read
    at boundary nodes. Initial data are node vectors.
    """

    mesh: SpatialMesh
    kernel: "KernelTable"
    nonlinearity: NonlinearitySpec
    T: float
    f: SpaceTimeFunction
    g: SpaceTimeFunction
    theta0: np.ndarray
    phi0: np.ndarray
    v0: np.ndarray
    theta_min: float = 1e-8
    name: str = "scenario"

    def __post_init__(self):
        for key in ("theta0", "phi0", "v0"):
            values = self.mesh.check_field(getattr(self, key), key)
            values = values.copy()
            values.setflags(write=False)
            object.__setattr__(self, key, values)
        if not self.T > 0:
            raise DomainError(f"final time must be positive, got {self.T}")

    @property
    def u0(self):
        return -1.0 / self.theta0

    def sample_f(self, t):
        return _as_nodal(self.f(self.mesh.points, t), self.mesh)

    def sample_g(self, t):
        """Boundary source at time ``t`` as a node vector (zero at interior nodes)."""
        values = _as_nodal(self.g(self.mesh.points, t), self.mesh)
        out = np.zeros(self.mesh.size)
        bn = self.mesh.boundary_nodes
        out[bn] = values[bn]
        return out

    @cached_property
    def robin(self) -> "RobinOperator":
        from .elliptic import assemble_robin

        return assemble_robin(self.mesh)


@dataclass
class FieldState:
    """One time level. ``z`` is ``None`` at ``n = 0``."""

    n: int
    u: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    z: Optional[np.ndarray] = None

    def check(self, previous=None, h=None, rtol=1e-12):
        """Raise :class:`DomainError` if a level invariant is broken."""
        if not np.all(self.u < 0) or not np.all(self.theta > 0):
            raise DomainError(f"sign structure lost at level {self.n}")
        if not np.allclose(self.theta, -1.0 / self.u, rtol=rtol, atol=0.0):
            raise DomainError(f"theta != -1/u at level {self.n}")
        if previous is None:
            return
        scale = max(1.0, float(np.max(np.abs(self.v))))
        v_expected = (self.phi - previous.phi) / h
        if np.max(np.abs(self.v - v_expected)) > 1e3 * np.finfo(float).eps * scale / h:
            raise DomainError(f"v is not the difference quotient of phi at level {self.n}")
        z_expected = (self.v - previous.v) / h
        zscale = max(1.0, float(np.max(np.abs(self.z))))
        if np.max(np.abs(self.z - z_expected)) > 1e3 * np.finfo(float).eps * zscale / h:
            raise DomainError(f"z is not the difference quotient of v at level {self.n}")


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "accepted" if self.ok else "; ".join(self.violations)


def validate_problem(spec, n_beta_samples=1000, beta_range=10.0, n_time_samples=33):
    """Check the structural assumptions on kernel, nonlinearities and data.

    Returns a report; an empty violation list means the problem is accepted.
    """
    report = ValidationReport()
    issues = report.violations

    samples = spec.kernel.samples
    flipped = samples[tuple(slice(None, None, -1) for _ in range(samples.ndim))]
    scale = max(float(np.max(np.abs(samples))), np.finfo(float).tiny)
    if np.max(np.abs(samples - flipped)) > 1e-12 * scale:
        issues.append("kernel symmetry violation: J(-x) != J(x)")
    if not np.isfinite(spec.kernel.sup_bound):
        issues.append("kernel integrability violation: sup_x int |J(x-y)| dy is not finite")

    nl = spec.nonlinearity
    r = np.linspace(-beta_range, beta_range, n_beta_samples)
    b = np.asarray(nl.beta(r), dtype=float)
    if not np.all(np.isfinite(b)) or np.any(np.diff(b) < -1e-12 * max(1.0, np.max(np.abs(b)))):
        issues.append("monotonicity violation: beta decreases somewhere")
    bh = np.asarray(nl.beta_hat(r), dtype=float)
    if abs(float(nl.beta_hat(np.array(0.0)))) > 1e-14:
        issues.append("primitive normalisation violation: beta_hat(0) != 0")
    if np.any(bh < -1e-14):
        issues.append("primitive sign violation: beta_hat < 0")

    rp = np.linspace(-beta_range, beta_range, 201)
    p = np.asarray(nl.pi(rp), dtype=float)
    dp = np.abs(p[:, None] - p[None, :])
    dr = np.abs(rp[:, None] - rp[None, :])
    if not np.isfinite(nl.pi_lipschitz) or np.any(dp > nl.pi_lipschitz * dr * (1 + 1e-12) + 1e-12):
        issues.append("Lipschitz violation: pi changes faster than L_pi")

    if np.any(~np.isfinite(spec.theta0)) or np.any(spec.theta0 <= 0):
        issues.append("positivity violation: theta0 <= 0")
    if np.any(~np.isfinite(spec.phi0)) or np.any(~np.isfinite(spec.v0)):
        issues.append("boundedness violation: phi0 or v0 not finite")

    bn = spec.mesh.boundary_nodes
    times = np.linspace(0.0, spec.T, n_time_samples)
    g_bad = f_bad = False
    for t in times:
        g = spec.sample_g(t)[bn]
        if np.any(~np.isfinite(g)) or np.any(g > 0):
            g_bad = True
        if np.any(~np.isfinite(spec.sample_f(t))):
            f_bad = True
    if g_bad:
        issues.append("boundary sign violation: g > 0 on the boundary")
    if f_bad:
        issues.append("source integrability violation: f not finite")
    return report


def initial_state(spec):
    theta = np.array(spec.theta0, dtype=float)
    if np.any(~(theta > spec.theta_min)):
        raise DomainError(
            f"theta0 must exceed theta_min={spec.theta_min:g} at every node "
            f"(min is {np.min(theta):g})"
        )
    return FieldState(
        n=0,
        u=-1.0 / theta,
        theta=theta,
        phi=np.array(spec.phi0, dtype=float),
        v=np.array(spec.v0, dtype=float),
        z=None,
    )
