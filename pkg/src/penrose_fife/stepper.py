"""Implicit time stepping by the fixed point ``phi -> Psi(Phi(phi))``.

One step from level ``n`` to ``n + 1`` alternates two solves:

* ``Phi``: given a phase guess, the singular elliptic problem
  ``-1/u - h Delta u = -phi + h f_{n+1} + phi_n + theta_n`` with Robin datum
  ``g_{n+1}``;
* ``Psi``: given ``u``, the pointwise equation
  ``(1 + h) r + h^2 beta(r) + h^2 pi(r) = h^2 u + phi_n + h v_n + h phi_n
  - h^2 (a phi_n - J * phi_n)``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import FieldState, initial_state
from .elliptic import solve_singular_elliptic
from .errors import (BracketFailure, DataError, DomainError, RangeError, SolverError,
                     StepTooLarge, TrajectoryError)
from .kernel import nonlocal_term

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 1 or not self.T > 0:
            raise ValueError(f"need T > 0 and N >= 1, got T={self.T}, N={self.N}")

    @property
    def h(self):
        return self.T / self.N

    @property
    def times(self):
        return np.arange(self.N + 1) * self.h


@dataclass
class StepStats:
    iterations: int = 0
    displacements: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    elliptic_iterations: int = 0
    residual_phase: float = 0.0

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0


# -- data averaging ---------------------------------------------------------

def average_data(spec, grid, points_per_step=8, panels=1):
    """Per-step means ``f_k``, ``g_k`` of the source and boundary data.

    Each step is split into ``panels`` sub-intervals, each integrated with a
    ``points_per_step``-point Gauss-Legendre rule. Nodes are interior, so data
    that are piecewise constant on the steps are averaged exactly.
    """
    if points_per_step * panels < 8:
        raise DataError("time sampling must use at least 8 points per step")
    xg, wg = np.polynomial.legendre.leggauss(points_per_step)
    # nodes/weights on [0, 1] for the composite rule
    s = ((np.arange(panels)[:, None] + 0.5 * (xg[None, :] + 1.0)) / panels).ravel()
    ws = np.tile(0.5 * wg / panels, panels)
    h = grid.h
    n = spec.mesh.size
    f_avg = np.zeros((grid.N, n))
    g_avg = np.zeros((grid.N, n))
    for k in range(grid.N):
        t0 = k * h
        for sj, wj in zip(s, ws):
            t = t0 + sj * h
            f_avg[k] += wj * spec.sample_f(t)
            g_avg[k] += wj * spec.sample_g(t)
    return f_avg, g_avg


# -- the two half maps ------------------------------------------------------

def phi_map(phi_guess, state, f_next, g_next, h, spec, u_init=None, tol=1e-10,
            max_iter=100, return_info=False):
    """``Phi``: phase guess -> temperature variable ``u`` (elliptic solve)."""
    G = -phi_guess + h * f_next + state.phi + state.theta
    if u_init is None:
        u_init = state.u
    return solve_singular_elliptic(spec.robin, G, g_next, h, u_init=u_init, tol=tol,
                                   max_iter=max_iter, return_info=return_info)


def phase_rhs(state, h, spec):
    """Part of the ``Psi`` right-hand side that does not depend on ``u``."""
    return (state.phi + h * state.v + h * state.phi
            - h * h * nonlocal_term(spec.kernel, state.phi))


def solve_phase_equation(G, h, nonlinearity, tol=1e-12, max_iter=200):
    """Solve ``(1 + h) r + h^2 beta(r) + h^2 pi(r) = G`` node by node.

    Safeguarded Newton inside an expanding sign-change bracket; Newton steps
    leaving the bracket are replaced by bisection.
    """
    nl = nonlinearity
    if h * nl.pi_lipschitz >= 1.0:
        raise StepTooLarge(f"h={h:g} violates h * L_pi < 1 (L_pi={nl.pi_lipschitz:g})")
    G = np.asarray(G, dtype=float)
    h2 = h * h

    def F(r):
        return (1.0 + h) * r + h2 * (nl.beta(r) + nl.pi(r)) - G

    r = G / (1.0 + h)
    lo, hi = r.copy(), r.copy()
    width = np.maximum(1.0, np.abs(r))
    Flo, Fhi = F(lo), F(hi)
    for _ in range(200):
        need_lo = Flo > 0
        need_hi = Fhi < 0
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, lo - width, lo)
        hi = np.where(need_hi, hi + width, hi)
        width = np.where(need_lo | need_hi, 2.0 * width, width)
        Flo, Fhi = F(lo), F(hi)
    else:
        raise BracketFailure("no sign change found for the phase equation")

    has_derivative = nl.beta_prime is not None and nl.pi_prime is not None
    scale = tol * np.maximum(1.0, np.abs(G))
    Fr = F(r)
    for _ in range(max_iter):
        done = np.abs(Fr) <= scale
        if done.all():
            return r
        lo = np.where(Fr < 0, r, lo)
        hi = np.where(Fr > 0, r, hi)
        collapsed = (hi - lo) <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(r))
        if np.all(done | collapsed):
            return r
        mid = 0.5 * (lo + hi)
        if has_derivative:
            dF = (1.0 + h) + h2 * (nl.beta_prime(r) + nl.pi_prime(r))
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = r - Fr / dF
            ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
            step = np.where(ok, newton, mid)
        else:
            step = mid
        r = np.where(done, r, step)
        Fr = F(r)
    raise BracketFailure("phase equation did not converge")


def psi_map(u, state, h, spec, tol=1e-12):
    """``Psi``: temperature variable -> phase (pointwise scalar solves)."""
    return solve_phase_equation(h * h * u + phase_rhs(state, h, spec), h, spec.nonlinearity, tol=tol)


# -- one step and a full run -----------------------------------------------

def _l2(weights, x):
    return float(np.sqrt(np.dot(weights, x * x)))


def fixed_point_step(state, f_next, g_next, h, spec, tol=1e-10, max_iter=50,
                     elliptic_tol=1e-10, phase_tol=1e-12):
    """Advance one level by Banach iteration of ``B = Psi o Phi`` from ``phi_n``."""
    w = spec.mesh.weights
    base = phase_rhs(state, h, spec)
    nl = spec.nonlinearity
    if h * nl.pi_lipschitz >= 1.0:
        raise StepTooLarge(f"h={h:g} violates h * L_pi < 1")

    stats = StepStats()
    phi = state.phi
    u = state.u
    growth = 0
    while True:
        u, info = phi_map(phi, state, f_next, g_next, h, spec, u_init=u, tol=elliptic_tol,
                          return_info=True)
        stats.elliptic_iterations += info.iterations
        phi_new = solve_phase_equation(h * h * u + base, h, nl, tol=phase_tol)
        d = _l2(w, phi_new - phi)
        stats.iterations += 1
        if stats.displacements:
            prev = stats.displacements[-1]
            q = d / prev if prev > 0 else 0.0
            stats.ratios.append(q)
            growth = growth + 1 if q >= 1.0 else 0
            if growth >= 3:
                raise StepTooLarge(f"fixed-point map is not contracting at h={h:g} (q={q:.3g})")
        stats.displacements.append(d)
        phi = phi_new
        if d <= tol:
            break
        if stats.iterations >= max_iter:
            raise StepTooLarge(f"fixed-point iteration did not converge in {max_iter} iterations at h={h:g}")

    u_next = phi_map(phi, state, f_next, g_next, h, spec, u_init=u, tol=elliptic_tol)
    v_next = (phi - state.phi) / h
    z_next = (v_next - state.v) / h
    new = FieldState(n=state.n + 1, u=u_next, theta=-1.0 / u_next, phi=phi, v=v_next, z=z_next)
    stats.residual_phase = _l2(w, phase_residual(state, new, h, spec))
    return new, stats


def phase_residual(prev, new, h, spec):
    """Residual of the second discrete equation at level ``new.n``."""
    nl = spec.nonlinearity
    return (new.z + new.v + nonlocal_term(spec.kernel, prev.phi)
            + nl.beta(new.phi) + nl.pi(new.phi) - new.u)


def energy_residual_weak(prev, new, f_next, g_next, h, spec):
    """First discrete equation tested against every nodal hat function."""
    op = spec.robin
    w = op.weights
    return (w * (new.theta - prev.theta) / h + w * (new.phi - prev.phi) / h
            + op.matrix @ new.u - op.load(g_next) - w * f_next)


@dataclass
class DiscreteTrajectory:
    grid: TimeGrid
    states: list
    f_avg: np.ndarray
    g_avg: np.ndarray
    stats: list
    spec: object = None

    @property
    def h(self):
        return self.grid.h

    @property
    def T(self):
        return self.grid.T

    @property
    def N(self):
        return self.grid.N

    @property
    def mesh(self):
        return self.spec.mesh

    def levels(self, tag):
        """Stack of node vectors, one row per level ``0..N``.

        ``f`` and ``g`` rows are the step averages placed at their right
        endpoint (row 0 is NaN), as are the ``z`` rows.
        """
        if tag in ("f", "g"):
            data = self.f_avg if tag == "f" else self.g_avg
            out = np.full((self.N + 1, data.shape[1]), np.nan)
            out[1:] = data
            return out
        if tag == "z":
            out = np.full((self.N + 1, self.states[0].u.size), np.nan)
            out[1:] = np.array([s.z for s in self.states[1:]])
            return out
        return np.array([getattr(s, tag) for s in self.states])


def run(spec, N, tol=1e-10, max_iter=50, elliptic_tol=1e-10, points_per_step=8,
        residual_tol=1e-6, check=True):
    """Integrate the discrete problem over ``N`` uniform steps."""
    grid = TimeGrid(spec.T, int(N))
    h = grid.h
    f_avg, g_avg = average_data(spec, grid, points_per_step=points_per_step)
    state = initial_state(spec)
    states = [state]
    stats = []
    for n in range(grid.N):
        try:
            new, st = fixed_point_step(state, f_avg[n], g_avg[n], h, spec, tol=tol,
                                       max_iter=max_iter, elliptic_tol=elliptic_tol)
            if check:
                new.check(state, h)
                weak = energy_residual_weak(state, new, f_avg[n], g_avg[n], h, spec)
                if max(st.residual_phase, float(np.max(np.abs(weak)))) > residual_tol:
                    raise DomainError(
                        f"step residual too large: phase {st.residual_phase:.2e}, "
                        f"energy {np.max(np.abs(weak)):.2e}")
        except (SolverError, DomainError) as exc:
            raise TrajectoryError(n, exc) from exc
        states.append(new)
        stats.append(st)
        state = new
    log.debug("run N=%d finished, max fixed-point iterations %d", grid.N,
              max((s.iterations for s in stats), default=0))
    return DiscreteTrajectory(grid, states, f_avg, g_avg, stats, spec)


def find_max_step(spec, N_start=1, N_max=4096, **run_kwargs):
    """Smallest ``N`` (largest ``h = T/N``) for which a full run succeeds.

    Doubles ``N`` until a run succeeds, then bisects between the last failing
    and first succeeding step counts. Returns ``(N, h)``; raises
    :class:`StepTooLarge` if even ``N_max`` fails.
    """
    def ok(N):
        try:
            run(spec, N, **run_kwargs)
            return True
        except TrajectoryError:
            return False

    N = max(1, int(N_start))
    if ok(N):
        return N, spec.T / N
    bad = N
    while True:
        N *= 2
        if N > N_max:
            raise StepTooLarge(f"no admissible step found up to N={N_max}")
        if ok(N):
            break
        bad = N
    good = N
    while good - bad > 1:
        mid = (good + bad) // 2
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good, spec.T / good


# -- time interpolants --------------------------------------------------------

_HAT_TAGS = {"theta", "phi", "v"}
_BAR_TAGS = {"u", "theta", "phi", "phi_under", "v", "z", "f", "g"}


def _check_time(traj, t):
    if not (-1e-12 * traj.T <= t <= traj.T * (1 + 1e-12)):
        raise RangeError(f"t={t} outside [0, {traj.T}]")


def hat_index(traj, t):
    """Step ``n`` and local coordinate ``s in [0, 1]`` with ``t = (n + s) h``."""
    _check_time(traj, t)
    x = t / traj.h
    n = int(math.floor(x + 1e-9))
    n = min(max(n, 0), traj.N - 1)
    s = min(max(x - n, 0.0), 1.0)
    if abs(s) < 1e-9:
        s = 0.0
    elif abs(s - 1.0) < 1e-9:
        s = 1.0
    return n, s


def bar_index(traj, t):
    """Level ``k`` with ``t in ((k-1) h, k h]`` and whether ``t = 0`` was clamped."""
    _check_time(traj, t)
    k = int(math.ceil(t / traj.h - 1e-9))
    if k < 1:
        return 1, True
    return min(k, traj.N), False


def eval_hat(traj, tag, t):
    if tag not in _HAT_TAGS:
        raise KeyError(f"no piecewise-linear interpolant for {tag!r}")
    n, s = hat_index(traj, t)
    a = getattr(traj.states[n], tag)
    b = getattr(traj.states[n + 1], tag)
    if s == 0.0:
        return a.copy()
    if s == 1.0:
        return b.copy()
    return a + (b - a) * s


def eval_bar(traj, tag, t, return_clamped=False):
    if tag not in _BAR_TAGS:
        raise KeyError(f"no piecewise-constant interpolant for {tag!r}")
    k, clamped = bar_index(traj, t)
    if tag == "phi_under":
        value = traj.states[k - 1].phi.copy()
    elif tag == "f":
        value = traj.f_avg[k - 1].copy()
    elif tag == "g":
        value = traj.g_avg[k - 1].copy()
    else:
        value = getattr(traj.states[k], tag).copy()
    if return_clamped:
        return value, clamped
    return value


def hat_derivative(traj, tag, t):
    """Time derivative of the piecewise-linear interpolant (right-continuous convention)."""
    k, _ = bar_index(traj, t)
    a = getattr(traj.states[k - 1], tag)
    b = getattr(traj.states[k], tag)
    return (b - a) / traj.h


# -- export ---------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "node", "x", "u", "theta", "phi", "v", "z")


def _fmt(x):
    return repr(float(x))


def export_trajectory_csv(traj, path, stride=1):
    """One row per node per saved level; ``z`` is empty at level 0.

    Every ``stride``-th level is written, and the final level always is.
    """
    pts = traj.mesh.points
    columns = list(TRAJECTORY_COLUMNS)
    if pts.shape[1] == 2:
        columns.insert(3, "y")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        saved = list(range(0, traj.N + 1, max(1, int(stride))))
        if saved[-1] != traj.N:
            saved.append(traj.N)
        for n in saved:
            s = traj.states[n]
            t = n * traj.h
            for i in range(pts.shape[0]):
                row = [_fmt(t), i, _fmt(pts[i, 0])]
                if pts.shape[1] == 2:
                    row.append(_fmt(pts[i, 1]))
                row += [_fmt(s.u[i]), _fmt(s.theta[i]), _fmt(s.phi[i]), _fmt(s.v[i]),
                        "" if s.z is None else _fmt(s.z[i])]
                writer.writerow(row)
