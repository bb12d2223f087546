"""Empirical Cauchy rates between trajectories with different time steps."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .diagnostics import h1_norm
from .errors import DegenerateFit, GridError
from .stepper import run


def _check_refines(times, steps, T):
    times = np.asarray(times, dtype=float)
    for step in steps:
        n = int(round(T / step))
        if not math.isclose(n * step, T, rel_tol=1e-9):
            raise GridError(f"step {step} does not divide T={T}")
        marks = np.arange(n + 1) * step
        idx = np.searchsorted(times, marks - 1e-9 * step)
        idx = np.minimum(idx, len(times) - 1)
        if np.any(np.abs(times[idx] - marks) > 1e-9 * step):
            raise GridError(f"sampling grid does not refine the step grid h={step}")


def one_star(samples, times, kind="continuous", refine=()):
    """Running time integral ``(1*w)(t_j) = int_0^{t_j} w``.

    ``samples[j]`` is ``w(t_j)``. For ``kind='continuous'`` the composite
    trapezoid rule is used; for ``kind='bar'`` ``samples[j]`` (``j >= 1``) is
    the value on ``(t_{j-1}, t_j]`` and the integral is exact. ``refine`` lists
    step sizes whose grids the sampling must contain.
    """
    samples = np.asarray(samples, dtype=float)
    times = np.asarray(times, dtype=float)
    if samples.shape[0] != times.shape[0]:
        raise GridError("one sample per time is required")
    if np.any(np.diff(times) <= 0):
        raise GridError("sampling times must be increasing")
    if refine:
        _check_refines(times, refine, times[-1])
    dt = np.diff(times)
    shape = (-1,) + (1,) * (samples.ndim - 1)
    if kind == "bar":
        incr = dt.reshape(shape) * samples[1:]
    elif kind == "continuous":
        incr = 0.5 * dt.reshape(shape) * (samples[1:] + samples[:-1])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    out = np.zeros_like(samples)
    out[1:] = np.cumsum(incr, axis=0)
    return out


def _bar_levels_on(traj, fine_N):
    """Levels of a bar field of ``traj`` seen on a nested finer grid (rows ``1..fine_N``)."""
    r = fine_N // traj.N
    k = (np.arange(1, fine_N + 1) + r - 1) // r  # coarse level holding ((j-1)tau, j tau]
    return k


def _hat_on(levels, N, fine_N):
    r = fine_N // N
    j = np.arange(fine_N + 1)
    n = np.minimum(j // r, N - 1)
    s = (j - n * r) / r
    return levels[n] + (levels[n + 1] - levels[n]) * s[:, None]


@dataclass
class CauchyErrors:
    h: float
    tau: float
    E_u: float
    E_phi: float
    E_v: float
    f_gap: float
    g_gap: float

    @property
    def E_total(self):
        return self.E_u + self.E_phi + self.E_v


def cauchy_from_trajectories(coarse, fine):
    """Sup-in-time distances between two trajectories on nested step grids."""
    if fine.N % coarse.N:
        raise GridError(f"N={fine.N} is not a multiple of N={coarse.N}")
    if not math.isclose(coarse.T, fine.T):
        raise GridError("trajectories have different final times")
    mesh = fine.mesh
    op = fine.spec.robin
    Nf = fine.N
    tau = fine.h
    times = np.arange(Nf + 1) * tau

    k = _bar_levels_on(coarse, Nf)
    u_c = np.zeros((Nf + 1, mesh.size))
    u_c[1:] = coarse.levels("u")[k]
    u_f = fine.levels("u").copy()
    u_f[0] = 0.0
    int_diff = one_star(u_c - u_f, times, kind="bar")
    E_u = max(h1_norm(op, row) for row in int_diff)

    w = mesh.weights
    dphi = _hat_on(coarse.levels("phi"), coarse.N, Nf) - fine.levels("phi")
    dv = _hat_on(coarse.levels("v"), coarse.N, Nf) - fine.levels("v")
    E_phi = float(np.sqrt(np.max((dphi**2) @ w)))
    E_v = float(np.sqrt(np.max((dv**2) @ w)))

    df = coarse.f_avg[k - 1] - fine.f_avg
    dg = coarse.g_avg[k - 1] - fine.g_avg
    f_gap = float(np.sqrt(tau * np.sum((df**2) @ w)))
    g_gap = float(np.sqrt(tau * np.sum((dg**2) @ mesh.boundary_weights)))
    return CauchyErrors(coarse.h, tau, float(E_u), E_phi, E_v, f_gap, g_gap)


def _steps(T, h):
    N = int(round(T / h))
    if N < 1 or not math.isclose(N * h, T, rel_tol=1e-9):
        raise GridError(f"h={h} does not divide T={T}")
    return N


def cauchy_pair(spec, h, tau, spec_tau=None, **run_kwargs):
    """Run both step sizes and return ``(E_u, E_phi, E_v)``.

    ``spec_tau`` optionally supplies different data for the ``tau`` run (used
    when the boundary data are tied to one step grid).
    """
    N_h, N_tau = _steps(spec.T, h), _steps(spec.T, tau)
    if N_tau % N_h:
        raise GridError("tau must divide h so that the time levels nest")
    coarse = run(spec, N_h, **run_kwargs)
    fine = coarse if (N_tau == N_h and spec_tau is None) else run(spec_tau or spec, N_tau, **run_kwargs)
    err = cauchy_from_trajectories(coarse, fine)
    return err.E_u, err.E_phi, err.E_v


class RateFit(NamedTuple):
    p: float
    M: float
    ratios: tuple


def fit_rate(h, E):
    """Least-squares fit ``log E = log M + p log h``; also adjacent ratios ``E(h)/E(h/2)``."""
    h = np.asarray(h, dtype=float)
    E = np.asarray(E, dtype=float)
    if h.size < 3:
        raise DegenerateFit("need at least three rows to fit a rate")
    if np.any(E <= 0):
        raise DegenerateFit("zero error: trajectories coincide; drop the row")
    order = np.argsort(-h)
    h, E = h[order], E[order]
    p, logM = np.polyfit(np.log(h), np.log(E), 1)
    return RateFit(float(p), float(np.exp(logM)), tuple(E[:-1] / E[1:]))


@dataclass
class RateReport:
    rows: list
    fit: RateFit = None
    reference: bool = False
    largest_admissible_h: float = float("nan")
    notes: list = field(default_factory=list)

    @property
    def h(self):
        return np.array([r.h for r in self.rows])

    @property
    def E(self):
        return np.array([r.E_total for r in self.rows])

    def envelope(self):
        """``E / (h^1/2 + tau^1/2)`` per row."""
        return np.array([r.E_total / (math.sqrt(r.h) + math.sqrt(r.tau)) for r in self.rows])

    def envelope_spread(self):
        """max / min of the envelope constant over the finer half of the ladder."""
        env = self.envelope()
        lower = env[len(env) // 2:]
        return float(lower.max() / lower.min())

    def summary(self):
        p, M = (self.fit.p, self.fit.M) if self.fit else (float("nan"), float("nan"))
        return f"p={p:.6f} M={M:.6e} M_env={self.envelope().max():.6e} spread={self.envelope_spread():.4f}"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["h", "tau", "E_u", "E_phi", "E_v", "E_total", "f_gap", "g_gap"])
            for r in self.rows:
                writer.writerow([repr(float(x)) for x in
                                 (r.h, r.tau, r.E_u, r.E_phi, r.E_v, r.E_total, r.f_gap, r.g_gap)])
            fh.write(f"# {self.summary()}\n")


def run_ladder(spec, exponents=range(5, 11), reference_N=None, workers=1, **run_kwargs):
    """Cauchy ladder ``h = T/2^e`` against ``tau = h/2`` (or a fixed reference run).

    Trajectories shared between neighbouring rows are computed once.
    """
    exponents = sorted(exponents)
    Ns = {2**e for e in exponents}
    if reference_N is None:
        Ns |= {2 ** (e + 1) for e in exponents}
    else:
        Ns.add(int(reference_N))

    def job(N):
        return N, run(spec, N, **run_kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = dict(pool.map(job, sorted(Ns)))
    else:
        trajs = dict(job(N) for N in sorted(Ns))

    rows = []
    for e in exponents:
        N = 2**e
        other = trajs[reference_N] if reference_N is not None else trajs[2 * N]
        rows.append(cauchy_from_trajectories(trajs[N], other))
    report = RateReport(rows, reference=reference_N is not None)
    report.fit = fit_rate(report.h, report.E)
    return report
