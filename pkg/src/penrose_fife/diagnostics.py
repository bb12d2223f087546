"""Discrete norms, a priori estimate monitors, identity checks and weak residuals."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np

from .elliptic import dual_inner
from .errors import ShapeError
from .stepper import energy_residual_weak

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_S = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _field(mesh, w):
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != mesh.size:
        raise ShapeError(f"field with {w.shape[-1]} values does not match {mesh.size} nodes")
    return w


def l1_norm(mesh, w):
    return float(np.dot(mesh.weights, np.abs(_field(mesh, w))))


def l2_norm(mesh, w):
    w = _field(mesh, w)
    return float(np.sqrt(np.dot(mesh.weights, w * w)))


def linf_norm(mesh, w):
    return float(np.max(np.abs(_field(mesh, w))))


def grad_sq(op, w):
    """``||grad w||^2`` from edge differences (the stiffness quadratic form)."""
    return float(w @ (op.stiffness @ w))


def h1_norm(op, w):
    w = _field(op.mesh, w)
    return float(np.sqrt(grad_sq(op, w) + np.dot(op.weights, w * w)))


def boundary_l2_sq(mesh, w):
    return float(np.dot(mesh.boundary_weights, np.asarray(w) ** 2))


def norms(mesh, w, op=None):
    from .elliptic import assemble_robin

    op = op or assemble_robin(mesh)
    return {"L1": l1_norm(mesh, w), "L2": l2_norm(mesh, w),
            "Linf": linf_norm(mesh, w), "H1": h1_norm(op, w)}


# -- Bochner norms ----------------------------------------------------------------

def _space_inner(traj, space):
    """Bilinear form for Hilbert space norms, ``None`` for L1 / Linf."""
    mesh, op = traj.mesh, traj.spec.robin
    if space == "L2":
        return lambda a, b: np.sum(mesh.weights[:, None] * a.T * b.T, axis=0)
    if space == "H1":
        return lambda a, b: (np.sum((op.stiffness @ a.T) * b.T, axis=0)
                             + np.sum(mesh.weights[:, None] * a.T * b.T, axis=0))
    if space == "H1*":
        return lambda a, b: dual_inner(op, a.T, b.T)
    return None


def _space_norm(traj, space):
    mesh, op = traj.mesh, traj.spec.robin
    if space == "L1":
        return lambda a: np.abs(a) @ mesh.weights
    if space == "Linf":
        return lambda a: np.max(np.abs(a), axis=-1)
    inner = _space_inner(traj, space)
    if inner is None:
        raise KeyError(f"unknown space norm {space!r}")
    return lambda a: np.sqrt(np.maximum(inner(a, a), 0.0))


def bochner_norms_levels(traj, levels, space, kind):
    """Time norms of a field given by its levels ``0..N``.

    ``kind='bar'`` treats level ``k`` as constant on ``((k-1)h, kh]`` (level 0
    is ignored); ``kind='hat'`` interpolates linearly between levels. Hilbert
    space norms are integrated exactly in time.
    """
    h = traj.h
    norm = _space_norm(traj, space)
    if kind == "bar":
        vals = norm(levels[1:])
        return {"L2": float(np.sqrt(h * np.sum(vals**2))), "Linf": float(np.max(vals)),
                "C": float("nan")}
    if kind != "hat":
        raise ValueError(f"kind must be 'bar' or 'hat', got {kind!r}")
    a, b = levels[:-1], levels[1:]
    inner = _space_inner(traj, space)
    if inner is not None:
        per_step = (inner(a, a) + inner(a, b) + inner(b, b)) / 3.0
    else:
        per_step = sum(wq * norm(a + sq * (b - a)) ** 2 for sq, wq in zip(_GL_S, _GL_W))
    endpoint = norm(levels)
    sup = float(np.max(endpoint))
    return {"L2": float(np.sqrt(h * np.sum(per_step))), "Linf": sup, "C": sup}


def bochner_norms(traj, tag, space="L2", kind="bar"):
    levels = traj.levels("phi" if tag == "phi_under" else tag)
    if tag == "phi_under":
        levels = np.vstack([levels[:1], levels[:-1]])
    return bochner_norms_levels(traj, levels, space, kind)


# -- monitored quantities -----------------------------------------------------------

@dataclass
class EstimateRecord:
    step: int
    t: float
    phi_l2_sq: float
    v_l2_sq: float
    beta_hat_l1: float
    theta_l1: float
    log_theta_l1: float
    h_sum_u_h1_sq: float
    theta_l2_sq: float
    log_theta_h1_sq: float
    theta_hat_t_dual: float
    u_sum_h2_proxy: float
    phi_linf: float
    v_linf: float
    beta_phi_linf: float
    z_l2l2: float


ESTIMATE_COLUMNS = tuple(f.name for f in fields(EstimateRecord))
MONITORED = ESTIMATE_COLUMNS[2:]


def monitor(traj):
    """Per-level values of every quantity bounded by the uniform estimates.

    Running quantities (sums, Bochner norms up to ``t_m`` and the sup of
    ``|beta(phi)|``) are accumulated over levels ``1..m``.
    """
    spec = traj.spec
    mesh, op, nl = spec.mesh, spec.robin, spec.nonlinearity
    w = mesh.weights
    h = traj.h
    records = []
    h1_sum = dual_sum = z_sum = beta_sup = 0.0
    U = np.zeros(mesh.size)
    G_sum = np.zeros(mesh.size)
    for m, s in enumerate(traj.states):
        log_theta = np.log(s.theta)
        if m > 0:
            prev = traj.states[m - 1]
            h1_sum += h * h1_norm(op, s.u) ** 2
            dtheta = (s.theta - prev.theta) / h
            dual_sum += h * float(dual_inner(op, dtheta, dtheta))
            z_sum += h * float(np.dot(w, s.z * s.z))
            beta_sup = max(beta_sup, float(np.max(np.abs(nl.beta(s.phi)))))
            U = U - h * s.u
            G_sum = G_sum - h * traj.g_avg[m - 1]
        lap = op.apply(U, G_sum)
        records.append(EstimateRecord(
            step=m,
            t=m * h,
            phi_l2_sq=float(np.dot(w, s.phi**2)),
            v_l2_sq=float(np.dot(w, s.v**2)),
            beta_hat_l1=float(np.dot(w, nl.beta_hat(s.phi))),
            theta_l1=l1_norm(mesh, s.theta),
            log_theta_l1=l1_norm(mesh, log_theta),
            h_sum_u_h1_sq=h1_sum,
            theta_l2_sq=float(np.dot(w, s.theta**2)),
            log_theta_h1_sq=h1_norm(op, log_theta) ** 2,
            theta_hat_t_dual=float(np.sqrt(dual_sum)),
            u_sum_h2_proxy=h1_norm(op, U) + l2_norm(mesh, lap),
            phi_linf=linf_norm(mesh, s.phi),
            v_linf=linf_norm(mesh, s.v),
            beta_phi_linf=beta_sup,
            z_l2l2=float(np.sqrt(z_sum)),
        ))
    return records


def record_suprema(records):
    return {k: max(getattr(r, k) for r in records) for k in MONITORED}


def export_estimates_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ESTIMATE_COLUMNS)
        for r in records:
            row = asdict(r)
            writer.writerow([row["step"]] + [repr(float(row[k])) for k in ESTIMATE_COLUMNS[1:]])


# -- weak residual ----------------------------------------------------------------------

def weak_residual(traj, tests=None):
    """Max over steps and test functions of the first equation's weak residual.

    ``tests`` is an optional ``(n_tests, n_nodes)`` array of nodal test
    functions; by default every hat function is used, i.e. each node's row.
    Returns ``(max_residual, per_step_max)``.
    """
    per_step = []
    for n in range(traj.N):
        r = energy_residual_weak(traj.states[n], traj.states[n + 1], traj.f_avg[n],
                                 traj.g_avg[n], traj.h, traj.spec)
        if tests is not None:
            r = np.asarray(tests) @ r
        per_step.append(float(np.max(np.abs(r))))
    return max(per_step, default=0.0), per_step


# -- exact identities and inequalities ---------------------------------------------

@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    error: float
    tol: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<12s} lhs={self.lhs:.10e} rhs={self.rhs:.10e} err={self.error:.2e} tol={self.tol:.0e}"


def _rel(lhs, rhs):
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def _equality(name, lhs, rhs, tol):
    err = _rel(lhs, rhs)
    return CheckResult(name, lhs, rhs, err, tol, err <= tol)


def _inequality(name, lhs, rhs, tol):
    """``lhs >= rhs - tol``; ``error`` is the (signed) slack ``lhs - rhs``."""
    slack = lhs - rhs
    return CheckResult(name, lhs, rhs, slack, tol, slack >= -tol)


def phase_energy_defects(traj):
    """Relative defect of the per-step phase energy identity."""
    w = traj.mesh.weights
    errs = []
    for n in range(traj.N):
        a, b = traj.states[n], traj.states[n + 1]
        lhs = 0.5 * np.dot(w, b.phi**2) - 0.5 * np.dot(w, a.phi**2) + 0.5 * np.dot(w, (b.phi - a.phi) ** 2)
        rhs = traj.h * np.dot(w, b.phi * b.v)
        scale = max(abs(lhs), abs(rhs), 0.5 * np.dot(w, b.phi**2), np.finfo(float).tiny)
        errs.append(abs(lhs - rhs) / scale)
    return np.array(errs)


def convexity_slacks(traj):
    """``(beta(phi_{n+1}), phi_{n+1} - phi_n) - (int beta_hat(phi_{n+1}) - int beta_hat(phi_n))``."""
    nl = traj.spec.nonlinearity
    w = traj.mesh.weights
    out = []
    for n in range(traj.N):
        a, b = traj.states[n], traj.states[n + 1]
        lhs = np.dot(w, nl.beta(b.phi) * (b.phi - a.phi))
        rhs = np.dot(w, nl.beta_hat(b.phi)) - np.dot(w, nl.beta_hat(a.phi))
        out.append(lhs - rhs)
    return np.array(out)


def log_theta_slacks(traj):
    w = traj.mesh.weights
    out = []
    for s in traj.states:
        lt = np.log(s.theta)
        out.append(np.dot(w, s.theta - lt) - np.dot(w, s.theta + np.abs(lt)) / 3.0)
    return np.array(out)


def check_identities(traj, weak_tol=1e-8):
    """Evaluate every exact identity / inequality on a trajectory."""
    mesh = traj.mesh
    h = traj.h
    results = []

    energy = phase_energy_defects(traj)
    results.append(CheckResult("phase-energy", float(energy.max()), 0.0, float(energy.max()), 1e-12, bool(energy.max() <= 1e-12)))
    convex = convexity_slacks(traj)
    results.append(_inequality("convexity", float(convex.min()), 0.0, 1e-10))
    logt = log_theta_slacks(traj)
    results.append(_inequality("log-theta", float(logt.min()), 0.0, 1e-10))

    th, ph, vv = traj.levels("theta"), traj.levels("phi"), traj.levels("v")
    theta_hat = bochner_norms_levels(traj, th, "L2", "hat")["Linf"]
    theta_bar = bochner_norms_levels(traj, th, "L2", "bar")["Linf"]
    results.append(_equality("hat-theta", theta_hat, max(l2_norm(mesh, th[0]), theta_bar), 1e-10))
    phi_hat = bochner_norms_levels(traj, ph, "Linf", "hat")["Linf"]
    phi_bar = bochner_norms_levels(traj, ph, "Linf", "bar")["Linf"]
    results.append(_equality("hat-phi", phi_hat, max(linf_norm(mesh, ph[0]), phi_bar), 1e-10))
    v_hat = bochner_norms_levels(traj, vv, "Linf", "hat")["Linf"]
    v_bar = bochner_norms_levels(traj, vv, "Linf", "bar")["Linf"]
    results.append(_equality("hat-v", v_hat, max(linf_norm(mesh, vv[0]), v_bar), 1e-10))

    lhs_t, rhs_t = theta_gap_sides(traj)
    results.append(_equality("theta-gap", lhs_t, rhs_t, 1e-8))

    # sup over s in (0, 1] of |(phi_{n+1} - phi_n)(1 - s)| is attained as s -> 0+
    lhs_p = float(np.max(np.abs(ph[1:] - ph[:-1])))
    rhs_p = h * v_bar
    results.append(_equality("phi-gap", lhs_p, rhs_p, 1e-10))

    lhs_v, rhs_v = v_gap_sides(traj)
    results.append(_equality("v-gap", lhs_v, rhs_v, 1e-10))

    lhs_u, rhs_u, err_u = phi_under_defect(traj)
    results.append(CheckResult("phi-under", lhs_u, rhs_u, err_u, 1e-10, err_u <= 1e-10))

    u_max = float(max(np.max(s.u) for s in traj.states))
    th_min = float(min(np.min(s.theta) for s in traj.states))
    results.append(CheckResult("positivity", th_min, 0.0, u_max, 0.0, u_max < 0 and th_min > 0))

    wr, _ = weak_residual(traj)
    results.append(CheckResult("weak", wr, 0.0, wr, weak_tol, wr <= weak_tol))
    return results


def theta_gap_sides(traj):
    """``||theta_bar - theta_hat||^2`` and ``(h^2/3) ||theta_hat_t||^2`` in ``L2(0,T;(H^1)*)``.

    On each step ``theta_bar - theta_hat = (theta_{n+1} - theta_n)(1 - s)``; its
    squared norm is integrated in ``s`` by Gauss quadrature, independently of
    the derivative side.
    """
    op = traj.spec.robin
    h = traj.h
    th = traj.levels("theta")
    d = th[1:] - th[:-1]
    dd = dual_inner(op, d.T, d.T)
    lhs = float(sum(wq * (1.0 - sq) ** 2 for sq, wq in zip(_GL_S, _GL_W)) * h * np.sum(dd))
    deriv = d / h
    rhs = h * h / 3.0 * float(np.sum(h * dual_inner(op, deriv.T, deriv.T)))
    return lhs, rhs


def v_gap_sides(traj):
    w = traj.mesh.weights
    h = traj.h
    vv = traj.levels("v")
    # bar - hat on step n is (v_{n+1} - v_n)(1 - s); integrate |.|^2 with Gauss points
    lhs = 0.0
    for sq, wq in zip(_GL_S, _GL_W):
        diff = (vv[1:] - vv[:-1]) * (1.0 - sq)
        lhs += wq * h * float(np.sum(diff**2 @ w))
    z = traj.levels("z")[1:]
    rhs = h * h / 3.0 * h * float(np.sum(z**2 @ w))
    return lhs, rhs


def phi_under_defect(traj, samples_per_step=3):
    """Relative max defect of ``phi_under = phi_bar - h phi_hat_t`` at interior times.

    Returns ``(max |phi_under|, max |phi_bar - h phi_hat_t|, relative defect)``.
    """
    from .stepper import eval_bar, hat_derivative

    h = traj.h
    lhs = rhs = err = 0.0
    for n in range(traj.N):
        for j in range(1, samples_per_step + 1):
            t = (n + j / (samples_per_step + 1)) * h
            under = eval_bar(traj, "phi_under", t)
            other = eval_bar(traj, "phi", t) - h * hat_derivative(traj, "phi", t)
            err = max(err, float(np.max(np.abs(under - other))))
            lhs = max(lhs, float(np.max(np.abs(under))))
            rhs = max(rhs, float(np.max(np.abs(other))))
    scale = max(lhs, rhs)
    return lhs, rhs, (err / scale if scale > 0 else 0.0)


def norm_equivalence_constants(op, fields):
    """Ratios ``||w||_{H1}^2 / (||grad w||^2 + ||w||^2_{boundary})`` over sample fields."""
    ratios = []
    for w in fields:
        denom = grad_sq(op, w) + boundary_l2_sq(op.mesh, w)
        ratios.append(h1_norm(op, w) ** 2 / denom)
    return np.array(ratios)
