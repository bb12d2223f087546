import csv
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from oracles import scalar_recursion
from penrose_fife import (FieldState, ProblemSpec, SpatialMesh, assemble_robin, bochner_norms,
                          build_kernel, check_identities, export_estimates_csv, gaussian_kernel,
                          homogeneous_problem, linear_beta, monitor, norms, record_suprema, run,
                          weak_residual)
from penrose_fife.diagnostics import (ESTIMATE_COLUMNS, MONITORED, convexity_slacks, h1_norm, l1_norm,
                                      l2_norm, linf_norm, log_theta_slacks, norm_equivalence_constants,
                                      phase_energy_defects)


def test_norms_of_constant_one():
    m = SpatialMesh.uniform(33)
    out = norms(m, np.ones(33))
    assert out["L1"] == pytest.approx(1.0) and out["L2"] == pytest.approx(1.0)
    assert out["Linf"] == 1.0 and out["H1"] == pytest.approx(1.0)


def test_l2_norm_of_identity_converges():
    exact = 1 / np.sqrt(3)
    errs = []
    for n in (33, 65, 129):
        m = SpatialMesh.uniform(n)
        errs.append(abs(l2_norm(m, m.points[:, 0]) - exact))
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_h1_norm_of_sine_converges():
    exact = 0.5 + np.pi**2 / 2
    errs = []
    for n in (33, 65, 129):
        m = SpatialMesh.uniform(n)
        errs.append(abs(h1_norm(assemble_robin(m), np.sin(np.pi * m.points[:, 0])) ** 2 - exact))
    assert errs[-1] < 1e-3
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_scalar_norms_in_two_dimensions():
    m = SpatialMesh.uniform(21, 2.0, dimension=2)
    assert l1_norm(m, np.ones(m.size)) == pytest.approx(4.0)
    assert linf_norm(m, -3 * np.ones(m.size)) == 3.0


def test_norm_equivalence_ratios_are_bounded():
    rng = np.random.default_rng(7)
    lo, hi = np.inf, 0.0
    for n in (17, 65, 257):
        m = SpatialMesh.uniform(n)
        x = m.points[:, 0]
        fields = [rng.normal(size=n), np.ones(n), x, np.cos(5 * x), np.exp(x)]
        r = norm_equivalence_constants(assemble_robin(m), fields)
        lo, hi = min(lo, r.min()), max(hi, r.max())
    assert 0.2 < lo and hi < 5.0


def test_bochner_norms_of_bar_and_hat(short_traj):
    tr = short_traj
    m = tr.mesh
    ph = tr.levels("phi")
    l2 = np.array([l2_norm(m, row) for row in ph])
    bar = bochner_norms(tr, "phi", "L2", "bar")
    assert bar["L2"] == pytest.approx(np.sqrt(tr.h * np.sum(l2[1:] ** 2)), rel=1e-13)
    hat = bochner_norms(tr, "phi", "L2", "hat")
    assert hat["C"] == pytest.approx(l2.max(), rel=1e-13)
    # exact time integral versus a very fine trapezoid rule in time
    s = np.linspace(0, 1, 2001)
    fine = 0.0
    for n in range(tr.N):
        vals = np.array([l2_norm(m, ph[n] + sj * (ph[n + 1] - ph[n])) ** 2 for sj in s])
        fine += tr.h * trapezoid(vals, s)
    assert hat["L2"] == pytest.approx(np.sqrt(fine), rel=1e-7)
    dual = bochner_norms(tr, "theta", "H1*", "bar")
    assert dual["Linf"] <= bochner_norms(tr, "theta", "L2", "bar")["Linf"] * (1 + 1e-12)


def test_monitor_on_homogeneous_scenario_matches_scalar_oracle():
    N, T = 16, 1.0
    u, th, ph, v = scalar_recursion(N, T, 0.5, 1.5, 0.2, -0.3, lambda r: r**3, lambda r: -r)
    tr = run(homogeneous_problem(u[1:], T=T, nodes=9), N)
    rec = monitor(tr)
    vol = tr.mesh.volume
    for m_, r in enumerate(rec):
        assert r.phi_l2_sq == pytest.approx(vol * ph[m_] ** 2, rel=1e-8, abs=1e-12)
        assert r.theta_l1 == pytest.approx(vol * th[m_], rel=1e-8)
        assert r.v_l2_sq == pytest.approx(vol * v[m_] ** 2, rel=1e-8, abs=1e-12)


def test_log_theta_vanishes_for_unit_theta(default_traj):
    assert monitor(default_traj)[0].log_theta_l1 == 0.0


def test_inequalities_hold_every_step(default_traj):
    assert convexity_slacks(default_traj).min() >= -1e-10
    assert log_theta_slacks(default_traj).min() >= -1e-10
    assert phase_energy_defects(default_traj).max() <= 1e-12


def test_all_identities_pass_on_default(default_traj):
    results = check_identities(default_traj)
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed
    assert {r.name for r in results} >= {"phase-energy", "convexity", "log-theta", "theta-gap", "phi-gap",
                                         "v-gap", "phi-under", "positivity", "weak"}


def test_weak_residual_small_for_accepted_trajectory(default_traj):
    wr, per_step = weak_residual(default_traj)
    assert wr <= 1e-8 and len(per_step) == default_traj.N


def test_weak_residual_detects_a_perturbation(short_traj):
    states = list(short_traj.states)
    k = 5
    s = states[k]
    u = s.u.copy()
    u[10] += 1e-3
    states[k] = FieldState(s.n, u, -1.0 / u, s.phi, s.v, s.z)
    bumped = replace(short_traj, states=states)
    assert weak_residual(bumped)[0] > 1e-5
    assert weak_residual(short_traj)[0] <= 1e-8


def test_stationary_state_has_zero_residual():
    mesh = SpatialMesh.uniform(17)
    spec = ProblemSpec(mesh, build_kernel(gaussian_kernel(0.1), mesh), linear_beta(1.0, 0.0), 1.0,
                       lambda p, t: 0.0, lambda p, t: -1.0, 1.0, -1.0, 0.0)
    tr = run(spec, 8)
    for s in tr.states:
        np.testing.assert_allclose(s.phi, -1.0, atol=1e-13)
        np.testing.assert_allclose(s.u, -1.0, atol=1e-13)
        assert np.max(np.abs(s.v)) < 1e-11
    assert weak_residual(tr)[0] < 1e-11


def test_estimates_csv_and_suprema(short_traj, tmp_path):
    records = monitor(short_traj)
    sup = record_suprema(records)
    assert set(sup) == set(MONITORED)
    path = tmp_path / "est.csv"
    export_estimates_csv(records, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ESTIMATE_COLUMNS
    assert len(rows) == short_traj.N + 2
    assert float(rows[-1][ESTIMATE_COLUMNS.index("phi_linf")]) == records[-1].phi_linf
    # running quantities never decrease
    for key in ("h_sum_u_h1_sq", "theta_hat_t_dual", "beta_phi_linf", "z_l2l2"):
        col = [getattr(r, key) for r in records]
        assert np.all(np.diff(col) >= 0)
