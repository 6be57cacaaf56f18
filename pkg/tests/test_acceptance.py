"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest -v tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
Tolerances and runtime budgets below are the pinned acceptance values.
"""
import dataclasses
import os
import sys
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from hamci import antidiv, blocks, cli, geometry, io, profiles, scheme, trajectories
from hamci.errors import ExponentHypothesisViolated, HamciError
from hamci.field import GridSpec, PeriodicScalarField, apply_J, gradient, lp_norm

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def _say(line):
    print(line, flush=True)


def verdict(crit, name, checks, elapsed, budget):
    """Print sub-checks and the criterion line; fail the test if any check failed."""
    ok = True
    for label, good, detail in checks:
        _say(f"    {'ok  ' if good else 'MISS'} {label}: {detail}")
        ok &= bool(good)
    in_time = elapsed < budget
    _say(f"    {'ok  ' if in_time else 'MISS'} runtime: {elapsed:.2f} s (budget {budget:g} s)")
    ok &= in_time
    _say(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {name}")
    assert ok, f"criterion {crit} failed"


# ---------------------------------------------------------------- 1

def test_criterion_1_geometric_lemma():
    t0 = time.perf_counter()
    ds = geometry.build_direction_set(4, 0.125)
    R = np.random.default_rng(0).normal(size=(10_000, 4))
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    coef = geometry.coefficient_array(R.T, ds)
    rec = sum(c[:, None] * ds.as_array()[i] for i, c in enumerate(coef))
    err = float(np.abs(rec - R).max())
    cmin = float(min(c.min() for c in coef))
    fc = geometry.frame_checks(ds)
    exact = all(isinstance(c, (int, Fraction)) for fr in ds.frames for v in fr for c in v)
    elapsed = time.perf_counter() - t0
    verdict(1, "geometric lemma suite", [
        ("reconstruction error <= 1e-12", err <= 1e-12, f"{err:.2e}"),
        ("coefficients >= 0", cmin >= 0, f"min {cmin:.3e}"),
        ("frames orthonormal, rational arithmetic", exact and all(f["orthonormal"] for f in fc), "exact"),
        ("J xi_perp = xi, rational arithmetic", all(f["J_ok"] for f in fc), "exact"),
    ], elapsed, 1.0)


# ---------------------------------------------------------------- 2

def test_criterion_2_building_blocks():
    t0 = time.perf_counter()
    ds = geometry.build_direction_set(4, 0.125)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bf = blocks.build_block_family(ds, 4.0, 1.0, 2.0, GridSpec(4, 64))
    rep = blocks.verify_block_lemma(bf)
    per = rep["per_xi"]
    worst = {k: max(e[k] for e in per) for k in ("div_X", "div_XTheta", "mean_X", "avg_XTheta_err")}
    ov = max(max(v for v in pair if v is not None) for pair in rep["overlaps"].values())
    elapsed = time.perf_counter() - t0
    verdict(2, "building-block identity suite", [
        ("div X rel <= 1e-10", worst["div_X"] <= 1e-10, f"{worst['div_X']:.2e}"),
        ("div(X Theta) rel <= 1e-6", worst["div_XTheta"] <= 1e-6, f"{worst['div_XTheta']:.2e}"),
        ("|mean X| <= 1e-12", worst["mean_X"] <= 1e-12, f"{worst['mean_X']:.2e}"),
        ("mean(X Theta) - sigma xi rel <= 1e-6", worst["avg_XTheta_err"] <= 1e-6,
         f"{worst['avg_XTheta_err']:.2e}"),
        ("cross-support overlaps exactly 0", ov == 0.0, f"{ov:.1e}"),
    ], elapsed, 120.0)


# ---------------------------------------------------------------- 3

def test_criterion_3_scaling_laws():
    t0 = time.perf_counter()
    ds = geometry.build_direction_set(4, 0.125)
    p = 2.0
    checks = []
    for k, s in ((0, 1.0), (0, p), (0, blocks.dual(p)), (1, p)):
        res = blocks.measure_scaling(ds, 1.0, p, s, k, [4, 8, 16], n=512)
        for kind, v in res.items():
            checks.append((f"{kind} k={k} s={s:g} slope within 0.1", abs(v["slope"] - v["predicted"]) <= 0.1,
                           f"{v['slope']:.4f} vs {v['predicted']:.4f}"))
    elapsed = time.perf_counter() - t0
    verdict(3, "scaling-law suite", checks, elapsed, 120.0)


# ---------------------------------------------------------------- 4

def test_criterion_4_antidivergence():
    t0 = time.perf_counter()
    grid = GridSpec(2, 256)
    rng = np.random.default_rng(0)
    lams = (4, 8, 16, 32)
    worst, slack_ok, l26_ok, slopes = 0.0, True, True, []
    for _ in range(3):
        f = PeriodicScalarField(grid, 1.0 + cli._random_smooth(grid, rng))
        gv = cli._random_smooth(grid, rng, modes=2)
        g = PeriodicScalarField(grid, gv - gv.mean())
        norms = []
        for lam in lams:
            res = antidiv.improved_antidivergence(f, g, lam)
            worst = max(worst, res.residual)
            norms.append(float(np.mean(res.field.magnitude())))
            gap = antidiv.improved_holder_gap(f, g, lam, 2.0)
            slack_ok &= gap["slack"] >= 0
            l26_ok &= gap["l26_slack"] >= 0
        slopes.append(float(np.polyfit(np.log(lams), np.log(norms), 1)[0]))
    elapsed = time.perf_counter() - t0
    verdict(4, "anti-divergence suite", [
        ("divergence identity residual <= 1e-8", worst <= 1e-8, f"{worst:.2e}"),
        ("lambda slope -1 +- 0.15", all(abs(s + 1) <= 0.15 for s in slopes), " ".join(f"{s:.3f}" for s in slopes)),
        ("improved Holder slack >= 0", slack_ok, ""),
        ("mean-interaction bound holds", l26_ok, ""),
    ], elapsed, 30.0)


# ---------------------------------------------------------------- 5

def test_criterion_5_partition_and_profiles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    tau = rng.uniform(-100, 100, 10_000)
    ks = np.floor(tau)[:, None] + np.arange(-2, 3)[None]
    part = float(np.abs(profiles.eval_chi(tau[:, None] - ks).sum(1) - 1).max())
    rho = 0.125
    m = 128
    # box [-rho, rho]^3 at spacing 1/512, the support of phi in the transverse space
    y = (np.arange(m) + 0.5) / m * 2 * rho - rho
    h = 2 * rho / m
    Y = np.meshgrid(y, y, y, indexing="ij")
    r = np.sqrt(sum(c * c for c in Y))
    phi_int = float(profiles.phi_radial(r, rho, 3).sum() * h ** 3)
    # psi on its support box [-2 rho, 2 rho]^3
    z = (np.arange(2 * m) + 0.5) / (2 * m) * 4 * rho - 2 * rho
    Z = np.stack(np.meshgrid(z, z, z, indexing="ij"), -1)
    psi_int = float(profiles.eval_psi(Z, rho).sum() * (4 * rho / (2 * m)) ** 3)
    inner = rng.uniform(-1, 1, (5000, 3))
    inner *= (0.95 * rho * rng.random((5000, 1)) ** (1 / 3)) / np.linalg.norm(inner, axis=1, keepdims=True)
    parts = profiles.psi_parts([inner[:, 0], inner[:, 1], inner[:, 2]], rho, order=1)
    slope_err = max(float(np.abs(parts["grad"][0] - 1).max()),
                    float(max(np.abs(gk).max() for gk in parts["grad"][1:])))
    hs = 1e-6
    e1 = np.array([hs, 0, 0])
    fd = (profiles.eval_psi(inner + e1, rho) - profiles.eval_psi(inner - e1, rho)) / (2 * hs)
    fd_err = float(np.abs(fd - 1).max())
    elapsed = time.perf_counter() - t0
    verdict(5, "partition/profile suite", [
        ("|sum chi - 1| <= 1e-12", part <= 1e-12, f"{part:.2e}"),
        ("int phi = 1 +- 1e-8", abs(phi_int - 1) <= 1e-8, f"{phi_int - 1:.2e}"),
        ("int psi = 0 +- 1e-12", abs(psi_int) <= 1e-12, f"{psi_int:.2e}"),
        ("psi slope (analytic gradient) to 1e-8", slope_err <= 1e-8, f"{slope_err:.2e}"),
        ("psi slope (finite difference) to 1e-8", fd_err <= 1e-8, f"{fd_err:.2e}"),
    ], elapsed, 10.0)


# ---------------------------------------------------------------- 6

def _structural(diag, state, tol=1e-10):
    g = state.grid
    d = g.d
    JgH = apply_J(gradient(state.H)).components
    vel = max(float(np.abs(np.broadcast_to(a, g.shape) - np.broadcast_to(b, g.shape)).max())
              for a, b in zip(state.u.components, JgH))
    scale = max(float(np.abs(np.broadcast_to(a, g.shape)).max()) for a in state.u.components)
    vel_rel = vel / scale if scale > 0 else vel
    w, rw = diag["cutoff_window"], diag["R_window"]
    return [
        ("residual identity rel <= 1e-6", diag["residual"] <= 1e-6, f"{diag['residual']:.2e}"),
        ("mass conservation <= 1e-10", diag["mass_err"] <= 1e-10, f"{diag['mass_err']:.2e}"),
        ("theta_p >= 0", diag["theta_p_min"] >= 0, f"min {diag['theta_p_min']:.2e}"),
        ("mean of theta_p + theta_c <= 1e-12", diag["mean_zero"] <= 1e-12, f"{diag['mean_zero']:.2e}"),
        ("window: rho_1 = 1 on [0, t0 - ell]", (not np.isnan(w)) and w <= tol,
         "empty window" if np.isnan(w) else f"{w:.2e}"),
        ("window: R_1 = 0 on [0, t0 - ell]", (not np.isnan(rw)) and rw <= tol,
         "empty window" if np.isnan(rw) else f"{rw:.2e}"),
        ("u_1 = J grad H_1 <= 1e-10 (direct)", vel_rel <= 1e-10, f"{vel_rel:.2e}"),
        ("u_1 = J grad H_1 <= 1e-10 (stage diagnostics)", diag["u_vs_JgradH"] <= 1e-10,
         f"{diag['u_vs_JgradH']:.2e}"),
    ]


def test_criterion_6_iteration_structure_pinned_config():
    t0 = time.perf_counter()
    cfg = io.load_config(os.path.join(CONFIGS, "literal.cfg"))
    try:
        states = cli.run_iteration(cfg, 1)
        checks = _structural(states[-1].diagnostics[-1], states[-1])
    except HamciError as e:
        checks = [("stage 0 -> 1 runs on the pinned grid", False, f"{type(e).__name__}: {e}")]
        # same schedule with the slowest admissible starting oscillation
        try:
            states = cli.run_iteration(dataclasses.replace(cfg, lambda0=1), 1)
            checks += _structural(states[-1].diagnostics[-1], states[-1])
        except HamciError as e2:
            checks.append(("stage 0 -> 1 runs with lambda0 = 1", False, f"{type(e2).__name__}: {e2}"))
    verdict(6, "iteration structural suite (d=4, n=32, n_t=16, a=2, b=2, gamma=1, alpha=2)",
            checks, time.perf_counter() - t0, 600.0)


def test_criterion_6_iteration_structure_resolved_config():
    """Same assertions on a configuration the 32^4 grid can represent."""
    t0 = time.perf_counter()
    cfg = io.load_config(os.path.join(CONFIGS, "structural.cfg"))
    states = cli.run_iteration(cfg, 1)
    checks = _structural(states[-1].diagnostics[-1], states[-1])
    verdict("6 (resolved config)", "iteration structural suite on configs/structural.cfg",
            checks, time.perf_counter() - t0, 600.0)


# ---------------------------------------------------------------- 7

def test_criterion_7_error_decrease():
    t0 = time.perf_counter()
    cfg = io.load_config(os.path.join(CONFIGS, "demo.cfg"))
    states = cli.run_iteration(cfg, 1)
    r0 = lp_norm(states[0].R, 1)
    r1 = lp_norm(states[1].R, 1)
    diag = states[1].diagnostics[-1]
    verdict(7, "error decrease on configs/demo.cfg", [
        ("||R_1||_L1 <= ||R_0||_L1 / 2", r1 <= r0 / 2, f"{r1:.4g} vs {r0:.4g} (ratio {r1 / r0:.3f})"),
        ("diagnostics agree", diag["L1_R"] == pytest.approx(r1) and diag["L1_R_prev"] == pytest.approx(r0),
         f"{diag['L1_R']:.4g}, {diag['L1_R_prev']:.4g}"),
        ("new error solves its equation (rel residual <= 1e-6)", diag["residual"] <= 1e-6,
         f"{diag['residual']:.2e}"),
    ], time.perf_counter() - t0, 600.0)


# ---------------------------------------------------------------- 8

def test_criterion_8_schedule_arithmetic():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        s = scheme.make_schedule(2, 1, 4, 2)
        elapsed = time.perf_counter() - t0
        try:
            scheme.make_schedule(2, 3, 4, 2)
            rejected = False
        except ExponentHypothesisViolated:
            rejected = True
    verdict(8, "schedule arithmetic", [
        ("gamma = 3", s.gamma == 3 and isinstance(s.gamma, Fraction), str(s.gamma)),
        ("alpha = 19", s.alpha == 19 and isinstance(s.alpha, Fraction), str(s.alpha)),
        ("b = 724", s.b == 724 and isinstance(s.b, Fraction), str(s.b)),
        ("beta = 1/(2*724*725)", s.beta == Fraction(1, 2 * 724 * 725), str(s.beta)),
        ("(p, r, d) = (2, 3, 4) rejected", rejected, ""),
    ], elapsed, 1e-3)


# ---------------------------------------------------------------- 9

def test_criterion_9_trajectories():
    t0 = time.perf_counter()
    checks = []
    # RK4 order on a smooth stage-1 Hamiltonian
    cfg = io.load_config(os.path.join(CONFIGS, "trajectory.cfg"))
    H = cli.run_iteration(cfg, 1)[-1].H
    hm = trajectories.max_step(H)
    starts = np.random.default_rng(cfg.seed).random((8, 4))
    f = trajectories.TrigInterpolant(np.broadcast_to(H.values, H.grid.shape), 4)
    drifts = [trajectories.hamiltonian_drift(trajectories.integrate_curves(H, starts, h, 16 * hm, interp=f))
              for h in (hm, hm / 2, hm / 4)]
    ratios = [drifts[0] / drifts[1], drifts[1] / drifts[2]]
    checks.append(("RK4 drift ratio 16 +- 50% under halving", all(8 <= r <= 24 for r in ratios),
                   f"drifts {' '.join(f'{x:.2e}' for x in drifts)}, ratios {' '.join(f'{r:.2f}' for r in ratios)}"))
    # pushforward of a density by a cellular Hamiltonian flow
    g = GridSpec(2, 64)
    x, y = g.coords()
    Hc = PeriodicScalarField(g, np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y) / (2 * np.pi))
    rho0 = PeriodicScalarField(g, (1 + 0.5 * np.cos(2 * np.pi * x)) * np.ones((1, 64)))
    ref = trajectories.solve_transport(rho0, Hc, 0.5, 400)
    rep = trajectories.pushforward_check(rho0, Hc, 100_000, 0.5, seed=0, rho_t=PeriodicScalarField(g, ref[-1]))
    checks.append(("pushforward TV <= 0.05 at 1e5 particles", rep.tv_max <= 0.05, f"{rep.tv_max:.4f}"))
    # energy gap of the starting triple
    hcfg = io.load_config(os.path.join(CONFIGS, "hamil.cfg"))
    st = scheme.initial_triple_hamil(hcfg.schedule(), hcfg.grid, Delta=hcfg.Delta, lam=hcfg.lambda0)
    row = trajectories.hamiltonian_decay_report([st])[0]
    checks.append(("int H0 rho0(0) - int H0 rho0(1) = 1 - Delta +- 1e-6", abs(row["gap_minus_1_plus_Delta"]) <= 1e-6,
                   f"gap {row['gap']:.12f}, Delta {hcfg.Delta}"))
    checks.append(("1 > 2/lambda0 + 8 Delta at lambda0 = 40", row["threshold_ok"] and hcfg.lambda0 == 40,
                   f"{row['threshold']:.3f}"))
    checks.append(("measured gap exceeds 2/lambda0 + 8 Delta", row["gap_ok"],
                   f"{row['gap']:.5f} > {row['threshold']:.3f}"))
    verdict(9, "trajectory suite", checks, time.perf_counter() - t0, 300.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
