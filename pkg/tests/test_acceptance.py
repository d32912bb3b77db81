"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Lines are also collected in ``RESULTS`` and repeated in the terminal summary.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import one_gaussian
from tfwdefect.cli import main
from tfwdefect.config import load_config
from tfwdefect.coulomb import coulomb_form_DR
from tfwdefect.crystal import defect_diagnostics, jellium_state, local_l2, run_thermo_scan, solve_perfect
from tfwdefect.field import restrict_to_cell
from tfwdefect.functional import TfwParams
from tfwdefect.jellium import JelliumParams, jellium_solve, linear_ladder, linear_screening_check
from tfwdefect.lattice import Lattice
from tfwdefect.minimize import SolverConfig, minimize_constrained, minimize_defect_constrained, minimize_defect_free, uniqueness_probe
from tfwdefect.nuclear import Gaussian, GaussianSum, NuclearModel, coulomb_form_free
from tfwdefect.validation import convexity_violations, gradient_errors_defect, gradient_errors_tfw

P = TfwParams()
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS = []

DIPOLE = GaussianSum((Gaussian(0.5, (0.5, 0.0, 0.0), 0.5), Gaussian(-0.5, (-0.5, 0.0, 0.0), 0.5)))
CHARGE = one_gaussian(1.0, 0.5)
HOST = one_gaussian(4.0, 0.6)
L_LIST = [1, 2, 3, 4]
Q_LIST = [-0.5, 0.0, 0.5]


def report(number, name, passed, detail):
    line = f"criterion {number:>2} {name:<28} {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


def strictly_decreasing(x):
    return bool(np.all(np.diff(x) < 0))


@pytest.fixture(scope="module")
def host_state():
    return solve_perfect(NuclearModel(HOST, DIPOLE), Lattice(4.0, 1, 12), P)


@pytest.fixture(scope="module")
def dipole_scan(host_state):
    return run_thermo_scan(NuclearModel(HOST, DIPOLE), Q_LIST, L_LIST, host_state.lat, P,
                           state1=host_state, include_free=False, threads=4)


def test_c01_gradient_consistency():
    rng = np.random.default_rng(101)
    lat = Lattice(4.0, 1, 16)
    model = NuclearModel(HOST, CHARGE)
    state = solve_perfect(model, lat, P)
    e_tfw = gradient_errors_tfw(state.rho_nuc, P, rng, count=10)
    e_def = gradient_errors_defect(state, model.defect_density(lat), P, rng, count=10)
    worst = max(e_tfw.max(), e_def.max())
    report(1, "gradient_consistency", worst <= 1e-6, f"max rel err tfw={e_tfw.max():.2e} defect={e_def.max():.2e} (tol 1e-6)")


def test_c02_perfect_crystal():
    model = NuclearModel(one_gaussian(1.0, 0.6), GaussianSum())
    neutral, umin, eps = [], [], []
    for n in (16, 32):
        st = solve_perfect(model, Lattice(4.0, 1, n), P)
        neutral.append(abs((st.rho_nuc - st.rho0).integral()))
        umin.append(st.m_bound)
        eps.append(st.eps_f)
    drift = abs(eps[0] - eps[1]) / abs(eps[1])
    ok = max(neutral) <= 1e-9 * model.Z and min(umin) > 0 and drift <= 1e-3
    report(2, "perfect_crystal", ok,
           f"neutrality={max(neutral):.1e} min u0={min(umin):.3f} eps_F drift={drift:.1e} (tol 1e-3)")


def test_c03_uniqueness(host_state):
    lat1 = host_state.lat
    rho = host_state.rho_nuc
    spread_p, res_p = uniqueness_probe(lambda s: minimize_constrained(rho, host_state.Z, P, w0=s), 4, lat1, 0.3, seed=11)
    sign_p = min(r.v.inner(host_state.u0) for r in res_p)

    st2 = host_state.on_supercell(2)
    nu = NuclearModel(HOST, CHARGE).defect_density(st2.lat)
    u0 = st2.u0.values
    solve = lambda s: minimize_defect_constrained(st2, nu, 0.5, P, v0=None if s is None else s - u0)  # noqa: E731
    spread_d, res_d = uniqueness_probe(solve, 4, st2.lat, float(u0.mean()), seed=12,
                                       density=lambda r: (u0 + r.v.values) ** 2)
    sign_d = min(float(np.vdot(u0 + r.v.values, u0)) for r in res_d)
    ok = max(spread_p, spread_d) <= 1e-6 and sign_p >= 0 and sign_d >= 0
    report(3, "uniqueness_up_to_sign", ok, f"density spread periodic={spread_p:.1e} defect={spread_d:.1e} (tol 1e-6)")


def test_c04_multiplier_decay(dipole_scan):
    ok, parts = True, []
    for q in Q_LIST:
        mu = np.abs([r.multiplier for r in dipole_scan.select(q)])
        ok = ok and strictly_decreasing(mu) and mu[-1] <= 0.5 * mu[0]
        parts.append(f"q={q:+.1f}: " + ">".join(f"{m:.1e}" for m in mu))
    report(4, "multiplier_decay", ok and dipole_scan.all_converged, "; ".join(parts))


def test_c05_q_independence(dipole_scan, host_state):
    radius = host_state.lat.a / 2
    ok, parts = True, []
    for q in (-0.5, 0.5):
        d = np.array([local_l2(dipole_scan.solutions[(q, L)].v, dipole_scan.solutions[(0.0, L)].v, radius) for L in L_LIST])
        ok = ok and strictly_decreasing(d) and d[-1] <= 0.3 * d[0]
        parts.append(f"q={q:+.1f}: " + ">".join(f"{x:.1e}" for x in d))
    report(5, "q_independence", ok, "; ".join(parts))


def test_c06_screening(host_state):
    model = NuclearModel(HOST, CHARGE)
    scan = run_thermo_scan(model, [], L_LIST, host_state.lat, P, state1=host_state, threads=4)
    s = np.abs([r.screening_integral for r in scan.select("free")])
    st4 = host_state.on_supercell(4)
    diag = defect_diagnostics(st4, model.defect_density(st4.lat), scan.solutions[("free", 4)].v)
    ok = scan.all_converged and strictly_decreasing(s) and s[-1] <= 0.5 * s[0] and diag.trend_decreasing
    report(6, "screening", ok, "|s_L| " + ">".join(f"{x:.3f}" for x in s)
           + "; smallk " + ",".join(f"{x:.4f}" for x in diag.smallk))


def test_c07_coulomb_supercell_limit():
    nu = one_gaussian(1.0, 0.5)
    exact = coulomb_form_free(nu)
    errs = []
    for L in L_LIST:
        f = restrict_to_cell(nu, Lattice(10.0, L, 40))
        errs.append(abs(coulomb_form_DR(f, f) - exact) / exact)
    ok = errs[-1] <= 0.05 and strictly_decreasing(errs)
    report(7, "coulomb_supercell_limit", ok, "rel err " + ">".join(f"{e:.3f}" for e in errs) + " (tol 0.05 at L=4)")


JP = JelliumParams(1.0, P)
JCFG = SolverConfig(grad_tol=1e-11)


def test_c08_linear_response():
    lad = linear_ladder(one_gaussian(1.0, 1.0), [1e-1, 1e-2, 1e-3], JP, Lattice(16.0, 1, 32), JCFG)
    ok = lad.converged and abs(lad.slope - 2.0) <= 0.2
    report(8, "linear_response_ladder", ok, f"slope={lad.slope:.3f} (2.0 +- 0.2)")


def test_c09_perfect_screening():
    nu = one_gaussian(1.0, 1.0)
    s = []
    for box, n in ((16.0, 32), (32.0, 64)):
        sol = jellium_solve(nu, JP, Lattice(box, 1, n), JCFG)
        assert sol.converged
        s.append(sol.screening_integral)
    quad = linear_screening_check(JP)
    ok = abs(s[0]) <= 1e-6 and abs(s[0] - s[1]) <= 1e-6 and quad <= 1e-8
    report(9, "perfect_screening", ok, f"|s|={abs(s[0]):.1e} doubling change={abs(s[0] - s[1]):.1e} |2a int g - 1|={quad:.1e}")


def test_c10_cross_path():
    lat = Lattice(16.0, 1, 32)
    nu = restrict_to_cell(one_gaussian(1.0, 1.0), lat)
    cfg = SolverConfig(grad_tol=1e-10)
    fp = jellium_solve(nu, JP, lat, cfg, coulomb="periodic")
    sc = minimize_defect_free(jellium_state(JP.alpha, lat, P), nu, P, cfg)
    rel = (fp.v - sc.v).l2norm() / sc.v.l2norm()
    report(10, "cross_path_equivalence", fp.converged and sc.converged and rel <= 1e-6, f"rel L2 diff={rel:.1e} (tol 1e-6)")


def test_c11_convexity_sampling():
    rng = np.random.default_rng(2024)
    ok, parts = True, []
    for gamma in (2.0, 10.0 / 3.0):
        low, up, C = convexity_violations(0.2, 5.0, gamma, 100_000, rng)
        ok = ok and low == 0 and up == 0
        parts.append(f"gamma={gamma:.3g}: lower={low} upper={up} (C={C:.3g})")
    report(11, "convexity_sampling", ok, "; ".join(parts))


def test_c12_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("TFW_OUTPUT_DIR", raising=False)
    cfg = load_config(CONFIGS / "dipole_scan.toml")
    text = (CONFIGS / "dipole_scan.toml").read_text()
    digests = []
    for i, threads in enumerate(("1", "4")):
        out = tmp_path / f"run{i}"
        path = tmp_path / f"c{i}.toml"
        path.write_text(text.replace(f'output_dir = "{cfg.output_dir}"', f'output_dir = "{out}"')
                        .replace("L_list = [1, 2, 3, 4]", "L_list = [1, 2]"))
        assert main(["thermo-scan", "--config", str(path), "--seed", "5", "--threads", threads]) == 0
        digests.append(json.loads((out / "manifest.json").read_text())["outputs"])
    same = digests[0] == digests[1] and len(digests[0]) > 1
    report(12, "determinism", same, f"{len(digests[0])} output files byte-identical across runs")
