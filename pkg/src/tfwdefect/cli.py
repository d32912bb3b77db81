"""Command-line driver: ``tfw <mode> --config FILE [--threads N] [--seed S]``.

Exit codes: 0 when every solve converged and every built-in check passed,
1 on solver failure or a failed check, 2 on a configuration error. A
``manifest.json`` is written to the output directory in every case. The
environment variable ``TFW_OUTPUT_DIR`` overrides ``output_dir``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from . import field as fieldmod
from .config import ConfigError, ExperimentConfig, config_to_dict, emit_config, load_config
from .crystal import defect_diagnostics, perfect_euler_residual, run_thermo_scan, solve_perfect
from .field import GridFunction, dump_raw
from .jellium import (
    FixedPointDivergence,
    JelliumParams,
    jellium_solve,
    kernel_realspace,
    linear_ladder,
    linear_screening_check,
)
from .lattice import Lattice
from .minimize import NonConvergence, minimize_defect_constrained, minimize_defect_free
from .nuclear import Gaussian, GaussianSum, NuclearModel
from .validation import Check, run_invariant_suite

log = logging.getLogger("tfwdefect")

OUTPUT_ENV = "TFW_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunRecord:
    """Everything the manifest reports besides the config echo."""

    out: Path
    checks: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def write(self, name: str, text: str) -> None:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.outputs[name] = _sha256(path)

    def dump(self, name: str, v: GridFunction) -> None:
        path = self.out / name
        dump_raw(v, path)
        self.outputs[name] = _sha256(path)

    def check(self, name: str, passed: bool, value: float, threshold: float) -> None:
        self.checks.append(Check(name, bool(passed), float(value), float(threshold)))
        if not passed:
            self.failures.append({"kind": "check", "name": name, "value": float(value), "threshold": float(threshold)})

    def fail(self, kind: str, message: str, **extra) -> None:
        self.failures.append({"kind": kind, "message": message, **extra})


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _g(x) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# modes


def _run_perfect(cfg: ExperimentConfig, rec: RunRecord, threads: int) -> None:
    lat = Lattice(cfg.lattice.a, 1, cfg.lattice.n_per_cell)
    state = solve_perfect(cfg.model, lat, cfg.tfw, cfg.solver)
    neutral = abs((state.rho_nuc - state.rho0).integral())
    resid = perfect_euler_residual(state, cfg.tfw)
    rec.write(
        "perfect.csv",
        "eps_f,m_bound,M_bound,neutrality,euler_residual\n"
        + ",".join(_g(x) for x in (state.eps_f, state.m_bound, state.M_bound, neutral, resid)) + "\n",
    )
    rec.dump("u0.raw", state.u0)
    rec.results.update(eps_f=state.eps_f, m_bound=state.m_bound, M_bound=state.M_bound)
    rec.check("neutrality", neutral <= 1e-9 * state.Z, neutral, 1e-9 * state.Z)
    rec.check("u0_positive", state.m_bound > 0, state.m_bound, 0.0)


def _run_defect(cfg: ExperimentConfig, rec: RunRecord, threads: int) -> None:
    lat1 = Lattice(cfg.lattice.a, 1, cfg.lattice.n_per_cell)
    state = solve_perfect(cfg.model, lat1, cfg.tfw, cfg.solver).on_supercell(cfg.defect.L)
    nu = cfg.model.defect_density(state.lat)
    q = cfg.defect.q
    if q == "free":
        res = minimize_defect_free(state, nu, cfg.tfw, cfg.solver)
    else:
        res = minimize_defect_constrained(state, nu, q, cfg.tfw, cfg.solver)
    diag = defect_diagnostics(state, nu, res.v)
    q_s = q if isinstance(q, str) else _g(q)
    rec.write(
        "defect.csv",
        "L,q,energy,multiplier,screening_integral,residual,iters,converged\n"
        f"{cfg.defect.L},{q_s},{_g(res.energy)},{_g(res.multiplier)},{_g(diag.screening_integral)},"
        f"{_g(res.residual)},{res.iters},{int(res.converged)}\n",
    )
    rec.write("smallk.csv", "r,smallk_avg\n" + "".join(f"{_g(r)},{_g(s)}\n" for r, s in zip(diag.radii, diag.smallk)))
    rec.write("trace.csv", res.trace_csv())
    rec.dump("v.raw", res.v)
    rec.results.update(energy=res.energy, multiplier=res.multiplier, screening_integral=diag.screening_integral,
                       smallk_trend_decreasing=diag.trend_decreasing, positivity_flag=res.positivity_flag)
    if not res.converged:
        rec.fail("solver", f"defect solve did not converge (residual {res.residual:.3e})")
    if q != "free":
        err = abs(diag.screening_integral - (nu.integral() - q))
        rec.check("charge_bookkeeping", err <= 1e-9, err, 1e-9)


def _q_tag(q) -> str:
    return "free" if q == "free" else _g(q).replace("-", "m").replace(".", "p")


def _run_scan(cfg: ExperimentConfig, rec: RunRecord, threads: int) -> None:
    lat1 = Lattice(cfg.lattice.a, 1, cfg.lattice.n_per_cell)
    sc = cfg.scan
    report = run_thermo_scan(cfg.model, sc.q_list, sc.L_list, lat1, cfg.tfw, cfg.solver,
                             include_free=sc.include_free, threads=threads)
    rec.write("report.csv", report.to_csv())
    for (q, L), res in sorted(report.solutions.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        tag = f"q{_q_tag(q)}_L{L}"
        rec.write(f"trace_{tag}.csv", res.trace_csv())
        rec.dump(f"v_{tag}.raw", res.v)
    for row in report.rows:
        if not row.converged:
            rec.fail("solver", f"scan cell q={row.q} L={row.L} did not converge", error=row.error)
    # bookkeeping identity s_L = int nu_L - q on every converged constrained cell
    worst = 0.0
    for row in report.rows:
        if row.converged and row.q != "free":
            nu_L = cfg.model.defect_density(lat1.supercell(row.L)).integral()
            worst = max(worst, abs(row.screening_integral - (nu_L - row.q)))
    rec.check("charge_bookkeeping", worst <= 1e-9, worst, 1e-9)
    rec.results["rows"] = len(report.rows)


def _run_jellium(cfg: ExperimentConfig, rec: RunRecord, threads: int) -> None:
    jc = cfg.jellium
    jp = JelliumParams(jc.alpha, cfg.tfw)
    box = Lattice(jc.box, 1, jc.n)
    nu = cfg.model.defect

    radii = np.array(jc.radii)
    g = kernel_realspace("g", jp, radii)
    h = kernel_realspace("h", jp, radii)
    rec.write("profile.csv", "r,g,h\n" + "".join(f"{_g(r)},{_g(a)},{_g(b)}\n" for r, a, b in zip(radii, g.values, h.values)))
    if not (g.converged and h.converged):
        rec.fail("quadrature", "radial quadrature flagged non-convergence")

    screen = linear_screening_check(jp)
    rec.check("linear_screening_quadrature", screen <= 1e-8, screen, 1e-8)

    sol = jellium_solve(nu, jp, box, cfg.solver, jc.coulomb, jc.damping)
    rec.dump("v.raw", sol.v)
    s = abs(sol.screening_integral)
    rec.results["screening_integral"] = sol.screening_integral
    if not sol.converged:
        rec.fail("solver", f"jellium fixed point did not converge (residual {sol.residual:.3e})")
    if jc.coulomb == "free":
        rec.check("perfect_screening", s <= 1e-6, s, 1e-6)

    lad = linear_ladder(nu, jc.epsilons, jp, box, cfg.solver, jc.coulomb, jc.damping)
    if not lad.converged:
        rec.fail("solver", "jellium fixed point did not converge on the epsilon ladder")
    rec.write("ladder.csv", "epsilon,linear_residual\n" + "".join(f"{_g(e)},{_g(r)}\n" for e, r in zip(lad.epsilons, lad.residuals)))
    rec.results["ladder_slope"] = lad.slope
    if lad.slope is not None:
        rec.check("ladder_slope", abs(lad.slope - 2.0) <= 0.2, lad.slope, 2.0)


def _validation_state(cfg: ExperimentConfig):
    lc = cfg.lattice
    a = lc.a if lc is not None else 4.0
    model = cfg.model if cfg.model.Z > 0 else NuclearModel(
        GaussianSum((Gaussian(1.0, (0.0, 0.0, 0.0), 0.6),)), GaussianSum((Gaussian(1.0, (0.0, 0.0, 0.0), 0.5),))
    )
    lat = Lattice(a, 1, cfg.validate.n)
    state = solve_perfect(model, lat, cfg.tfw, cfg.solver)
    return state, model.defect_density(lat)


def _run_validate(cfg: ExperimentConfig, rec: RunRecord, threads: int) -> None:
    state, nu = _validation_state(cfg)
    checks = run_invariant_suite(state, nu, cfg.tfw, cfg.solver.seed, cfg.validate.samples)
    lines = ["check,passed,value,threshold"]
    for c in checks:
        rec.check(c.name, c.passed, c.value, c.threshold)
        lines.append(f"{c.name},{int(c.passed)},{_g(c.value)},{_g(c.threshold)}")
        print(c.row())
    rec.write("validate.csv", "\n".join(lines) + "\n")


RUNNERS = {
    "perfect": _run_perfect,
    "defect": _run_defect,
    "thermo-scan": _run_scan,
    "jellium": _run_jellium,
    "validate": _run_validate,
}


# ---------------------------------------------------------------------------


def _versions() -> dict:
    return {"tfwdefect": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _write_manifest(out: Path, payload: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def run(cfg: ExperimentConfig, threads: int = 1) -> tuple[int, dict]:
    """Execute ``cfg``; returns (exit code, manifest dict). The manifest is written before returning."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = RunRecord(out)
    fieldmod.FFT_WORKERS = max(1, int(threads))
    np.random.seed(cfg.solver.seed)  # nothing should draw from the global stream; pinned anyway
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.mode](cfg, rec, threads)
    except (NonConvergence, FixedPointDivergence, RuntimeError, FloatingPointError) as exc:
        rec.fail("solver", f"{type(exc).__name__}: {exc}")
    finally:
        fieldmod.FFT_WORKERS = 1
    wall = time.perf_counter() - t0
    code = EXIT_OK if not rec.failures else EXIT_FAIL
    manifest = {
        "mode": cfg.mode,
        "status": "pass" if code == EXIT_OK else "fail",
        "exit_code": code,
        "config": config_to_dict(cfg),
        "config_canonical": emit_config(cfg),
        "threads": threads,
        "versions": _versions(),
        "wall_time_s": wall,
        "checks": [c.__dict__ for c in rec.checks],
        "failures": rec.failures,
        "results": rec.results,
        "outputs": dict(sorted(rec.outputs.items())),
    }
    _write_manifest(out, manifest)
    return code, manifest


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(prog="tfw", description="TFW perfect-crystal, defect and jellium experiments.")
    ap.add_argument("mode", choices=sorted(RUNNERS))
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--threads", type=int, default=1, help="FFT workers and concurrent scan cells")
    ap.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    env_out = os.environ.get(OUTPUT_ENV)
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1", key="threads")
        cfg = load_config(args.config)
        if cfg.mode != args.mode:
            raise ConfigError(f"mode: config says {cfg.mode!r} but {args.mode!r} was requested", key="mode")
        cfg = cfg.with_overrides(seed=args.seed, output_dir=env_out)
    except ConfigError as exc:
        out = Path(env_out or ExperimentConfig.output_dir)
        _write_manifest(out, {
            "mode": args.mode,
            "status": "config-error",
            "exit_code": EXIT_CONFIG,
            "versions": _versions(),
            "failures": [{"kind": "config", "message": str(exc), "line": exc.line, "key": exc.key}],
        })
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code, manifest = run(cfg, args.threads)
    status = "PASS" if code == EXIT_OK else "FAIL"
    print(f"{cfg.mode}: {status} ({len(manifest['checks'])} checks, {len(manifest['failures'])} failures) -> {cfg.output_dir}")
    for f in manifest["failures"]:
        print(f"  failure: {json.dumps(f, default=str)}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
