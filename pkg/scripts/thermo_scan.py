"""Supercell scan of a defect: multipliers, screening and local distances against L.

    python3 scripts/thermo_scan.py configs/dipole_scan.toml --threads 4
"""

import argparse

import numpy as np

from tfwdefect.config import load_config
from tfwdefect.crystal import local_l2, run_thermo_scan
from tfwdefect.lattice import Lattice


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", help="thermo-scan TOML file")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    if cfg.mode != "thermo-scan":
        raise SystemExit(f"expected a thermo-scan config, got mode {cfg.mode!r}")
    lat1 = Lattice(cfg.lattice.a, 1, cfg.lattice.n_per_cell)
    sc = cfg.scan
    rep = run_thermo_scan(cfg.model, sc.q_list, sc.L_list, lat1, cfg.tfw, cfg.solver,
                          include_free=sc.include_free, threads=args.threads)

    print(f"{'q':>6} {'L':>2} {'energy':>14} {'|mu|':>10} {'s_L':>10} {'d(v_q,v_0)':>11} iters")
    for r in rep.rows:
        d = np.nan
        if r.q != "free" and (0.0, r.L) in rep.solutions and (r.q, r.L) in rep.solutions:
            d = local_l2(rep.solutions[(r.q, r.L)].v, rep.solutions[(0.0, r.L)].v, lat1.a / 2)
        q = r.q if isinstance(r.q, str) else f"{r.q:+.2f}"
        print(f"{q:>6} {r.L:>2} {r.energy:14.8f} {abs(r.multiplier):10.3e} {r.screening_integral:10.4f} {d:11.3e} {r.iters:5d}")
    if not rep.all_converged:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
