"""Jellium response: kernel profiles, the screening identity and the linearization ladder.

    python3 scripts/jellium_ladder.py configs/jellium.toml
"""

import argparse

from tfwdefect.config import load_config
from tfwdefect.jellium import JelliumParams, jellium_solve, kernel_realspace, linear_ladder, linear_screening_check
from tfwdefect.lattice import Lattice


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", help="jellium TOML file")
    ap.add_argument("--double-box", action="store_true", help="repeat the neutrality check on a box twice as large")
    args = ap.parse_args()

    cfg = load_config(args.config)
    jc = cfg.jellium
    jp = JelliumParams(jc.alpha, cfg.tfw)
    g = kernel_realspace("g", jp, jc.radii)
    h = kernel_realspace("h", jp, jc.radii)
    print(f"{'r':>6} {'g(r)':>14} {'h(r)':>14}")
    for r, a, b in zip(jc.radii, g.values, h.values):
        print(f"{r:6.2f} {a:14.6e} {b:14.6e}")
    print(f"|2 alpha int g - 1| = {linear_screening_check(jp):.2e}")

    boxes = [(jc.box, jc.n)] + ([(2 * jc.box, 2 * jc.n)] if args.double_box else [])
    for box, n in boxes:
        sol = jellium_solve(cfg.model.defect, jp, Lattice(box, 1, n), cfg.solver, jc.coulomb, jc.damping)
        print(f"box {box:g} ({n}^3): screening integral {sol.screening_integral:.3e}, {sol.iters} iterations")

    lad = linear_ladder(cfg.model.defect, jc.epsilons, jp, Lattice(jc.box, 1, jc.n), cfg.solver, jc.coulomb, jc.damping)
    for e, r in zip(lad.epsilons, lad.residuals):
        print(f"epsilon {e:8.1e}  ||v - g*nu|| = {r:.3e}")
    print(f"slope {lad.slope:.3f}")


if __name__ == "__main__":
    main()
