"""Periodic Coulomb energy of a Gaussian on growing supercells against its whole-space value.

    python3 scripts/coulomb_supercell.py --a 10 --sigma 0.5 --n 40
"""

import argparse

from tfwdefect.coulomb import coulomb_form_DR
from tfwdefect.field import restrict_to_cell
from tfwdefect.lattice import Lattice
from tfwdefect.nuclear import Gaussian, GaussianSum, coulomb_form_free


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=10.0, help="unit cell edge")
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=40, help="grid points per unit cell edge")
    ap.add_argument("--L-max", type=int, default=4)
    args = ap.parse_args()

    nu = GaussianSum((Gaussian(1.0, (0.0, 0.0, 0.0), args.sigma),))
    exact = coulomb_form_free(nu)
    print(f"D(nu, nu) = {exact:.10f}")
    for L in range(1, args.L_max + 1):
        f = restrict_to_cell(nu, Lattice(args.a, L, args.n))
        d = coulomb_form_DR(f, f)
        print(f"L={L}  D_R = {d:.10f}  rel err {(d - exact) / exact:+.4f}")


if __name__ == "__main__":
    main()
