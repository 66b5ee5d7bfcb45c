"""Where the converse duality breaks down: SO(1,2) with eta = X dz / lam, X^3 = 0.

The compact frames exist everywhere; the non-compact Iwasawa splitting of
exp(z X / lam) fails exactly on |z| = 1, so the region around the base is
the unit disk.  Prints the status mask and compares it with |z| < 1.
"""
import argparse

import numpy as np

from dpwdual.duality import noncompact_from_compact
from dpwdual.dpw import GridSpec, NormalizedPotential, frames_from_potential
from dpwdual.symspace import SymmetricSpaceSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=41, help="nodes per axis")
    ap.add_argument("--extent", type=float, default=1.6, help="half-width of the square")
    args = ap.parse_args()
    spec = SymmetricSpaceSpec.standard(3, 1, 1)
    X = np.array([[0, 1, 1j], [1, 0, 0], [1j, 0, 0]])
    eta = NormalizedPotential.constant(X, spec)
    grid = GridSpec(0.0, 2 * args.extent / (args.n - 1), args.n, args.n)
    H = frames_from_potential(eta, grid, "compact", M=12)
    F, rep = noncompact_from_compact(H, spec, M=12, check_potential=False)
    Z = grid.points()
    region = rep.local_domain
    disk = np.abs(Z) < 1
    print("status counts:", rep.status_counts)
    for iy in range(grid.ny - 1, -1, -1):
        print("".join("#" if region[iy, ix] else ("." if F.ok[iy, ix] else "x")
                      for ix in range(grid.nx)))
    print("# base component, . other OK nodes, x failed")
    mismatch = region != disk
    print(f"base component = unit disk except at {int(mismatch.sum())} nodes; "
          f"their min | |z| - 1 | = {np.abs(np.abs(Z[mismatch]) - 1).min(initial=np.inf):.3g}")


if __name__ == "__main__":
    main()
