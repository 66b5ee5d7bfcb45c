"""Second-order convergence of the flatness and Uhlenbeck residuals.

Computes both on the worked example at h, h/2, h/4 over a fixed square and
prints maxima and successive ratios (4 for O(h^2)).
"""
import argparse

from dpwdual.dpw import GridSpec, flatness_residual, frames_from_potential
from dpwdual.symspace import willmore_space
from dpwdual.uniton import extended_solution, uhlenbeck_residual
from dpwdual.willmore import MeromorphicPair, example_potential


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--h", type=float, default=0.04)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--target", choices=["compact", "noncompact"], default="noncompact")
    args = ap.parse_args()
    spec = willmore_space()
    eta = example_potential(MeromorphicPair.polynomials([0, 1], [0, 0, 1]), spec)
    grid = GridSpec(2 * args.h * (1 + 1j), args.h, 5, 5, base=0.0)
    prev = None
    print(f"{'h':>8} {'flatness':>12} {'ratio':>7} {'uhlenbeck':>12} {'ratio':>7}")
    for _ in range(args.levels):
        F = frames_from_potential(eta, grid, args.target)
        fl = flatness_residual(F, spec).max()
        uh = uhlenbeck_residual(extended_solution(F)).max
        r = ("", "") if prev is None else (f"{prev[0] / fl:7.2f}", f"{prev[1] / uh:7.2f}")
        print(f"{grid.h:8.4f} {fl:12.4e} {r[0]:>7} {uh:12.4e} {r[1]:>7}")
        prev = (fl, uh)
        grid = grid.refined(2)


if __name__ == "__main__":
    main()
