"""Empirical size of the covariate tests under complete spatial randomness."""

import argparse

import numpy as np

from sproc import berman_tests, cdf_tests
from sproc.spatial import Grid, Raster, Window
from sproc.synthetic import csr_pattern


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nrep", type=int, default=2000)
    ap.add_argument("--n", type=float, default=100, help="expected number of points")
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()

    g = Grid.covering(0, 1, 0, 1, 100)
    Z = Raster(g, np.random.default_rng(5).random(g.shape))
    W = Window.unit_square()
    keys = ("z1", "z1_conditional", "z2", "ks", "cvm", "ad")
    reject = dict.fromkeys(keys, 0)
    for k in range(args.nrep):
        pp = csr_pattern(W, args.n, seed=k)
        res = {**berman_tests(pp, Z, W), **cdf_tests(pp, Z, W),
               "z1_conditional": berman_tests(pp, Z, W, conditional=True)["z1"]}
        for key in keys:
            reject[key] += res[key].p_value < args.alpha
    for key in keys:
        print(f"{key:15s} rejection rate {reject[key] / args.nrep:.4f}")


if __name__ == "__main__":
    main()
