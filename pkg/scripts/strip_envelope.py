"""Strip layout: envelope of simulated C-ROC curves around an observed one.

Intensity 100 * 2^(-|x|) on [-10, 10] x [-1, 1] with covariate |x|, small
values favourable. Reports the share of p-grid points where the observed
curve lies inside the 50-simulation min-max envelope, for several seeds.
"""

import argparse

import numpy as np

from sproc import envelope, evaluate, roc_covariate_pp, simulate_poisson
from sproc.svg import roc_svg
from sproc.synthetic import strip


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--nsim", type=int, default=50)
    ap.add_argument("--svg", help="write the first seed's plot here")
    args = ap.parse_args()

    lay = strip()
    rates = []
    for seed in range(args.seeds):
        obs_seq, band_seq = np.random.SeedSequence(seed).spawn(2)
        obs = simulate_poisson(lay.intensity, lay.window, obs_seq)
        band = envelope(lay.intensity, lay.Z, lay.window, nsim=args.nsim, seed=band_seq, direction="low")
        curve = roc_covariate_pp(obs, lay.Z, "low")
        rates.append(float(np.mean(band.contains(evaluate(curve, band.p)))))
        print(f"seed {seed:3d}  n={obs.n:4d}  inside={rates[-1]:.3f}")
        if seed == 0 and args.svg:
            with open(args.svg, "w") as fh:
                fh.write(roc_svg([curve], band, ["observed"], title="strip envelope"))
    print(f"mean inclusion {np.mean(rates):.3f}")


if __name__ == "__main__":
    main()
