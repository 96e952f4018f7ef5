"""Write a stationary heat/wave OU path to CSV.

    python3 scripts/dump_ou_path.py --seed 42 --nu 0.01 --t0 -1 --t1 1 --out path.csv
"""

import argparse

from skmanifold.ou import build_path
from skmanifold.spectral import QSpectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--q_p", type=float, default=4.0)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--nu", type=float, default=0.01)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--t0", type=float, default=-1.0)
    ap.add_argument("--t1", type=float, default=1.0)
    ap.add_argument("--out", default="ou_path.csv")
    args = ap.parse_args()
    Q = QSpectrum.power_law(args.M, args.q_p, args.sigma)
    build_path(args.seed, Q, args.dt, args.t0, args.t1, nu=args.nu).to_csv(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
