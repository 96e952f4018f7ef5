"""Print the matched-distance table from a manifold-dist run as log-log slopes.

    python3 scripts/plot_manifold_dist.py out/manifold_dist/manifold_dist.csv
"""

import csv
import sys

import numpy as np


def main(path):
    rows = list(csv.DictReader(open(path)))
    nu = np.array([float(r["nu"]) for r in rows])
    for key in ("sup_dist_E", "sup_dist_L2", "sup_nu_u_tt"):
        d = np.array([float(r[key]) for r in rows])
        slope = np.polyfit(np.log10(nu), np.log10(d), 1)[0]
        print(f"{key:12s} " + "  ".join(f"{x:.3e}" for x in d) + f"   slope {slope:.2f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "out/manifold_dist/manifold_dist.csv")
