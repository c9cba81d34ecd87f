"""Print the redundancy factor for a range of grid sizes next to the mirror baseline."""

from __future__ import annotations

import argparse

from rns_shield.errors import ConfigInvalid
from rns_shield.scheme import make_config, mirror_baseline, redundancy_factor


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--n", type=int, nargs="+", default=[2, 4, 5, 6, 7, 8, 16])
    args = ap.parse_args()

    print(f"mirror backup baseline: K_red = {float(mirror_baseline()):.4f}\n")
    print(f"{'n':>3} {'r':>3} {'K_red':>10} {'decimal':>8}  {'residue bits/data bits':>22}")
    for r in args.r:
        for n in args.n:
            k = redundancy_factor(n, r)
            try:
                storage = f"{float(make_config(n, r).redundancy().storage_ratio):.4f}"
            except ConfigInvalid:
                storage = "n/a (n does not divide 512)"
            print(f"{n:>3} {r:>3} {str(k):>10} {float(k):>8.4f}  {storage:>22}")


if __name__ == "__main__":
    main()
