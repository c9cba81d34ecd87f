"""Run every shipped fault scenario and write per-trial JSON lines plus a summary table."""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from rns_shield.container import write_volume
from rns_shield.faults import run_campaign, shipped_scenarios
from rns_shield.scheme import make_config


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--r", type=int, default=2)
    ap.add_argument("--mask-mode", default="paired", choices=["paired", "plain"])
    ap.add_argument("--size", type=int, default=16 * 512, help="bytes of random source data")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path, help="directory for <scenario>.jsonl files")
    args = ap.parse_args()

    cfg = make_config(args.n, args.r, mask_mode=args.mask_mode)
    volume = write_volume(random.Random(args.seed).randbytes(args.size), cfg)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)

    silent = 0
    for sc in shipped_scenarios(args.seed):
        rep = run_campaign(volume, sc, args.trials)
        silent += rep.silent_failures
        print(rep.to_table() + "\n")
        if args.out:
            (args.out / f"{sc.name}.jsonl").write_text(rep.to_jsonl())
    print(f"total silent failures: {silent}")
    return 1 if silent else 0


if __name__ == "__main__":
    sys.exit(main())
