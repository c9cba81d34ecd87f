"""rns-shield command line.

Exit codes (stable):
    0  success / fully intact / fully repaired
    1  integrity violations found, or something left unrepairable
    2  invalid configuration or arguments
    3  I/O error
    4  malformed container

``RNS_SHIELD_WORKERS`` sets the size of the super-block worker pool
(default 1, i.e. in-process).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import random
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

from . import container, faults
from .demo import run_demo
from .errors import ConfigInvalid, ContainerError, RnsShieldError
from .hashing import DEFAULT_ALGORITHM
from .scheme import MaskMode, make_config, mirror_baseline, repair, verify

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IO, EXIT_MALFORMED = 0, 1, 2, 3, 4
WORKERS_ENV = "RNS_SHIELD_WORKERS"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(EXIT_CONFIG, f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@contextlib.contextmanager
def _pool():
    workers = _workers()
    if workers == 1:
        yield map
        return
    with ProcessPoolExecutor(workers) as ex:
        # Executor.map keeps input order regardless of completion order
        yield partial(ex.map, chunksize=32)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None


def _write_atomic(path: str, payload: bytes) -> None:
    target = Path(path)
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except OSError as exc:
        if tmp is not None:
            with contextlib.suppress(OSError):
                os.unlink(tmp)
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _config_from(args):
    try:
        return make_config(args.n, args.r, args.hash, MaskMode(args.mask_mode))
    except ConfigInvalid as exc:
        raise CliError(EXIT_CONFIG, f"invalid configuration: {exc}") from None


def _emit(args, record: dict) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))


def _open_volume(raw: bytes):
    try:
        return container.read_volume(raw)
    except ContainerError as exc:
        raise CliError(EXIT_MALFORMED, f"malformed container: {type(exc).__name__}: {exc}") from None


def _check_raw(raw: bytes, cfg):
    sb = container.decode_super_block(raw, cfg)
    report = verify(sb, cfg)
    return (report.clean, report.flagged_rows, report.flagged_columns,
            [(c.row, c.col, c.region.value) for c in report.localized_cells], report.unexplained)


def _repair_raw(raw: bytes, cfg):
    sb = container.decode_super_block(raw, cfg)
    fixed, report = repair(sb, cfg)
    return (container.encode_super_block(fixed, cfg), report.post_repair_valid,
            [((o.cell.row, o.cell.col, o.cell.region.value), o.status.value, o.reason) for o in report.repairs])


def _raw_blocks(volume) -> list[bytes]:
    out = []
    try:
        while True:
            out.append(volume.super_blocks.read_raw())
    except StopIteration:
        return out
    except ContainerError as exc:
        raise CliError(EXIT_MALFORMED, f"malformed container: {type(exc).__name__}: {exc}") from None


# -- subcommands -------------------------------------------------------------

def cmd_protect(args) -> int:
    cfg = _config_from(args)
    source = _read(args.input)
    with _pool() as pmap:
        payload = container.write_volume(source, cfg, map_fn=pmap)
    _write_atomic(args.output, payload)
    red = cfg.redundancy()
    summary = {
        "type": "protect", "input": args.input, "output": args.output, "bytes": len(source),
        "super_blocks": -(-len(source) // container.data_bytes_per_super_block(cfg)),
        "n": cfg.n, "r": cfg.r, "sub_block_width": cfg.sub_block_width, "cell_width": cfg.cell_width,
        "hash_algorithm": cfg.hash_algorithm, "mask_mode": cfg.mask_mode.value,
        "k_red": float(red.k_red), "k_red_mirror_baseline": float(mirror_baseline()),
        "residue_storage_ratio": float(red.storage_ratio),
    }
    if args.json:
        _emit(args, summary)
    else:
        print(f"protected {len(source)} bytes -> {args.output} ({summary['super_blocks']} super-blocks)")
        print(f"n={cfg.n} r={cfg.r} sub-block={cfg.sub_block_width} bits cell={cfg.cell_width} bits "
              f"hash={cfg.hash_algorithm} mask={cfg.mask_mode.value}")
        print(f"K_red = {float(red.k_red):.4f} (mirror backup 1.0000); "
              f"stored residue bits / data bits = {float(red.storage_ratio):.4f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    vol = _open_volume(_read(args.container))
    raws = _raw_blocks(vol)
    with _pool() as pmap:
        results = list(pmap(_check_raw, raws, [vol.config] * len(raws)))
    bad = 0
    for idx, (clean, rows, cols, cells, unexplained) in enumerate(results):
        if clean:
            continue
        bad += 1
        _emit(args, {"type": "super_block", "index": idx, "flagged_rows": rows, "out_of_range_columns": cols,
                     "cells": [list(c) for c in cells], "unexplained": unexplained})
        if not args.json:
            where = ", ".join(f"({idx}, {i}, {j})" + ("" if reg == "data" else f" [{reg}]")
                              for i, j, reg in cells) or "unlocalized"
            print(f"super-block {idx}: rows {rows} flagged, columns {cols} out of range; cells {where}")
    _emit(args, {"type": "summary", "super_blocks": len(results), "violated": bad})
    if not args.json:
        print(f"{len(results)} super-blocks checked, {bad} with integrity violations")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_repair(args) -> int:
    vol = _open_volume(_read(args.input))
    raws = _raw_blocks(vol)
    with _pool() as pmap:
        results = list(pmap(_repair_raw, raws, [vol.config] * len(raws)))
    header = container.encode_header(vol.config, vol.original_length, len(raws))
    payload = header + b"".join(r[0] for r in results)
    _write_atomic(args.output, payload)
    failed = 0
    for idx, (_, valid, outcomes) in enumerate(results):
        for (i, j, reg), status, reason in outcomes:
            _emit(args, {"type": "repair", "super_block": idx, "row": i, "col": j, "region": reg,
                         "status": status, "reason": reason})
            if not args.json:
                print(f"super-block {idx} cell ({i}, {j}) [{reg}]: {status}" + (f" - {reason}" if reason else ""))
        failed += not valid
    _emit(args, {"type": "summary", "super_blocks": len(results), "unrepaired": failed})
    if failed:
        print(f"warning: {failed} super-block(s) still violated; partial repairs written to {args.output}",
              file=sys.stderr)
        return EXIT_VIOLATION
    if not args.json:
        print(f"{len(results)} super-blocks valid after repair -> {args.output}")
    return EXIT_OK


def _scenario_from(args) -> faults.FaultScenario:
    try:
        return faults.FaultScenario(
            seed=args.seed, fault_kind=args.kind, target_region=args.region,
            faults_per_super_block=args.faults, super_block_fraction=args.fraction,
            burst_length=args.burst, placement=args.placement,
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid scenario: {exc}") from None


def cmd_inject(args) -> int:
    scenario = _scenario_from(args)
    raw = _read(args.input)
    _open_volume(raw)
    try:
        corrupted, log = faults.inject(raw, scenario, args.trial)
    except RnsShieldError as exc:
        raise CliError(EXIT_CONFIG, f"cannot inject: {exc}") from None
    _write_atomic(args.output, corrupted)
    lines = [json.dumps({"super_block": f.super_block, "region": f.region.value, "row": f.row,
                         "col": f.col, "before": f.before, "after": f.after}, sort_keys=True) for f in log]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.log:
        _write_atomic(args.log, text.encode())
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.container:
        volume = _read(args.container)
        _open_volume(volume)
    else:
        cfg = _config_from(args)
        rng = random.Random(args.seed)
        size = args.size if args.size is not None else 16 * container.data_bytes_per_super_block(cfg)
        volume = container.write_volume(rng.randbytes(size), cfg)
    if args.kind or args.region:
        if not (args.kind and args.region):
            raise CliError(EXIT_CONFIG, "--kind and --region go together")
        scenarios = [_scenario_from(args)]
    else:
        shipped = {s.name: s for s in faults.shipped_scenarios(args.seed)}
        names = args.scenario or list(shipped)
        unknown = [n for n in names if n not in shipped]
        if unknown:
            raise CliError(EXIT_CONFIG, f"unknown scenario(s) {unknown}; choose from {sorted(shipped)}")
        scenarios = [shipped[n] for n in names]
    silent = 0
    with _pool() as pmap:
        for scenario in scenarios:
            try:
                report = faults.run_campaign(volume, scenario, args.trials, map_fn=pmap)
            except RnsShieldError as exc:
                raise CliError(EXIT_CONFIG, f"scenario {scenario.name or scenario.fault_kind.value}: {exc}") from None
            silent += report.silent_failures
            if args.json:
                sys.stdout.write(report.to_jsonl())
            else:
                print(report.to_table() + "\n")
    return EXIT_VIOLATION if silent else EXIT_OK


def cmd_demo(args) -> int:
    return EXIT_OK if run_demo() else EXIT_VIOLATION


def cmd_extract(args) -> int:
    raw = _read(args.container)
    try:
        data = container.extract_data(raw)
    except ContainerError as exc:
        raise CliError(EXIT_MALFORMED, f"malformed container: {type(exc).__name__}: {exc}") from None
    _write_atomic(args.output, data)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=8, help="sub-blocks per row and column (must divide 512)")
    p.add_argument("--r", type=int, default=2, help="control bases per column")
    p.add_argument("--hash", type=int, default=DEFAULT_ALGORITHM, help="hash algorithm id (1 = SHA-512)")
    p.add_argument("--mask-mode", choices=[m.value for m in MaskMode], default=MaskMode.PAIRED.value)


def _add_scenario_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--kind", choices=[k.value for k in faults.FaultKind], required=required)
    p.add_argument("--region", choices=[t.value for t in faults.Target], required=required)
    p.add_argument("--faults", type=int, default=1, help="faults per affected super-block")
    p.add_argument("--fraction", type=float, default=1.0, help="fraction of super-blocks hit")
    p.add_argument("--burst", type=int, default=1, help="burst length in cells")
    p.add_argument("--placement", choices=[p.value for p in faults.Placement], default="random")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rns-shield", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protect", help="protect a file into a container")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("verify", help="check a container without modifying it")
    p.add_argument("container")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repair", help="repair a container into a new file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("inject", help="corrupt a container deterministically")
    p.add_argument("input")
    p.add_argument("output")
    _add_scenario_flags(p, required=True)
    p.add_argument("--trial", type=int, default=0, help="trial index mixed into the seed")
    p.add_argument("--log", help="write the fault log (JSON lines) here instead of stdout")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("stats", help="run fault-injection campaigns")
    p.add_argument("--container", help="campaign volume (default: random volume from the config flags)")
    p.add_argument("--size", type=int, help="bytes of random data for the generated volume")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--scenario", action="append", help="shipped scenario name (repeatable; default all)")
    _add_config_flags(p)
    _add_scenario_flags(p, required=False)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("demo", help="self-checking worked example")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("extract", help="write the protected data back out")
    p.add_argument("container")
    p.add_argument("output")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "trials", 1) < 1:
            raise CliError(EXIT_CONFIG, "--trials must be >= 1")
        return args.func(args)
    except CliError as exc:
        print(f"rns-shield: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
