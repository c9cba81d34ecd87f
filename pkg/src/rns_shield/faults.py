"""Seeded fault injection and detect/repair campaigns over protected volumes.

Every trial draws from its own ``random.Random`` seeded with the string
``"{seed}/{trial}"`` (seeded through SHA-512, so the stream is identical on
every platform).  The ground-truth fault log is kept by the harness; scoring
compares repaired bytes against the clean volume and never trusts the
volume's own metadata.
"""

from __future__ import annotations

import enum
import io
import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from .container import (
    decode_header,
    decode_super_block,
    encode_super_block,
    super_block_size,
)
from .errors import ContainerError, RegionEmpty
from .hashing import MaskedHashRow
from .scheme import Cell, MaskMode, ProtectedSuperBlock, Region, mirror_baseline, repair, verify

PRNG = "MT19937 (random.Random, str seed '{seed}/{trial}')"


class FaultKind(str, enum.Enum):
    BIT_FLIP = "bit-flip"
    CELL_RANDOMIZE = "cell-randomize"
    CELL_ZERO = "cell-zero"
    BURST = "burst"


class Target(str, enum.Enum):
    DATA = "data"
    MASKED_HASH = "masked-hash"
    RESIDUE = "residue"
    HEADER = "header"


class Placement(str, enum.Enum):
    RANDOM = "random"
    OFF_DIAGONAL = "off-diagonal"
    # all faults of one super-block share a column, never on the diagonal
    SAME_COLUMN = "same-column"


@dataclass(frozen=True)
class FaultScenario:
    seed: int
    fault_kind: FaultKind
    target_region: Target
    faults_per_super_block: int = 1
    super_block_fraction: float = 1.0
    burst_length: int = 1
    placement: Placement = Placement.RANDOM
    name: str = ""

    def __post_init__(self) -> None:
        for attr, enum_type in (("fault_kind", FaultKind), ("target_region", Target), ("placement", Placement)):
            object.__setattr__(self, attr, enum_type(getattr(self, attr)))
        if not 0.0 <= self.super_block_fraction <= 1.0:
            raise ValueError("super_block_fraction must lie in [0, 1]")
        if self.burst_length < 1:
            raise ValueError("burst length must be >= 1")
        if self.faults_per_super_block < 0:
            raise ValueError("faults_per_super_block must be >= 0")


@dataclass(frozen=True)
class FaultRecord:
    super_block: int  # -1 for the header
    region: Target
    row: int
    col: int
    before: int
    after: int


# -- injection ---------------------------------------------------------------

def _grid_shape(region: Target, n: int, r: int) -> tuple[int, int]:
    return (n, r) if region is Target.RESIDUE else (n, n)


def _pick_cells(rng: random.Random, scenario: FaultScenario, rows: int, cols: int) -> list[tuple[int, int]]:
    count = scenario.faults_per_super_block
    if scenario.fault_kind is FaultKind.BURST:
        total = rows * cols
        length = min(scenario.burst_length, total)
        cells: list[tuple[int, int]] = []
        for _ in range(count):
            start = rng.randrange(total - length + 1)
            cells += [divmod(start + t, cols) for t in range(length)]
        return list(dict.fromkeys(cells))
    if scenario.placement is Placement.SAME_COLUMN:
        j = rng.randrange(cols)
        pool = [i for i in range(rows) if i != j]
        return [(i, j) for i in rng.sample(pool, min(count, len(pool)))]
    pool = [(i, j) for i in range(rows) for j in range(cols)
            if scenario.placement is Placement.RANDOM or i != j]
    return rng.sample(pool, min(count, len(pool)))


def _corrupt(rng: random.Random, kind: FaultKind, value: int, width: int) -> int:
    if kind is FaultKind.BIT_FLIP:
        return value ^ (1 << rng.randrange(width))
    if kind is FaultKind.CELL_ZERO:
        return 0
    # randomize (also used for every cell of a burst); always a real change
    new = rng.getrandbits(width)
    while new == value:
        new = rng.getrandbits(width)
    return new


def inject(volume: bytes, scenario: FaultScenario, trial: int = 0) -> tuple[bytes, list[FaultRecord]]:
    """Corrupt a copy of ``volume``; return it with the exact fault log."""
    rng = random.Random(f"{scenario.seed}/{trial}")
    header = decode_header(io.BytesIO(volume))
    cfg = header.config
    out = bytearray(volume)
    log: list[FaultRecord] = []
    if scenario.faults_per_super_block == 0 or scenario.super_block_fraction == 0.0:
        return bytes(out), log

    if scenario.target_region is Target.HEADER:
        scen = scenario
        if scen.placement is not Placement.RANDOM:
            scen = FaultScenario(**{**asdict(scenario), "placement": Placement.RANDOM})
        for _, off in _pick_cells(rng, scen, 1, header.size):
            before = out[off]
            if scenario.fault_kind is FaultKind.CELL_ZERO and before == 0:
                continue
            out[off] = _corrupt(rng, scenario.fault_kind, before, 8)
            log.append(FaultRecord(-1, Target.HEADER, 0, off, before, out[off]))
        if not log:
            raise RegionEmpty("no non-zero header byte was drawn")
        return bytes(out), log

    if scenario.target_region is Target.RESIDUE and cfg.mask_mode is not MaskMode.PLAIN:
        raise RegionEmpty("paired-mode volumes have no separate residue region")
    if header.super_block_count == 0:
        raise RegionEmpty("volume holds no super-blocks")
    hits = min(header.super_block_count,
               math.ceil(scenario.super_block_fraction * header.super_block_count))
    size = super_block_size(cfg)
    rows, cols = _grid_shape(scenario.target_region, cfg.n, cfg.r)
    for s in sorted(rng.sample(range(header.super_block_count), hits)):
        off = header.size + s * size
        sb = decode_super_block(bytes(out[off:off + size]), cfg)
        data = [list(row) for row in sb.data]
        masked = [list(row.cells) for row in sb.masked_hashes]
        residues = [list(c) for c in sb.residues] if sb.residues is not None else None
        grid, width = {
            Target.DATA: (data, cfg.sub_block_width),
            Target.MASKED_HASH: (masked, cfg.cell_width),
            Target.RESIDUE: (residues, cfg.cell_width),
        }[scenario.target_region]
        for i, j in _pick_cells(rng, scenario, rows, cols):
            before = grid[i][j]
            if scenario.fault_kind is FaultKind.CELL_ZERO and before == 0:
                continue
            grid[i][j] = _corrupt(rng, scenario.fault_kind, before, width)
            log.append(FaultRecord(s, scenario.target_region, i, j, before, grid[i][j]))
        out[off:off + size] = _rebuild(cfg, data, masked, residues)
    return bytes(out), log


def _rebuild(cfg, data, masked, residues) -> bytes:
    new = ProtectedSuperBlock(
        tuple(tuple(r) for r in data),
        tuple(MaskedHashRow(tuple(r), cfg.cell_width) for r in masked),
        tuple(tuple(c) for c in residues) if residues is not None else None,
    )
    return encode_super_block(new, cfg)


# -- campaigns ---------------------------------------------------------------

class Outcome(str, enum.Enum):
    REPAIRED = "repaired"
    UNREPAIRABLE = "detected-unrepairable"
    SILENT = "silent-failure"


@dataclass
class TrialRecord:
    trial: int
    outcome: Outcome
    localized_correctly: bool
    faults: list[FaultRecord]
    localized: list[tuple[int, int, int, str]] = field(default_factory=list)
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "type": "trial",
            "trial": self.trial,
            "outcome": self.outcome.value,
            "localized_correctly": self.localized_correctly,
            "faults": [
                {"super_block": f.super_block, "region": f.region.value, "row": f.row, "col": f.col,
                 "before": f.before, "after": f.after}
                for f in self.faults
            ],
            "localized": [list(c) for c in self.localized],
            "detail": self.detail,
        }


@dataclass
class CampaignReport:
    scenario: FaultScenario
    trials: int
    detected: int
    localized_correctly: int
    repaired: int
    detected_unrepairable: int
    silent_failures: int
    k_red: float
    baseline_k_red: float
    wall_time: float
    prng: str = PRNG
    records: list[TrialRecord] = field(default_factory=list, repr=False)

    def counters(self) -> tuple[int, ...]:
        return (self.trials, self.detected, self.localized_correctly, self.repaired,
                self.detected_unrepairable, self.silent_failures)

    def summary(self) -> dict:
        return {
            "type": "summary",
            "scenario": self.scenario.name or None,
            "seed": self.scenario.seed,
            "fault_kind": self.scenario.fault_kind.value,
            "target_region": self.scenario.target_region.value,
            "placement": self.scenario.placement.value,
            "faults_per_super_block": self.scenario.faults_per_super_block,
            "super_block_fraction": self.scenario.super_block_fraction,
            "burst_length": self.scenario.burst_length,
            "trials": self.trials,
            "detected": self.detected,
            "localized_correctly": self.localized_correctly,
            "repaired": self.repaired,
            "detected_unrepairable": self.detected_unrepairable,
            "silent_failures": self.silent_failures,
            "k_red": self.k_red,
            "baseline_k_red": self.baseline_k_red,
            "wall_time_s": round(self.wall_time, 3),
            "prng": self.prng,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json(), sort_keys=True) for r in self.records]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        s = self.summary()
        rows = [
            ("scenario", s["scenario"] or f"{s['target_region']}/{s['fault_kind']}"),
            ("trials", self.trials),
            ("detected", f"{self.detected} ({_pct(self.detected, self.trials)})"),
            ("localized correctly", f"{self.localized_correctly} ({_pct(self.localized_correctly, self.trials)})"),
            ("repaired", f"{self.repaired} ({_pct(self.repaired, self.trials)})"),
            ("detected-unrepairable", self.detected_unrepairable),
            ("silent failures", self.silent_failures),
            ("K_red (this config)", f"{self.k_red:.4f}"),
            ("K_red (mirror backup)", f"{self.baseline_k_red:.4f}"),
            ("wall time", f"{self.wall_time:.2f} s"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _pct(a: int, b: int) -> str:
    return f"{100.0 * a / b:.1f}%" if b else "n/a"


_REGION_OF = {Target.DATA: Region.DATA, Target.MASKED_HASH: Region.MASKED, Target.RESIDUE: Region.RESIDUE}


def _score(volume: bytes, corrupted: bytes, log: list[FaultRecord], trial: int) -> TrialRecord:
    if not log:
        # nothing changed, nothing to detect
        return TrialRecord(trial, Outcome.REPAIRED, True, log, detail="no fault drawn")
    if log[0].region is Target.HEADER:
        try:
            decode_header(io.BytesIO(corrupted))
        except ContainerError as exc:
            return TrialRecord(trial, Outcome.UNREPAIRABLE, True, log, detail=type(exc).__name__)
        return TrialRecord(trial, Outcome.SILENT, False, log, detail="header corruption accepted")

    header = decode_header(io.BytesIO(corrupted))
    cfg = header.config
    size = super_block_size(cfg)
    truth: dict[int, set[Cell]] = {}
    for f in log:
        truth.setdefault(f.super_block, set()).add(Cell(f.row, f.col, _REGION_OF[f.region]))

    outcome = Outcome.REPAIRED
    localized_ok = True
    localized: list[tuple[int, int, int, str]] = []
    details = []
    for s, cells in sorted(truth.items()):
        off = header.size + s * size
        sb = decode_super_block(corrupted[off:off + size], cfg)
        if verify(sb, cfg).clean:
            outcome = Outcome.SILENT
            localized_ok = False
            details.append(f"super-block {s}: corruption passed verification")
            continue
        fixed, after = repair(sb, cfg)
        found = set(after.localized_cells)
        localized += [(s, c.row, c.col, c.region.value) for c in sorted(found)]
        if found != cells:
            localized_ok = False
        identical = encode_super_block(fixed, cfg) == volume[off:off + size]
        if after.post_repair_valid and not identical:
            outcome = Outcome.SILENT
            details.append(f"super-block {s}: repair claimed valid but differs from the original")
        elif not after.post_repair_valid and outcome is Outcome.REPAIRED:
            outcome = Outcome.UNREPAIRABLE
    return TrialRecord(trial, outcome, localized_ok, log, localized, "; ".join(details))


def run_campaign(volume: bytes, scenario: FaultScenario, trials: int,
                 map_fn: Callable[..., Iterable[TrialRecord]] = map) -> CampaignReport:
    """inject -> verify -> localize -> repair -> score, once per trial.

    Super-blocks the fault log leaves untouched are byte-identical to the
    clean volume, which is checked once up front, so they are not re-verified
    per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = time.perf_counter()
    header = decode_header(io.BytesIO(volume))
    cfg = header.config
    size = super_block_size(cfg)
    for s in range(header.super_block_count):
        off = header.size + s * size
        if not verify(decode_super_block(volume[off:off + size], cfg), cfg).clean:
            raise ValueError(f"campaign volume is not clean: super-block {s} fails verification")

    records = list(map_fn(_run_trial, [volume] * trials, [scenario] * trials, range(trials)))
    report = CampaignReport(
        scenario=scenario,
        trials=trials,
        detected=sum(r.outcome is not Outcome.SILENT for r in records),
        localized_correctly=sum(r.localized_correctly for r in records),
        repaired=sum(r.outcome is Outcome.REPAIRED for r in records),
        detected_unrepairable=sum(r.outcome is Outcome.UNREPAIRABLE for r in records),
        silent_failures=sum(r.outcome is Outcome.SILENT for r in records),
        k_red=float(cfg.k_red),
        baseline_k_red=float(mirror_baseline()),
        wall_time=time.perf_counter() - start,
        records=records,
    )
    return report


def _run_trial(volume: bytes, scenario: FaultScenario, trial: int) -> TrialRecord:
    try:
        corrupted, log = inject(volume, scenario, trial)
        return _score(volume, corrupted, log, trial)
    except RegionEmpty:
        raise
    except Exception as exc:  # recorded, never aborts the campaign
        return TrialRecord(trial, Outcome.UNREPAIRABLE, False, [], detail=f"error: {exc!r}")


def shipped_scenarios(seed: int = 2024) -> list[FaultScenario]:
    """The fault scenarios every release is gated on."""
    s = seed
    return [
        FaultScenario(s + 1, FaultKind.BIT_FLIP, Target.DATA, 1, 0.25, placement=Placement.OFF_DIAGONAL,
                      name="data-bitflip-offdiag"),
        FaultScenario(s + 2, FaultKind.BIT_FLIP, Target.DATA, 1, 0.25, name="data-bitflip-any"),
        FaultScenario(s + 3, FaultKind.CELL_RANDOMIZE, Target.DATA, 1, 0.25, name="data-randomize"),
        FaultScenario(s + 4, FaultKind.CELL_ZERO, Target.DATA, 1, 0.25, name="data-zero"),
        FaultScenario(s + 5, FaultKind.CELL_RANDOMIZE, Target.DATA, 2, 0.25, placement=Placement.SAME_COLUMN,
                      name="data-two-in-column"),
        FaultScenario(s + 6, FaultKind.CELL_RANDOMIZE, Target.DATA, 3, 0.25, name="data-three-random"),
        FaultScenario(s + 7, FaultKind.BURST, Target.DATA, 1, 0.25, burst_length=3, name="data-burst3"),
        FaultScenario(s + 8, FaultKind.BIT_FLIP, Target.MASKED_HASH, 1, 0.25, name="masked-bitflip"),
        FaultScenario(s + 9, FaultKind.CELL_RANDOMIZE, Target.MASKED_HASH, 1, 0.25, name="masked-randomize"),
        FaultScenario(s + 10, FaultKind.BURST, Target.MASKED_HASH, 1, 0.25, burst_length=4, name="masked-burst4"),
        FaultScenario(s + 11, FaultKind.BIT_FLIP, Target.HEADER, 1, name="header-bitflip"),
        FaultScenario(s + 12, FaultKind.CELL_RANDOMIZE, Target.HEADER, 1, name="header-randomize"),
        FaultScenario(s + 13, FaultKind.BURST, Target.HEADER, 1, burst_length=4, name="header-burst4"),
    ]
