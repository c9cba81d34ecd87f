"""Two-dimensional protection of an n x n grid of sub-blocks.

Rows are blocks guarded by a cryptographic hash; columns are redundant RNS
codewords whose information residues are the sub-blocks themselves.  The
control residues of column ``i`` are never stored in the clear: they are
XOR-folded into row ``i`` of the masked-hash region (``paired`` mode), which
binds both dimensions together.

Verification recomputes every column's control residues from the data and
unmasks each row's hash with them.  A corrupted off-diagonal sub-block
``(i, j)`` therefore fails two row checks (row ``i`` because its data changed,
row ``j`` because column ``j``'s residues changed) and one column check, and
the RNS decoder on column ``j`` names row ``i``.

Reference hashes are not stored anywhere else, so the row check compares the
unmasked hash with a fresh hash of the current row.  While the column's
residues are intact the two readings are the same test.

Under paired masking a diagonal sub-block ``(i, i)`` corrupts both the row
hash and the only copy of column ``i``'s residues at once; such cells are
reported as detected but unrepairable.  ``plain`` mode stores hashes and
residues side by side and can repair every single-cell fault, at the cost of
the binding between the two dimensions.
"""

from __future__ import annotations

import enum
import functools
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

from .errors import ConfigInvalid, ProjectionOutOfRange
from .hashing import (
    DEFAULT_ALGORITHM,
    DEMO_TRUNC8,
    HashCode,
    MaskedHashRow,
    get_algorithm,
    hash_block,
    mask_row,
)
from .rns import (
    DEMO_CONTROL,
    DEMO_INFO,
    LocalizationStatus,
    ModuliSet,
    ResidueVector,
    base_extend,
    correct_residue,
    localize_residue_error,
    make_moduli_set,
    range_check,
)

BLOCK_BITS = 512


class MaskMode(str, enum.Enum):
    PAIRED = "paired"
    PLAIN = "plain"


@functools.lru_cache(maxsize=None)
def generate_column_moduli(n: int, r: int, width: int) -> ModuliSet:
    """n primes from ``2**width`` upwards, then the next r primes as control bases."""
    from sympy import nextprime

    primes = []
    p = (1 << width) - 1
    for _ in range(n + r):
        p = nextprime(p)
        primes.append(int(p))
    return make_moduli_set(primes[:n], primes[n:])


@dataclass(frozen=True)
class SchemeConfig:
    n: int
    r: int
    sub_block_width: int
    cell_width: int
    column_moduli: tuple[ModuliSet, ...] = field(repr=False)
    hash_algorithm: int = DEFAULT_ALGORITHM
    mask_mode: MaskMode = MaskMode.PAIRED
    block_bits: int = BLOCK_BITS

    def __post_init__(self) -> None:
        object.__setattr__(self, "mask_mode", MaskMode(self.mask_mode))
        object.__setattr__(self, "column_moduli", tuple(self.column_moduli))
        n, r, w = self.n, self.r, self.sub_block_width
        if n < 1 or n * w != self.block_bits:
            raise ConfigInvalid(f"n={n} sub-blocks of {w} bits do not make a {self.block_bits}-bit block")
        if r < 1:
            raise ConfigInvalid("at least one control base is required")
        if self.mask_mode is MaskMode.PAIRED and r > n:
            raise ConfigInvalid(f"paired masking stores r={r} residues in only n={n} cells")
        try:
            alg = get_algorithm(self.hash_algorithm)
        except KeyError as exc:
            raise ConfigInvalid(str(exc)) from None
        if alg.digest_bits % n:
            raise ConfigInvalid(f"{alg.digest_bits}-bit digest does not split into {n} sub-codes")
        if len(self.column_moduli) != n:
            raise ConfigInvalid(f"expected {n} column moduli sets, got {len(self.column_moduli)}")
        widest = alg.digest_bits // n
        for j, ms in enumerate(self.column_moduli):
            if ms.n != n or ms.r != r:
                raise ConfigInvalid(f"column {j} has {ms.n}+{ms.r} bases, expected {n}+{r}")
            if min(ms.info_moduli) < 1 << w:
                raise ConfigInvalid(f"column {j}: information modulus {min(ms.info_moduli)} < 2**{w}")
            widest = max(widest, ms.control_moduli[-1].bit_length())
        if self.cell_width != widest:
            raise ConfigInvalid(f"cell width {self.cell_width} != required {widest}")

    @property
    def sub_code_width(self) -> int:
        return get_algorithm(self.hash_algorithm).digest_bits // self.n

    @property
    def row_bytes(self) -> int:
        return -(-self.block_bits // 8)

    @property
    def k_red(self) -> Fraction:
        return redundancy_factor(self.n, self.r)

    def redundancy(self) -> Redundancy:
        return Redundancy(
            k_red=self.k_red,
            residue_bits=self.r * self.cell_width * self.n,
            protected_bits=self.n * self.block_bits,
        )


def make_config(n: int = 8, r: int = 2, hash_algorithm: int = DEFAULT_ALGORITHM,
                mask_mode: MaskMode | str = MaskMode.PAIRED, block_bits: int = BLOCK_BITS) -> SchemeConfig:
    """Production config with deterministic word-scale prime moduli."""
    if n < 1 or block_bits % n:
        raise ConfigInvalid(f"n={n} does not divide the {block_bits}-bit block")
    if r < 1:
        raise ConfigInvalid("at least one control base is required")
    w = block_bits // n
    ms = generate_column_moduli(n, r, w)
    try:
        sub = get_algorithm(hash_algorithm).digest_bits // n
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from None
    cell = max(ms.control_moduli[-1].bit_length(), sub)
    return SchemeConfig(n, r, w, cell, (ms,) * n, hash_algorithm, MaskMode(mask_mode), block_bits)


def demo_config(mask_mode: MaskMode | str = MaskMode.PAIRED) -> SchemeConfig:
    """4x4 grid of 1-bit sub-blocks over the six-base worked example, 8-bit toy hash."""
    ms = make_moduli_set(DEMO_INFO, DEMO_CONTROL)
    return SchemeConfig(4, 2, 1, 4, (ms,) * 4, DEMO_TRUNC8, MaskMode(mask_mode), 4)


# -- redundancy --------------------------------------------------------------

@dataclass(frozen=True)
class Redundancy:
    k_red: Fraction
    residue_bits: int
    protected_bits: int

    @property
    def storage_ratio(self) -> Fraction:
        return Fraction(self.residue_bits, self.protected_bits)


def k_red(assurance_bits: int, protected_bits: int) -> Fraction:
    """Redundancy added for integrity assurance per protected bit.

    The control (hash) redundancy is the same for every compared scheme and
    is left out of the ratio.
    """
    return Fraction(assurance_bits, protected_bits)


def redundancy_factor(n: int, r: int) -> Fraction:
    """r control sub-blocks per n information sub-blocks."""
    if n < 1 or r < 0:
        raise ValueError(f"invalid n={n}, r={r}")
    return k_red(r, n)


def mirror_baseline() -> Fraction:
    """Backup copy: the assurance redundancy equals the protected volume."""
    return k_red(1, 1)


# -- super-block -------------------------------------------------------------

Grid = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ProtectedSuperBlock:
    data: Grid
    masked_hashes: tuple[MaskedHashRow, ...]
    # plain mode only: per column, the r control residues
    residues: Grid | None = None

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.data)

    def with_cell(self, i: int, j: int, value: int) -> ProtectedSuperBlock:
        row = list(self.data[i])
        row[j] = value
        data = self.data[:i] + (tuple(row),) + self.data[i + 1:]
        return replace(self, data=data)


def row_to_bytes(row: Sequence[int], config: SchemeConfig) -> bytes:
    acc = 0
    for m in row:
        acc = (acc << config.sub_block_width) | m
    return acc.to_bytes(config.row_bytes, "big")


def bytes_to_row(block: bytes, config: SchemeConfig) -> tuple[int, ...]:
    if len(block) != config.row_bytes:
        raise ConfigInvalid(f"row block must be {config.row_bytes} bytes, got {len(block)}")
    acc = int.from_bytes(block, "big")
    w = config.sub_block_width
    mask = (1 << w) - 1
    return tuple((acc >> (w * (config.n - 1 - t))) & mask for t in range(config.n))


def row_hash(row: Sequence[int], config: SchemeConfig) -> HashCode:
    return hash_block(row_to_bytes(row, config), config.hash_algorithm, config.n, block_bits=None)


def build_grid(grid: Sequence[Sequence[int]], config: SchemeConfig) -> ProtectedSuperBlock:
    n, w = config.n, config.sub_block_width
    data = tuple(tuple(int(m) for m in row) for row in grid)
    if len(data) != n or any(len(row) != n for row in data):
        raise ConfigInvalid(f"grid must be {n}x{n}")
    if any(m < 0 or m >> w for row in data for m in row):
        raise ConfigInvalid(f"sub-blocks must be {w}-bit values")
    controls = [base_extend([row[j] for row in data], config.column_moduli[j]) for j in range(n)]
    if config.mask_mode is MaskMode.PAIRED:
        masked = tuple(mask_row(row_hash(data[i], config), controls[i], config.cell_width)
                       for i in range(n))
        return ProtectedSuperBlock(data, masked)
    masked = tuple(MaskedHashRow(row_hash(data[i], config).sub_codes, config.cell_width) for i in range(n))
    return ProtectedSuperBlock(data, masked, tuple(controls))


def build(blocks: Sequence[bytes], config: SchemeConfig) -> ProtectedSuperBlock:
    if len(blocks) != config.n:
        raise ConfigInvalid(f"expected {config.n} row blocks, got {len(blocks)}")
    return build_grid([bytes_to_row(b, config) for b in blocks], config)


# -- verification ------------------------------------------------------------

class RowVerdict(str, enum.Enum):
    INTACT = "intact"
    HASH_MISMATCH = "hash-mismatch"


class ColumnVerdict(str, enum.Enum):
    IN_RANGE = "in-range"
    OUT_OF_RANGE = "out-of-range"
    # stored residues could not be recovered, so no range check was possible
    UNVERIFIABLE = "unverifiable"


class Region(str, enum.Enum):
    DATA = "data"
    MASKED = "masked"
    RESIDUE = "residue"


class Cell(NamedTuple):
    row: int
    col: int
    region: Region = Region.DATA


class RepairStatus(str, enum.Enum):
    REPAIRED = "repaired"
    UNREPAIRABLE = "detected-unrepairable"


@dataclass(frozen=True)
class RepairOutcome:
    cell: Cell
    status: RepairStatus
    reason: str = ""


@dataclass
class IntegrityReport:
    row_verdicts: tuple[RowVerdict, ...]
    column_verdicts: tuple[ColumnVerdict, ...]
    localized_cells: list[Cell] = field(default_factory=list)
    # flags that no cell explains, as ("row" | "column", index)
    unexplained: list[tuple[str, int]] = field(default_factory=list)
    repairs: list[RepairOutcome] = field(default_factory=list)
    post_repair_valid: bool | None = None
    stored_controls: tuple[tuple[int, ...] | None, ...] = field(default=(), repr=False)
    mismatched_cells: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    @property
    def flagged_rows(self) -> list[int]:
        return [i for i, v in enumerate(self.row_verdicts) if v is RowVerdict.HASH_MISMATCH]

    @property
    def flagged_columns(self) -> list[int]:
        return [j for j, v in enumerate(self.column_verdicts) if v is ColumnVerdict.OUT_OF_RANGE]

    @property
    def clean(self) -> bool:
        return not self.flagged_rows and all(v is ColumnVerdict.IN_RANGE for v in self.column_verdicts)

    @property
    def unrepairable(self) -> list[RepairOutcome]:
        return [o for o in self.repairs if o.status is RepairStatus.UNREPAIRABLE]


def _recover_paired_controls(masked: MaskedHashRow, code: HashCode, ms: ModuliSet) -> tuple[int, ...] | None:
    # every residue sits in n/r cells; accept a value only on a strict majority
    r = ms.r
    out = []
    subs = code.sub_codes
    for c in range(r):
        copies = [masked.cells[t] ^ subs[t] for t in range(c, len(subs), r)]
        value, count = Counter(copies).most_common(1)[0]
        if 2 * count <= len(copies) or value >= ms.control_moduli[c]:
            return None
        out.append(value)
    return tuple(out)


def verify(sb: ProtectedSuperBlock, config: SchemeConfig) -> IntegrityReport:
    """Recompute both dimensions of checks and localize; never modifies ``sb``."""
    n, r = config.n, config.r
    if len(sb.data) != n or any(len(row) != n for row in sb.data) or len(sb.masked_hashes) != n:
        raise ConfigInvalid("super-block dimensions do not match the config")
    paired = config.mask_mode is MaskMode.PAIRED
    hashes = [row_hash(row, config) for row in sb.data]
    controls = [base_extend(sb.column(j), config.column_moduli[j]) for j in range(n)]

    rows, mismatched = [], []
    for i in range(n):
        expect = hashes[i].sub_codes
        cells = sb.masked_hashes[i].cells
        if paired:
            bad = tuple(t for t in range(n) if cells[t] ^ controls[i][t % r] != expect[t])
        else:
            bad = tuple(t for t in range(n) if cells[t] != expect[t])
        mismatched.append(bad)
        rows.append(RowVerdict.HASH_MISMATCH if bad else RowVerdict.INTACT)

    stored: list[tuple[int, ...] | None] = []
    columns = []
    for j in range(n):
        ms = config.column_moduli[j]
        if paired:
            s = _recover_paired_controls(sb.masked_hashes[j], hashes[j], ms)
        else:
            s = tuple(sb.residues[j])
            if any(a >= p for a, p in zip(s, ms.control_moduli)):
                s = None
        stored.append(s)
        if s is None:
            columns.append(ColumnVerdict.UNVERIFIABLE)
        elif range_check(ResidueVector(sb.column(j) + s, ms)):
            columns.append(ColumnVerdict.IN_RANGE)
        else:
            columns.append(ColumnVerdict.OUT_OF_RANGE)

    report = IntegrityReport(tuple(rows), tuple(columns), stored_controls=tuple(stored),
                             mismatched_cells=tuple(mismatched))
    report.localized_cells = localize(report, sb, config)
    return report


def localize(report: IntegrityReport, sb: ProtectedSuperBlock, config: SchemeConfig) -> list[Cell]:
    """Intersect hash-flagged rows with RNS-flagged columns.

    Each out-of-range column is decoded on its own; the decoder's row must also
    be flagged by its hash.  Rows left unexplained point at the diagonal cell
    (paired mode, column unrecoverable, every hash cell wrong) or at the
    masked-hash region.  Anything else is recorded in ``report.unexplained``.
    """
    n = config.n
    paired = config.mask_mode is MaskMode.PAIRED
    flagged = set(report.flagged_rows)
    cells: list[Cell] = []
    explained_rows: set[int] = set()
    report.unexplained = []

    for j in report.flagged_columns:
        ms = config.column_moduli[j]
        loc = localize_residue_error(ResidueVector(sb.column(j) + report.stored_controls[j], ms))
        allowed = flagged - {j} if paired else flagged
        rows = [c for c in loc.candidates if c < n and c in allowed]
        if loc.status is LocalizationStatus.LOCATED and loc.index >= n:
            # a stored control residue itself is wrong
            if paired:
                cells += [Cell(j, t, Region.MASKED) for t in report.mismatched_cells[j]]
            else:
                cells.append(Cell(j, loc.index - n, Region.RESIDUE))
            explained_rows.add(j)
        elif loc.status in (LocalizationStatus.LOCATED, LocalizationStatus.AMBIGUOUS) and len(rows) == 1:
            cells.append(Cell(rows[0], j))
            explained_rows.add(rows[0])
            if paired:
                explained_rows.add(j)
        else:
            report.unexplained.append(("column", j))

    for u in sorted(flagged - explained_rows):
        bad = report.mismatched_cells[u]
        if len(bad) < n:
            cells += [Cell(u, t, Region.MASKED) for t in bad]
        elif paired and report.column_verdicts[u] is ColumnVerdict.UNVERIFIABLE:
            cells.append(Cell(u, u))
        else:
            report.unexplained.append(("row", u))

    for j, v in enumerate(report.column_verdicts):
        if v is ColumnVerdict.UNVERIFIABLE and j not in flagged:
            report.unexplained.append(("column", j))
    return cells


# -- repair ------------------------------------------------------------------

def repair_column(info: Sequence[int], stored: Sequence[int], ms: ModuliSet,
                  bad: int) -> tuple[int, ...]:
    """Recompute residue ``bad`` of one column codeword from the other k-1."""
    fixed = correct_residue(ResidueVector(tuple(info) + tuple(stored), ms), bad)
    return fixed.residues


def _repair_round(sb: ProtectedSuperBlock, report: IntegrityReport, config: SchemeConfig,
                  outcomes: dict[Cell, RepairOutcome]) -> tuple[ProtectedSuperBlock, bool]:
    paired = config.mask_mode is MaskMode.PAIRED
    progress = False
    order = sorted(report.localized_cells, key=lambda c: (c.region != Region.DATA, c.col, c.row))
    for cell in order:
        i, j = cell.row, cell.col
        if cell.region is Region.DATA:
            if paired and i == j:
                outcomes[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE,
                                               "diagonal cell: its row hash unmasks its own column")
                continue
            stored = report.stored_controls[j]
            if stored is None:
                outcomes[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE,
                                               f"control residues of column {j} unrecoverable")
                continue
            try:
                column = repair_column(sb.column(j), stored, config.column_moduli[j], i)
            except ProjectionOutOfRange as exc:
                outcomes[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE, str(exc))
                continue
            if column[i] >> config.sub_block_width:
                outcomes[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE,
                                               "corrected residue does not fit a sub-block")
                continue
            sb = sb.with_cell(i, j, column[i])
            outcomes[cell] = RepairOutcome(cell, RepairStatus.REPAIRED)
            progress = True
        elif paired:
            outcomes[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE, "masked-hash region corruption")
        elif cell.region is Region.MASKED:
            # plain mode: every column checks out, so the row data is trusted
            code = row_hash(sb.data[i], config)
            rows = list(sb.masked_hashes)
            rows[i] = MaskedHashRow(code.sub_codes, config.cell_width)
            sb = replace(sb, masked_hashes=tuple(rows))
            outcomes[cell] = RepairOutcome(cell, RepairStatus.REPAIRED)
            progress = True
        else:
            res = [list(c) for c in sb.residues]
            res[i][j] = base_extend(sb.column(i), config.column_moduli[i])[j]
            sb = replace(sb, residues=tuple(tuple(c) for c in res))
            outcomes[cell] = RepairOutcome(cell, RepairStatus.REPAIRED)
            progress = True
    return sb, progress


def repair(sb: ProtectedSuperBlock, config: SchemeConfig) -> tuple[ProtectedSuperBlock, IntegrityReport]:
    """Verify, localize and repair until the super-block is clean or stuck.

    Repairing one cell can make another column's residues recoverable again,
    so rounds repeat while they make progress.  Data repairs whose row hash
    still fails at the end are rolled back: the output never holds a guessed
    value.  ``localized_cells`` of the returned report lists the cells that
    were repaired plus those still flagged at the end.
    """
    original = sb
    repaired: dict[Cell, RepairOutcome] = {}
    report = verify(sb, config)
    for _ in range(config.n * config.n + 1):
        if report.clean:
            break
        outcomes: dict[Cell, RepairOutcome] = {}
        sb, progress = _repair_round(sb, report, config, outcomes)
        repaired.update((c, o) for c, o in outcomes.items() if o.status is RepairStatus.REPAIRED)
        report = verify(sb, config)
        if not progress:
            break

    left: dict[Cell, RepairOutcome] = {}
    if not report.clean:
        flagged = set(report.flagged_rows)
        for cell in list(repaired):
            if cell.region is Region.DATA and cell.row in flagged:
                sb = sb.with_cell(cell.row, cell.col, original.data[cell.row][cell.col])
                left[cell] = RepairOutcome(cell, RepairStatus.UNREPAIRABLE, "repair did not restore the row hash")
                del repaired[cell]
        report = verify(sb, config)
        # dry run only to name the reason each remaining cell is stuck
        _repair_round(sb, report, config, scratch := {})
        for cell, outcome in scratch.items():
            if cell not in left:
                left[cell] = outcome if outcome.status is RepairStatus.UNREPAIRABLE else RepairOutcome(
                    cell, RepairStatus.UNREPAIRABLE, "repair did not restore the row hash")

    report.repairs = list(repaired.values()) + list(left.values())
    report.localized_cells = [o.cell for o in report.repairs]
    report.post_repair_valid = report.clean
    return sb, report
