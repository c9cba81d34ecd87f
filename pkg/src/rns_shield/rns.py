"""Redundant residue number system codec.

A :class:`ModuliSet` splits pairwise-coprime moduli into ``n`` information
bases and ``r`` control bases.  Integers below the working range ``P_n`` are
legitimate codewords; anything that reconstructs into ``[P_n, P_k)`` reveals an
error.  A single wrong residue is found by reconstructing with each base left
out in turn: only the projection that drops the bad residue lands back in the
working range.

All arithmetic is exact Python integers.  Indices are 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .errors import (
    ConfigurationError,
    ModuliError,
    NotCoprime,
    OrderingViolation,
    ProjectionOutOfRange,
    ValueOutOfFullRange,
)


def _orthogonal_bases(moduli: Sequence[int]) -> tuple[int, ...]:
    # B_i = (P/p_i) * mu_i with mu_i the inverse of P/p_i modulo p_i
    total = math.prod(moduli)
    out = []
    for p in moduli:
        partial = total // p
        out.append(partial * pow(partial % p, -1, p) % total)
    return tuple(out)


@dataclass(frozen=True)
class ProjectionRow:
    """Reduced CRT system with one base left out."""

    excluded: int
    reduced_range: int
    # bases[excluded] is 0, mirroring the diagonal of the projection table
    bases: tuple[int, ...]


@dataclass(frozen=True)
class ModuliSet:
    info_moduli: tuple[int, ...]
    control_moduli: tuple[int, ...]
    working_range: int = field(init=False)
    full_range: int = field(init=False)
    orthogonal_bases: tuple[int, ...] = field(init=False, repr=False)
    projection_table: tuple[ProjectionRow, ...] = field(init=False, repr=False)
    _info_bases: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        moduli = self.moduli
        set_ = object.__setattr__
        set_(self, "working_range", math.prod(self.info_moduli))
        set_(self, "full_range", math.prod(moduli))
        set_(self, "orthogonal_bases", _orthogonal_bases(moduli))
        set_(self, "_info_bases", _orthogonal_bases(self.info_moduli))
        rows = []
        for e in range(len(moduli)):
            rest = moduli[:e] + moduli[e + 1:]
            reduced = _orthogonal_bases(rest)
            rows.append(ProjectionRow(e, self.full_range // moduli[e],
                                      reduced[:e] + (0,) + reduced[e:]))
        set_(self, "projection_table", tuple(rows))

    @property
    def moduli(self) -> tuple[int, ...]:
        return self.info_moduli + self.control_moduli

    @property
    def n(self) -> int:
        return len(self.info_moduli)

    @property
    def r(self) -> int:
        return len(self.control_moduli)

    @property
    def k(self) -> int:
        return self.n + self.r


def make_moduli_set(info: Sequence[int], control: Sequence[int]) -> ModuliSet:
    """Validate moduli and precompute orthogonal bases and the projection table.

    ``control`` may be empty, which gives a plain (non-redundant) CRT system
    that can encode and reconstruct but not localize errors.
    """
    info = tuple(int(p) for p in info)
    control = tuple(int(p) for p in control)
    if not info:
        raise ModuliError("at least one information modulus is required")
    if any(p < 2 for p in info + control):
        raise ModuliError("every modulus must be >= 2")
    for a, b in combinations(info + control, 2):
        if math.gcd(a, b) != 1:
            raise NotCoprime(a, b)
    if control:
        if min(control) <= max(info):
            raise OrderingViolation(
                f"control modulus {min(control)} is not above information modulus {max(info)}")
        if any(a >= b for a, b in zip(control, control[1:])):
            raise OrderingViolation(f"control moduli must be strictly increasing: {control}")
    return ModuliSet(info, control)


@dataclass(frozen=True)
class ResidueVector:
    residues: tuple[int, ...]
    moduli: ModuliSet = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "residues", tuple(self.residues))
        if len(self.residues) != self.moduli.k:
            raise ValueError(f"expected {self.moduli.k} residues, got {len(self.residues)}")
        for a, p in zip(self.residues, self.moduli.moduli):
            if not 0 <= a < p:
                raise ValueError(f"residue {a} outside [0, {p})")

    def replace(self, index: int, value: int) -> ResidueVector:
        res = list(self.residues)
        res[index] = value
        return ResidueVector(tuple(res), self.moduli)


def to_residues(value: int, mset: ModuliSet) -> ResidueVector:
    if not 0 <= value < mset.full_range:
        raise ValueOutOfFullRange(f"{value} outside [0, {mset.full_range})")
    return ResidueVector(tuple(value % p for p in mset.moduli), mset)


def crt_reconstruct(v: ResidueVector) -> int:
    m = v.moduli
    return sum(a * b for a, b in zip(v.residues, m.orthogonal_bases)) % m.full_range


def base_extend(info_residues: Sequence[int], mset: ModuliSet) -> tuple[int, ...]:
    """Residues on the control bases of the working-range value with these info residues."""
    if len(info_residues) != mset.n:
        raise ValueError(f"expected {mset.n} information residues, got {len(info_residues)}")
    value = sum(a * b for a, b in zip(info_residues, mset._info_bases)) % mset.working_range
    return tuple(value % p for p in mset.control_moduli)


@dataclass(frozen=True)
class RangeVerdict:
    in_range: bool
    value: int

    def __bool__(self) -> bool:
        return self.in_range


def range_check(v: ResidueVector) -> RangeVerdict:
    value = crt_reconstruct(v)
    return RangeVerdict(value < v.moduli.working_range, value)


def project_excluding(v: ResidueVector, excluded: int) -> int:
    """Reconstruct over every base except ``excluded``."""
    row = v.moduli.projection_table[excluded]
    return sum(a * b for a, b in zip(v.residues, row.bases)) % row.reduced_range


class LocalizationStatus(enum.Enum):
    NO_ERROR = "no-error"
    LOCATED = "located"
    AMBIGUOUS = "ambiguous"
    UNLOCALIZABLE = "unlocalizable"


@dataclass(frozen=True)
class Localization:
    status: LocalizationStatus
    candidates: tuple[int, ...] = ()

    @property
    def index(self) -> int | None:
        if self.status is LocalizationStatus.LOCATED:
            return self.candidates[0]
        return None


def _require_redundancy(mset: ModuliSet) -> None:
    if mset.r == 0:
        raise ConfigurationError("error localization needs at least one control modulus")


def localize_residue_error(v: ResidueVector) -> Localization:
    """Find the single residue whose exclusion brings the value back in range.

    Every exclusion is tried; more than one in-range projection is reported as
    ambiguous rather than resolved by order.
    """
    mset = v.moduli
    _require_redundancy(mset)
    if range_check(v):
        return Localization(LocalizationStatus.NO_ERROR)
    hits = tuple(e for e in range(mset.k) if project_excluding(v, e) < mset.working_range)
    if not hits:
        return Localization(LocalizationStatus.UNLOCALIZABLE)
    if len(hits) > 1:
        return Localization(LocalizationStatus.AMBIGUOUS, hits)
    return Localization(LocalizationStatus.LOCATED, hits)


def correct_residue(v: ResidueVector, bad: int) -> ResidueVector:
    _require_redundancy(v.moduli)
    value = project_excluding(v, bad)
    if value >= v.moduli.working_range:
        raise ProjectionOutOfRange(bad, value)
    return v.replace(bad, value % v.moduli.moduli[bad])


DEMO_INFO = (2, 3, 5, 7)
DEMO_CONTROL = (11, 13)


def demo_moduli() -> ModuliSet:
    """The six-base worked example: working range 210, full range 30030."""
    return make_moduli_set(DEMO_INFO, DEMO_CONTROL)
