"""Row hash codes and the XOR mask binding them to column control residues.

Each row block is hashed to a fixed-width digest that is cut into ``n``
sub-codes.  A stored row of the masked-hash region holds, per cell, a hash
sub-code XOR one control residue of the paired column.  With ``r`` control
residues and ``n`` cells, residue ``t mod r`` goes into cell ``t``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import CellOverflow, TruncationLoss, UnknownAlgorithm


@dataclass(frozen=True)
class HashAlgorithm:
    id: int
    name: str
    digest_bits: int
    fn: Callable[[bytes], bytes]


_REGISTRY: dict[int, HashAlgorithm] = {}

# Ids are persisted in container headers; never renumber.
SHA512 = 1
SHA3_512 = 2
BLAKE2B_512 = 3
DEFAULT_ALGORITHM = SHA512


def register_algorithm(alg_id: int, name: str, digest_bits: int,
                       fn: Callable[[bytes], bytes], *, replace: bool = False) -> HashAlgorithm:
    if alg_id in _REGISTRY and not replace:
        raise ValueError(f"hash algorithm id {alg_id} already registered")
    alg = HashAlgorithm(alg_id, name, digest_bits, fn)
    _REGISTRY[alg_id] = alg
    return alg


def get_algorithm(alg_id: int) -> HashAlgorithm:
    try:
        return _REGISTRY[alg_id]
    except KeyError:
        raise UnknownAlgorithm(alg_id) from None


register_algorithm(SHA512, "sha512", 512, lambda b: hashlib.sha512(b).digest())
register_algorithm(SHA3_512, "sha3-512", 512, lambda b: hashlib.sha3_512(b).digest())
register_algorithm(BLAKE2B_512, "blake2b-512", 512, lambda b: hashlib.blake2b(b).digest())
# 8-bit truncation for the toy worked-example configs only; not collision resistant.
DEMO_TRUNC8 = 128
register_algorithm(DEMO_TRUNC8, "sha512-trunc8", 8, lambda b: hashlib.sha512(b).digest()[:1])


@dataclass(frozen=True)
class HashCode:
    digest: int
    digest_bits: int
    parts: int

    def __post_init__(self) -> None:
        if self.digest_bits % self.parts:
            raise ValueError(f"{self.parts} sub-codes do not divide a {self.digest_bits}-bit digest")

    @property
    def sub_width(self) -> int:
        return self.digest_bits // self.parts

    @property
    def sub_codes(self) -> tuple[int, ...]:
        w = self.sub_width
        mask = (1 << w) - 1
        return tuple((self.digest >> (w * (self.parts - 1 - t))) & mask for t in range(self.parts))

    @classmethod
    def from_sub_codes(cls, codes: Sequence[int], sub_width: int) -> HashCode:
        digest = 0
        for c in codes:
            digest = (digest << sub_width) | c
        return cls(digest, sub_width * len(codes), len(codes))


def hash_block(block: bytes, algorithm: int = DEFAULT_ALGORITHM, parts: int = 8,
               block_bits: int | None = 512) -> HashCode:
    alg = get_algorithm(algorithm)
    if block_bits is not None and len(block) != -(-block_bits // 8):
        raise ValueError(f"row block must be {block_bits} bits, got {len(block) * 8}")
    raw = alg.fn(bytes(block))
    if len(raw) * 8 < alg.digest_bits:
        raise ValueError(f"{alg.name} returned {len(raw) * 8} bits, expected {alg.digest_bits}")
    digest = int.from_bytes(raw, "big") >> (len(raw) * 8 - alg.digest_bits)
    return HashCode(digest, alg.digest_bits, parts)


@dataclass(frozen=True)
class MaskedHashRow:
    cells: tuple[int, ...]
    cell_width: int


def _cell_residues(residues: Sequence[int], count: int) -> list[int]:
    if not residues:
        raise ValueError("masking needs at least one control residue")
    return [residues[t % len(residues)] for t in range(count)]


def mask_row(code: HashCode, control_residues: Sequence[int], cell_width: int) -> MaskedHashRow:
    if cell_width < code.sub_width:
        raise CellOverflow(f"cell width {cell_width} narrower than {code.sub_width}-bit sub-codes")
    for c in control_residues:
        if c < 0 or c.bit_length() > cell_width:
            raise CellOverflow(f"residue {c} does not fit in {cell_width} bits")
    cells = tuple(s ^ c for s, c in zip(code.sub_codes, _cell_residues(control_residues, code.parts)))
    return MaskedHashRow(cells, cell_width)


def unmask_row(masked: MaskedHashRow, control_residues: Sequence[int], sub_width: int) -> HashCode:
    """Invert :func:`mask_row`.

    Raises :class:`TruncationLoss` when a cell keeps bits above ``sub_width``
    after the XOR, which means either the cell or the residues are wrong.
    """
    codes = []
    for t, (g, c) in enumerate(zip(masked.cells, _cell_residues(control_residues, len(masked.cells)))):
        s = g ^ c
        if s >> sub_width:
            raise TruncationLoss(f"cell {t} has bits above the {sub_width}-bit sub-code")
        codes.append(s)
    return HashCode.from_sub_codes(codes, sub_width)
