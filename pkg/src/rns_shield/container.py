"""On-disk container for protected volumes.

Layout (all integers big-endian)::

    magic            4s   b"RNSI"
    format_version   u16  1
    n, r             u16, u16
    sub_block_width  u16
    cell_width       u16
    hash_algorithm   u8
    mask_mode        u8   0 = paired, 1 = plain
    column count     u16  (= n)
      per column:    u16 modulus count k, then k x (u16 byte length, minimal big-endian bytes)
    original_length  u64  bytes of source data
    super_block_cnt  u64
    header_crc       u32  CRC-32 of every preceding header byte

followed by ``super_block_cnt`` payloads of identical size.  A payload is the
data grid (n*n cells of ``sub_block_width`` bits), then the masked-hash grid
(n*n cells of ``cell_width`` bits), then in plain mode the residue grid
(n*r cells of ``cell_width`` bits).  Each region is packed MSB-first in
row-major order and zero-padded to a whole byte.
"""

from __future__ import annotations

import functools
import io
import struct
import zlib
from dataclasses import dataclass
from typing import BinaryIO, Iterator, NamedTuple, Sequence

from .errors import (
    BadMagic,
    ChecksumMismatch,
    ConfigInvalid,
    ContainerError,
    HeaderInvalid,
    RnsShieldError,
    Truncated,
    UnsupportedVersion,
)
from .hashing import MaskedHashRow
from .rns import make_moduli_set
from .scheme import MaskMode, ProtectedSuperBlock, SchemeConfig, build_grid, bytes_to_row, row_to_bytes

MAGIC = b"RNSI"
FORMAT_VERSION = 1

_PREFIX = struct.Struct(">4sH")
_PARAMS = struct.Struct(">HHHHBBH")
_TRAILER = struct.Struct(">QQ")
_CRC = struct.Struct(">I")
_MAX_COUNT = 1 << 12

_MODE_CODES = {MaskMode.PAIRED: 0, MaskMode.PLAIN: 1}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


def _pack_cells(values: Sequence[int], width: int) -> bytes:
    acc = 0
    for v in values:
        acc = (acc << width) | v
    bits = len(values) * width
    pad = -bits % 8
    return (acc << pad).to_bytes((bits + pad) // 8, "big")


def _unpack_cells(raw: bytes, count: int, width: int) -> list[int]:
    bits = count * width
    acc = int.from_bytes(raw, "big") >> (-bits % 8)
    mask = (1 << width) - 1
    return [(acc >> (width * (count - 1 - t))) & mask for t in range(count)]


def _region_sizes(config: SchemeConfig) -> tuple[int, int, int]:
    n = config.n
    data = -(-n * n * config.sub_block_width // 8)
    masked = -(-n * n * config.cell_width // 8)
    residue = -(-n * config.r * config.cell_width // 8) if config.mask_mode is MaskMode.PLAIN else 0
    return data, masked, residue


def super_block_size(config: SchemeConfig) -> int:
    return sum(_region_sizes(config))


def data_bytes_per_super_block(config: SchemeConfig) -> int:
    return config.n * config.row_bytes


def encode_super_block(sb: ProtectedSuperBlock, config: SchemeConfig) -> bytes:
    out = _pack_cells([m for row in sb.data for m in row], config.sub_block_width)
    out += _pack_cells([g for row in sb.masked_hashes for g in row.cells], config.cell_width)
    if config.mask_mode is MaskMode.PLAIN:
        out += _pack_cells([c for col in sb.residues for c in col], config.cell_width)
    return out


def decode_super_block(raw: bytes, config: SchemeConfig) -> ProtectedSuperBlock:
    n, r = config.n, config.r
    d, g, _ = _region_sizes(config)
    if len(raw) != super_block_size(config):
        raise Truncated(f"super-block payload is {len(raw)} bytes, expected {super_block_size(config)}")
    data = _unpack_cells(raw[:d], n * n, config.sub_block_width)
    masked = _unpack_cells(raw[d:d + g], n * n, config.cell_width)
    residues = None
    if config.mask_mode is MaskMode.PLAIN:
        flat = _unpack_cells(raw[d + g:], n * r, config.cell_width)
        residues = tuple(tuple(flat[j * r:(j + 1) * r]) for j in range(n))
    return ProtectedSuperBlock(
        tuple(tuple(data[i * n:(i + 1) * n]) for i in range(n)),
        tuple(MaskedHashRow(tuple(masked[i * n:(i + 1) * n]), config.cell_width) for i in range(n)),
        residues,
    )


@functools.lru_cache(maxsize=256)
def _moduli_set(info: tuple[int, ...], control: tuple[int, ...]):
    return make_moduli_set(info, control)


# -- header ------------------------------------------------------------------

def _encode_int(value: int) -> bytes:
    raw = value.to_bytes(max(1, -(-value.bit_length() // 8)), "big")
    return struct.pack(">H", len(raw)) + raw


def encode_header(config: SchemeConfig, original_length: int, super_block_count: int) -> bytes:
    out = bytearray(_PREFIX.pack(MAGIC, FORMAT_VERSION))
    out += _PARAMS.pack(config.n, config.r, config.sub_block_width, config.cell_width,
                        config.hash_algorithm, _MODE_CODES[config.mask_mode], len(config.column_moduli))
    for ms in config.column_moduli:
        out += struct.pack(">H", ms.k)
        for p in ms.moduli:
            out += _encode_int(p)
    out += _TRAILER.pack(original_length, super_block_count)
    out += _CRC.pack(zlib.crc32(out))
    return bytes(out)


class _HeaderReader:
    def __init__(self, stream: BinaryIO):
        self.stream = stream
        self.seen = bytearray()

    def take(self, size: int) -> bytes:
        chunk = self.stream.read(size)
        if len(chunk) != size:
            raise Truncated("container header is truncated")
        self.seen += chunk
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


@dataclass(frozen=True)
class Header:
    config: SchemeConfig
    original_length: int
    super_block_count: int
    size: int


def decode_header(stream: BinaryIO) -> Header:
    rd = _HeaderReader(stream)
    magic, version = rd.unpack(_PREFIX)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"container format version {version} is not supported")
    n, r, w, cell, alg, mode, ncols = rd.unpack(_PARAMS)
    if ncols > _MAX_COUNT:
        raise HeaderInvalid(f"implausible column count {ncols}")
    columns = []
    for _ in range(ncols):
        (k,) = rd.unpack(struct.Struct(">H"))
        if k > _MAX_COUNT:
            raise HeaderInvalid(f"implausible modulus count {k}")
        moduli = []
        for _ in range(k):
            (length,) = rd.unpack(struct.Struct(">H"))
            moduli.append(int.from_bytes(rd.take(length), "big"))
        columns.append(moduli)
    original_length, count = rd.unpack(_TRAILER)
    expected = zlib.crc32(bytes(rd.seen))
    (stored,) = rd.unpack(_CRC)
    if stored != expected:
        raise ChecksumMismatch(f"header checksum {stored:08x} != computed {expected:08x}")

    if mode not in _CODE_MODES:
        raise HeaderInvalid(f"unknown mask mode {mode}")
    try:
        sets = tuple(_moduli_set(tuple(m[:n]), tuple(m[n:])) for m in columns)
        config = SchemeConfig(n, r, w, cell, sets, alg, _CODE_MODES[mode], n * w)
    except (RnsShieldError, ValueError) as exc:
        raise HeaderInvalid(f"header parameters are invalid: {exc}") from None
    if config.block_bits % 8:
        raise HeaderInvalid("row blocks must be whole bytes")
    if count != -(-original_length // data_bytes_per_super_block(config)):
        raise HeaderInvalid(f"{count} super-blocks cannot hold {original_length} bytes")
    return Header(config, original_length, count, len(rd.seen))


# -- volumes -----------------------------------------------------------------

def split_source(source: bytes, config: SchemeConfig) -> list[list[tuple[int, ...]]]:
    """Cut source bytes into zero-padded grids of sub-blocks."""
    if config.block_bits % 8:
        raise ConfigInvalid("containers need row blocks of whole bytes")
    per = data_bytes_per_super_block(config)
    rb = config.row_bytes
    grids = []
    for off in range(0, len(source), per):
        chunk = source[off:off + per].ljust(per, b"\0")
        grids.append([bytes_to_row(chunk[i * rb:(i + 1) * rb], config) for i in range(config.n)])
    return grids


def protect_grid(grid: Sequence[Sequence[int]], config: SchemeConfig) -> bytes:
    return encode_super_block(build_grid(grid, config), config)


def write_volume(source: bytes, config: SchemeConfig, map_fn=map) -> bytes:
    """Protect ``source`` into container bytes.

    ``map_fn`` lets the caller fan super-blocks out to a worker pool; it must
    preserve order.
    """
    grids = split_source(bytes(source), config)
    header = encode_header(config, len(source), len(grids))
    payloads = map_fn(protect_grid, grids, [config] * len(grids))
    return header + b"".join(payloads)


class SuperBlockIterator:
    """Lazy sequential reader of super-block payloads."""

    def __init__(self, stream: BinaryIO, header: Header):
        self._stream = stream
        self._header = header
        self._index = 0

    def __len__(self) -> int:
        return self._header.super_block_count

    def __iter__(self) -> Iterator[ProtectedSuperBlock]:
        return self

    def read_raw(self) -> bytes:
        cfg = self._header.config
        if self._index >= self._header.super_block_count:
            if self._stream.read(1):
                raise ContainerError("trailing bytes after the last super-block")
            raise StopIteration
        size = super_block_size(cfg)
        raw = self._stream.read(size)
        if len(raw) != size:
            raise Truncated(f"super-block {self._index} is missing or incomplete", self._index)
        self._index += 1
        return raw

    def __next__(self) -> ProtectedSuperBlock:
        return decode_super_block(self.read_raw(), self._header.config)


class VolumeReader(NamedTuple):
    config: SchemeConfig
    super_blocks: SuperBlockIterator
    original_length: int


def _as_stream(source: bytes | BinaryIO) -> BinaryIO:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source))
    return source


def read_volume(source: bytes | BinaryIO) -> VolumeReader:
    """Validate the header, then hand back a lazy super-block iterator."""
    stream = _as_stream(source)
    header = decode_header(stream)
    return VolumeReader(header.config, SuperBlockIterator(stream, header), header.original_length)


def assemble_volume(config: SchemeConfig, original_length: int,
                    super_blocks: Sequence[ProtectedSuperBlock]) -> bytes:
    header = encode_header(config, original_length, len(super_blocks))
    return header + b"".join(encode_super_block(sb, config) for sb in super_blocks)


def extract_data(source: bytes | BinaryIO) -> bytes:
    """Return the original source bytes held in a container (no verification)."""
    cfg, blocks, length = read_volume(source)
    out = bytearray()
    for sb in blocks:
        for row in sb.data:
            out += row_to_bytes(row, cfg)
    return bytes(out[:length])
