import io
import random
import struct
import zlib

import pytest
from hypothesis import given, strategies as st

from rns_shield.container import (
    MAGIC,
    data_bytes_per_super_block,
    decode_header,
    decode_super_block,
    encode_header,
    encode_super_block,
    extract_data,
    read_volume,
    super_block_size,
    write_volume,
)
from rns_shield.errors import (
    BadMagic,
    ChecksumMismatch,
    ConfigInvalid,
    ContainerError,
    HeaderInvalid,
    Truncated,
    UnsupportedVersion,
)
from rns_shield.scheme import build_grid, demo_config, make_config, verify

from conftest import random_grid


def header_of(volume):
    return decode_header(io.BytesIO(volume))


def test_sizes(cfg, plain_cfg):
    assert data_bytes_per_super_block(cfg) == 512
    assert super_block_size(cfg) == 512 + 520
    assert super_block_size(plain_cfg) == 512 + 520 + 130


def test_empty_input(cfg):
    vol = write_volume(b"", cfg)
    h = header_of(vol)
    assert (h.original_length, h.super_block_count, h.size) == (0, 0, len(vol))
    reader = read_volume(vol)
    assert list(reader.super_blocks) == [] and reader.original_length == 0
    assert extract_data(vol) == b""


def test_exact_boundary_has_no_padding(cfg):
    data = random.Random(1).randbytes(512)
    vol = write_volume(data, cfg)
    h = header_of(vol)
    assert h.super_block_count == 1
    assert len(vol) == h.size + super_block_size(cfg)
    assert header_of(write_volume(data + b"x", cfg)).super_block_count == 2


def test_config_echoed_back(cfg, plain_cfg):
    for c in (cfg, plain_cfg, make_config(4, 1), make_config(16, 3)):
        assert read_volume(write_volume(b"abc", c)).config == c


def test_roundtrip_and_payloads(small_volume, cfg):
    data, vol = small_volume
    reader = read_volume(vol)
    blocks = list(reader.super_blocks)
    assert len(blocks) == 16
    assert all(verify(sb, cfg).clean for sb in blocks)
    assert extract_data(vol) == data


@given(st.binary(max_size=3000), st.sampled_from(["paired", "plain"]))
def test_roundtrip_property(data, mode):
    c = make_config(8, 2, mask_mode=mode)
    vol = write_volume(data, c)
    assert vol == write_volume(bytes(data), c)
    assert extract_data(io.BytesIO(vol)) == data


def test_super_block_codec(plain_cfg, rng):
    sb = build_grid(random_grid(rng, plain_cfg), plain_cfg)
    raw = encode_super_block(sb, plain_cfg)
    assert len(raw) == super_block_size(plain_cfg)
    assert decode_super_block(raw, plain_cfg) == sb
    with pytest.raises(Truncated):
        decode_super_block(raw[:-1], plain_cfg)


def test_toy_config_cannot_be_stored():
    with pytest.raises(ConfigInvalid):
        write_volume(b"x", demo_config())


def test_header_layout(cfg):
    hdr = encode_header(cfg, 5, 1)
    assert hdr[:4] == MAGIC and struct.unpack(">H", hdr[4:6]) == (1,)
    assert struct.unpack(">I", hdr[-4:])[0] == zlib.crc32(hdr[:-4])
    assert struct.unpack(">QQ", hdr[-20:-4]) == (5, 1)


def test_bad_magic(small_volume):
    vol = bytearray(small_volume[1])
    vol[0] ^= 0xFF
    with pytest.raises(BadMagic):
        read_volume(bytes(vol))


def test_unsupported_version(cfg):
    hdr = bytearray(encode_header(cfg, 0, 0))
    hdr[5] = 2
    with pytest.raises(UnsupportedVersion):
        read_volume(bytes(hdr))


def test_checksum_mismatch_before_payload(small_volume):
    vol = bytearray(small_volume[1])
    vol[12] ^= 1
    with pytest.raises(ChecksumMismatch):
        read_volume(bytes(vol))


def test_every_header_bit_flip_is_rejected(small_volume):
    vol = small_volume[1]
    size = header_of(vol).size
    for bit in range(size * 8):
        bad = bytearray(vol)
        bad[bit // 8] ^= 1 << (bit % 8)
        with pytest.raises(ContainerError):
            read_volume(bytes(bad))


def test_inconsistent_count_rejected(cfg):
    hdr = encode_header(cfg, 10_000, 1)
    with pytest.raises(HeaderInvalid):
        read_volume(hdr)


def test_truncated_names_first_missing_super_block(small_volume, cfg):
    vol = small_volume[1]
    h = header_of(vol)
    size = super_block_size(cfg)
    rng = random.Random(11)
    for cut in [h.size + 1, h.size + size, len(vol) - 1] + [rng.randrange(h.size, len(vol)) for _ in range(30)]:
        reader = read_volume(vol[:cut])
        with pytest.raises(Truncated) as exc:
            list(reader.super_blocks)
        assert exc.value.super_block == (cut - h.size) // size


def test_truncated_header(small_volume):
    for cut in range(0, header_of(small_volume[1]).size):
        with pytest.raises(Truncated):
            read_volume(small_volume[1][:cut])


def test_trailing_bytes_rejected(small_volume):
    reader = read_volume(small_volume[1] + b"\0")
    with pytest.raises(ContainerError):
        list(reader.super_blocks)


def test_lazy_iterator(small_volume):
    reader = read_volume(small_volume[1])
    assert len(reader.super_blocks) == 16
    first = next(reader.super_blocks)
    assert first.data[0][0] == int.from_bytes(small_volume[0][:8], "big")
