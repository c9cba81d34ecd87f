import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from rns_shield.errors import CellOverflow, TruncationLoss, UnknownAlgorithm
from rns_shield.hashing import (
    BLAKE2B_512,
    SHA3_512,
    SHA512,
    HashCode,
    MaskedHashRow,
    get_algorithm,
    hash_block,
    mask_row,
    register_algorithm,
    unmask_row,
)

# digests computed with openssl, not hashlib
SHA512_ABC = int(
    "ddaf35a193617abacc417349ae20413112e6fa4e89a97ea20a9eeee64b55d39a"
    "2192992a274fc1a836ba3c23a3feebbd454d4423643ce80e2a9ac94fa54ca49f", 16)
SHA512_ZERO64 = int(
    "7be9fda48f4179e611c698a73cff09faf72869431efee6eaad14de0cb44bbf66"
    "503f752b7a8eb17083355f3ce6eb7d2806f236b25af96a24e22b887405c20081", 16)
SHA3_ZERO64 = int(
    "243d92f5a1328a4cc9f4cb6da60ee6f7b362472f7ad4fc117e3646c85061574c"
    "12e110bdfcd98d90f0d19b6bff5b44a7c69da1975c3a8522095eb9217e553c28", 16)


def test_golden_vectors():
    assert hash_block(b"abc", SHA512, block_bits=None).digest == SHA512_ABC
    assert hash_block(bytes(64)).digest == SHA512_ZERO64
    assert hash_block(bytes(64), SHA3_512).digest == SHA3_ZERO64


def test_sub_codes_split_big_endian():
    code = hash_block(bytes(64), parts=8)
    assert code.sub_width == 64
    assert code.sub_codes[0] == 0x7be9fda48f4179e6
    assert code.sub_codes[-1] == 0xe22b887405c20081
    assert HashCode.from_sub_codes(code.sub_codes, 64) == code


@pytest.mark.parametrize("parts", [1, 2, 4, 8, 16])
def test_sub_codes_reassemble(parts):
    code = hash_block(b"x" * 64, BLAKE2B_512, parts)
    assert code.digest == int.from_bytes(hashlib.blake2b(b"x" * 64).digest(), "big")
    assert HashCode.from_sub_codes(code.sub_codes, code.sub_width).digest == code.digest


def test_block_size_enforced():
    with pytest.raises(ValueError):
        hash_block(bytes(63))


def test_parts_must_divide():
    with pytest.raises(ValueError):
        hash_block(bytes(64), parts=7)


def test_unknown_algorithm():
    with pytest.raises(UnknownAlgorithm):
        hash_block(bytes(64), 99)
    with pytest.raises(KeyError):
        get_algorithm(99)


def test_registry_refuses_silent_replacement():
    with pytest.raises(ValueError):
        register_algorithm(SHA512, "other", 512, lambda b: b)


def test_one_bit_changes_digest():
    rng = random.Random(5)
    for _ in range(10_000):
        block = bytearray(rng.randbytes(64))
        a = hash_block(bytes(block)).digest
        bit = rng.randrange(512)
        block[bit // 8] ^= 1 << (bit % 8)
        assert hash_block(bytes(block)).digest != a


@given(st.binary(min_size=64, max_size=64))
def test_deterministic(block):
    assert hash_block(block) == hash_block(bytes(block))


@given(st.binary(min_size=64, max_size=64),
       st.lists(st.integers(0, (1 << 65) - 1), min_size=1, max_size=8))
def test_mask_unmask_involution(block, residues):
    code = hash_block(block)
    masked = mask_row(code, residues, 65)
    assert len(masked.cells) == 8
    assert all(m.bit_length() <= 65 for m in masked.cells)
    if all(c < 1 << 64 for c in residues):
        assert unmask_row(masked, residues, 64) == code


def test_cyclic_cell_assignment():
    code = HashCode.from_sub_codes([0] * 8, 64)
    masked = mask_row(code, [5, 9], 65)
    assert masked.cells == (5, 9) * 4


def test_cell_overflow():
    code = hash_block(bytes(64))
    with pytest.raises(CellOverflow):
        mask_row(code, [1 << 65], 65)
    with pytest.raises(CellOverflow):
        mask_row(code, [1], 63)


def test_truncation_loss():
    code = hash_block(bytes(64))
    # residue with bit 64 set leaves a 65-bit cell after a wrong unmask
    masked = mask_row(code, [(1 << 64) + 3, 2], 65)
    with pytest.raises(TruncationLoss):
        unmask_row(masked, [0, 2], 64)
    # wrong residue below the sub-code width just yields a different code
    assert unmask_row(MaskedHashRow(masked.cells, 65), [(1 << 64) + 4, 2], 64) != code
