"""Reference computations that share no code with rns_shield.

Used only by the tests; each one takes the slow, obvious route.
"""

from __future__ import annotations

import itertools
from functools import lru_cache


@lru_cache(maxsize=None)
def value_table(moduli: tuple[int, ...]) -> dict[tuple[int, ...], int]:
    """Every residue tuple of [0, prod) mapped back to its integer, by direct mod."""
    total = 1
    for p in moduli:
        total *= p
    return {tuple(x % p for p in moduli): x for x in range(total)}


def garner(residues, moduli) -> int:
    """Mixed-radix reconstruction, no orthogonal bases involved."""
    digits = []
    for i, (a, p) in enumerate(zip(residues, moduli)):
        x = a
        for j in range(i):
            x = (x - digits[j]) * pow(moduli[j], -1, p) % p
        digits.append(x)
    value, radix = 0, 1
    for d, p in zip(digits, moduli):
        value += d * radix
        radix *= p
    return value


def single_error_explanations(residues, moduli, working_range) -> set[int]:
    """Positions t such that changing only residue t yields a working-range codeword."""
    table = value_table(tuple(moduli))
    hits = set()
    for t, p in enumerate(moduli):
        for alt in range(p):
            if alt == residues[t]:
                continue
            cand = list(residues)
            cand[t] = alt
            if table[tuple(cand)] < working_range:
                hits.add(t)
    return hits


def corruptions(residues, moduli, positions):
    """Every way of changing exactly the residues at ``positions``."""
    choices = [[v for v in range(moduli[t]) if v != residues[t]] for t in positions]
    for values in itertools.product(*choices):
        out = list(residues)
        for t, v in zip(positions, values):
            out[t] = v
        yield tuple(out)
