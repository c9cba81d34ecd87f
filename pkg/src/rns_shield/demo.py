"""Self-checking walkthrough of the six-base worked example.

Every printed value is compared with the published one; any mismatch makes
:func:`run_demo` return False.
"""

from __future__ import annotations

import sys
from typing import TextIO

from .rns import (
    DEMO_CONTROL,
    DEMO_INFO,
    correct_residue,
    crt_reconstruct,
    localize_residue_error,
    make_moduli_set,
    project_excluding,
    range_check,
    to_residues,
)

EXPECTED_BASES = (15015, 20020, 6006, 25740, 16380, 6930)


def run_demo(out: TextIO | None = None) -> bool:
    out = out or sys.stdout
    ok = True

    def check(label: str, got, want) -> None:
        nonlocal ok
        good = got == want
        ok &= good
        out.write(f"  [{'ok' if good else 'MISMATCH'}] {label}: {got}" + ("" if good else f" (expected {want})") + "\n")

    ms = make_moduli_set(DEMO_INFO, DEMO_CONTROL)
    out.write(f"Bases: information {DEMO_INFO}, control {DEMO_CONTROL}\n")
    check("working range P_4", ms.working_range, 210)
    check("full range P_6", ms.full_range, 30030)
    check("orthogonal bases B_1..B_6", ms.orthogonal_bases, EXPECTED_BASES)

    out.write("\nEncode A = 17\n")
    a = to_residues(17, ms)
    check("residues of 17", a.residues, (1, 2, 2, 3, 6, 4))

    out.write("\nResidue on p_5 = 11 corrupted 6 -> 1\n")
    bad = a.replace(4, 1)
    check("corrupted vector", bad.residues, (1, 2, 2, 3, 1, 4))
    value = crt_reconstruct(bad)
    check("reconstruction", value, 8207)
    verdict = range_check(bad)
    check("outside working range (> 210)", not verdict.in_range, True)
    loc = localize_residue_error(bad)
    check("localized base (1-based)", None if loc.index is None else loc.index + 1, 5)

    out.write("\nRecover on the remaining bases\n")
    check("projection without base 5", project_excluding(bad, 4), 17)
    fixed = correct_residue(bad, 4)
    check("recomputed residue |17| mod 11", fixed.residues[4], 6)
    check("restored codeword", fixed.residues, a.residues)

    out.write("\nall values reproduced\n" if ok else "\nMISMATCH: worked example not reproduced\n")
    return ok
