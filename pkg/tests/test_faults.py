import json

import pytest

from rns_shield.container import read_volume, write_volume
from rns_shield.errors import RegionEmpty
from rns_shield.faults import (
    FaultKind,
    FaultScenario,
    Outcome,
    Placement,
    Target,
    inject,
    run_campaign,
    shipped_scenarios,
)


def bit_diff(a, b):
    return sum(bin(x ^ y).count("1") for x, y in zip(a, b))


def test_inject_deterministic(small_volume):
    vol = small_volume[1]
    sc = FaultScenario(7, FaultKind.CELL_RANDOMIZE, Target.DATA, 2, 0.5)
    assert inject(vol, sc, 3) == inject(vol, sc, 3)
    assert inject(vol, sc, 3)[0] != inject(vol, sc, 4)[0]


def test_zero_faults_is_identity(small_volume):
    vol = small_volume[1]
    for sc in (FaultScenario(1, FaultKind.BIT_FLIP, Target.DATA, 0),
               FaultScenario(1, FaultKind.BIT_FLIP, Target.DATA, 1, 0.0)):
        out, log = inject(vol, sc)
        assert out == vol and log == []


@pytest.mark.parametrize("target", [Target.DATA, Target.MASKED_HASH, Target.HEADER])
def test_bit_flip_changes_exactly_one_bit(small_volume, target):
    vol = small_volume[1]
    for trial in range(20):
        out, log = inject(vol, FaultScenario(5, FaultKind.BIT_FLIP, target, 1, 1 / 16), trial)
        assert len(log) == 1 and len(out) == len(vol)
        assert bit_diff(out, vol) == 1
        assert bin(log[0].before ^ log[0].after).count("1") == 1


def test_fraction_uses_ceiling(small_volume):
    vol = small_volume[1]
    _, log = inject(vol, FaultScenario(5, FaultKind.CELL_RANDOMIZE, Target.DATA, 1, 0.1))
    assert len({f.super_block for f in log}) == 2  # ceil(0.1 * 16)


def test_placements(small_volume):
    vol = small_volume[1]
    for trial in range(30):
        _, log = inject(vol, FaultScenario(2, FaultKind.CELL_RANDOMIZE, Target.DATA, 3, 0.25,
                                           placement=Placement.OFF_DIAGONAL), trial)
        assert all(f.row != f.col for f in log)
        _, log = inject(vol, FaultScenario(2, FaultKind.CELL_RANDOMIZE, Target.DATA, 2, 1 / 16,
                                           placement=Placement.SAME_COLUMN), trial)
        assert len({f.col for f in log}) == 1 and len({f.row for f in log}) == 2
        assert all(f.row != f.col for f in log)


def test_burst_is_contiguous(small_volume):
    _, log = inject(small_volume[1], FaultScenario(4, FaultKind.BURST, Target.DATA, 1, 1 / 16, burst_length=5))
    flat = [f.row * 8 + f.col for f in log]
    assert flat == list(range(flat[0], flat[0] + 5))


def test_log_matches_volume(small_volume):
    vol = small_volume[1]
    out, log = inject(vol, FaultScenario(8, FaultKind.CELL_RANDOMIZE, Target.DATA, 3, 0.5))
    blocks = list(read_volume(out).super_blocks)
    for f in log:
        assert blocks[f.super_block].data[f.row][f.col] == f.after


def test_residue_target_needs_plain_mode(small_volume, plain_cfg):
    with pytest.raises(RegionEmpty):
        inject(small_volume[1], FaultScenario(1, FaultKind.BIT_FLIP, Target.RESIDUE))
    vol = write_volume(bytes(2048), plain_cfg)
    out, log = inject(vol, FaultScenario(1, FaultKind.BIT_FLIP, Target.RESIDUE))
    assert log and all(f.col < 2 for f in log)
    rep = run_campaign(vol, FaultScenario(1, FaultKind.BIT_FLIP, Target.RESIDUE, 1, 0.5), 30)
    assert rep.repaired == 30 and rep.localized_correctly == 30


def test_scenario_validation():
    with pytest.raises(ValueError):
        FaultScenario(1, FaultKind.BIT_FLIP, Target.DATA, super_block_fraction=1.5)
    with pytest.raises(ValueError):
        FaultScenario(1, "nonsense", Target.DATA)
    assert FaultScenario(1, "bit-flip", "data").fault_kind is FaultKind.BIT_FLIP


def test_offdiag_campaign(small_volume):
    sc = FaultScenario(3, FaultKind.BIT_FLIP, Target.DATA, 1, 0.25, placement=Placement.OFF_DIAGONAL)
    rep = run_campaign(small_volume[1], sc, 60)
    assert (rep.trials, rep.repaired, rep.localized_correctly, rep.silent_failures) == (60, 60, 60, 0)
    assert rep.k_red == 0.25 and rep.baseline_k_red == 1.0


def test_campaign_deterministic(small_volume):
    sc = shipped_scenarios()[5]
    a = run_campaign(small_volume[1], sc, 25)
    b = run_campaign(small_volume[1], sc, 25)
    assert a.counters() == b.counters()
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]


def test_two_in_column_detected_never_repaired(small_volume):
    sc = next(s for s in shipped_scenarios() if s.name == "data-two-in-column")
    rep = run_campaign(small_volume[1], sc, 40)
    assert rep.detected == 40 and rep.repaired == 0 and rep.silent_failures == 0


def test_header_faults_detected(small_volume):
    for sc in shipped_scenarios()[-3:]:
        rep = run_campaign(small_volume[1], sc, 40)
        assert rep.detected == 40 and rep.silent_failures == 0


def test_shipped_scenarios_cover_regions_and_kinds():
    scs = shipped_scenarios()
    assert len({s.name for s in scs}) == len(scs)
    assert {s.target_region for s in scs} == {Target.DATA, Target.MASKED_HASH, Target.HEADER}
    assert {s.fault_kind for s in scs} == set(FaultKind)


def test_report_formats(small_volume):
    rep = run_campaign(small_volume[1], shipped_scenarios()[0], 5)
    lines = [json.loads(x) for x in rep.to_jsonl().splitlines()]
    assert [x["type"] for x in lines] == ["trial"] * 5 + ["summary"]
    assert lines[-1]["silent_failures"] == 0 and lines[-1]["prng"].startswith("MT19937")
    assert all(x["outcome"] in {o.value for o in Outcome} for x in lines[:-1])
    assert "silent failures" in rep.to_table()


def test_dirty_volume_rejected(small_volume):
    out, _ = inject(small_volume[1], FaultScenario(1, FaultKind.BIT_FLIP, Target.DATA))
    with pytest.raises(ValueError):
        run_campaign(out, shipped_scenarios()[0], 1)


def test_parallel_map_matches_serial(small_volume):
    from concurrent.futures import ThreadPoolExecutor
    sc = shipped_scenarios()[2]
    serial = run_campaign(small_volume[1], sc, 20)
    with ThreadPoolExecutor(4) as ex:
        par = run_campaign(small_volume[1], sc, 20, map_fn=ex.map)
    assert serial.counters() == par.counters()
