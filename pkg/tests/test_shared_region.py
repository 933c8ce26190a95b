"""Tests for the owner-side first-fit allocator."""
import json

import numpy as np
import pytest

from src.models.errors import InvalidFreeError, OutOfMemoryError, RegionError, SealedObjectError
from src.models.ledger import CostLedger, EventKind
from src.config.cost_model import CostModel
from src.models.memory import SegmentMap
from src.repositories.shared_region import Region, region_create
from src.utils.validators import DescriptorValidator


def test_first_fit_and_line_rounding():
    region = Region(owner=0, base=0, size=4096)
    a = region.alloc(100)
    b = region.alloc(1)
    c = region.alloc(129)
    assert (a, b, c) == (0, 128, 256)
    assert region.record_for(c).reserved == 256
    assert region.free_bytes() == 4096 - 512
    assert [r.addr for r in region.live_records()] == [0, 128, 256]
    assert [r.requested for r in region.live_records()] == [100, 1, 129]


def test_freed_hole_is_reused_first():
    region = Region(0, 1024, 2048)
    a = region.alloc(128)
    region.alloc(128)
    region.free(a)
    assert region.alloc(64) == a


def test_coalescing_restores_single_span():
    region = Region(0, 0, 1024)
    addrs = [region.alloc(128) for _ in range(8)]
    for addr in (addrs[1], addrs[3], addrs[2], addrs[0], addrs[7], addrs[5], addrs[6], addrs[4]):
        region.free(addr)
    assert region.free_list == [(0, 1024)]
    assert region.stats() == {'size': 1024, 'live': 0, 'free_spans': 1, 'largest_free': 1024}


def test_out_of_memory():
    region = Region(0, 0, 512)
    region.alloc(256)
    with pytest.raises(OutOfMemoryError):
        region.alloc(257)
    assert region.alloc(256) == 256


def test_fragmentation_blocks_large_request():
    region = Region(0, 0, 512)
    addrs = [region.alloc(128) for _ in range(4)]
    region.free(addrs[0])
    region.free(addrs[2])
    assert region.free_bytes() == 256
    with pytest.raises(OutOfMemoryError):
        region.alloc(256)


@pytest.mark.parametrize("size", [0, -5])
def test_non_positive_size_rejected(size):
    with pytest.raises(ValueError):
        Region(0, 0, 512).alloc(size)


def test_invalid_and_double_free():
    region = Region(0, 0, 512)
    addr = region.alloc(10)
    with pytest.raises(InvalidFreeError):
        region.free(addr + 128)
    region.free(addr)
    with pytest.raises(InvalidFreeError):
        region.free(addr)


def test_sealed_allocation_cannot_be_freed():
    region = Region(0, 0, 512)
    addr = region.alloc(10)
    region.seal(addr)
    assert region.record_for(addr).sealed
    with pytest.raises(SealedObjectError):
        region.free(addr)


@pytest.mark.parametrize("base,size", [(0, 0), (64, 512), (0, 100)])
def test_bad_region_geometry(base, size):
    with pytest.raises(RegionError):
        Region(0, base, size)


def test_region_must_lie_in_owner_segment():
    segments = SegmentMap.uniform(2, 1024)
    Region(1, 1024, 1024, segments)
    with pytest.raises(RegionError):
        Region(0, 512, 1024, segments)
    with pytest.raises(RegionError):
        Region(5, 0, 128, segments)


def test_alloc_and_free_are_recorded_against_owner():
    ledger = CostLedger(CostModel(), [0, 1])
    region = region_create(1, 0, 1024, ledger=ledger)
    addr = region.alloc(5)
    region.free(addr)
    assert [(e.op, e.node, e.length) for e in ledger.trace] == [
        (EventKind.ALLOC, 1, 128), (EventKind.FREE, 1, 128)]
    assert ledger.simulated_time_ns == pytest.approx(CostModel().alloc_overhead)


def test_stats_json_round_trips():
    region = Region(0, 0, 1024)
    region.alloc(300)
    assert json.loads(region.stats_json())['live'] == 1


def _random_ops(seed: int, ops: int):
    """Run a seeded alloc/free mix; returns the region and the address sequence."""
    rng = np.random.default_rng(seed)
    region = Region(0, 128 * 1024, 1 << 20)
    live = []
    sequence = []
    for _ in range(ops):
        if live and rng.random() < 0.45:
            addr = live.pop(int(rng.integers(len(live))))
            region.free(addr)
        else:
            try:
                addr = region.alloc(int(rng.integers(1, 4096)))
            except OutOfMemoryError:
                sequence.append(-1)
                continue
            live.append(addr)
            sequence.append(addr)
    return region, sequence


def test_random_sequence_keeps_invariants():
    rng = np.random.default_rng(1234)
    region = Region(0, 0, 1 << 20)
    live = []
    for step in range(100_000):
        if live and rng.random() < 0.5:
            region.free(live.pop(int(rng.integers(len(live)))))
        else:
            try:
                live.append(region.alloc(int(rng.integers(1, 8192))))
            except OutOfMemoryError:
                pass
        if step % 5000 == 0:
            report = DescriptorValidator.region_report(region)
            assert report['conserved'] and report['covered']
            assert not report['overlaps'] and not report['misaligned']

    report = DescriptorValidator.region_report(region)
    assert report['conserved'] and report['covered']
    assert report['overlaps'] == 0 and report['misaligned'] == 0
    assert all(addr % 128 == 0 for addr in region.allocations)


def test_first_fit_is_deterministic_on_replay():
    _, first = _random_ops(77, 5000)
    _, second = _random_ops(77, 5000)
    assert first == second
