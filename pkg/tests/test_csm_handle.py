"""Tests for the cluster shared memory simulator."""
import numpy as np
import pytest

from src.config.cost_model import CostModel
from src.models.errors import AddressRangeError, AdversaryNotArmedError
from src.models.ledger import EventKind
from src.models.memory import CoherenceLevel, SegmentMap
from src.repositories.csm_handle import CsmHandle, csm_create

from conftest import LINE


SEG = 64 * 1024


def test_fresh_memory_reads_zeros(csm):
    assert csm.read(0, 0, 256) == bytes(256)
    assert csm.read(2, SEG + 10, 5) == bytes(5)


def test_local_read_charges_local_fill(csm):
    csm.read(0, 0, LINE)
    event = csm.ledger.trace[-1]
    assert event.op is EventKind.READ
    assert event.local_lines == 1
    assert event.remote_lines == 0
    assert event.cost_ns == pytest.approx(2.5)


def test_remote_read_charges_round_trip_once(csm):
    csm.read(1, 0, 4 * LINE)
    event = csm.ledger.trace[-1]
    assert event.remote_lines == 4
    assert event.round_trips == 1
    assert event.cost_ns == pytest.approx(4 * 21.4577 + 650.0)
    assert csm.ledger.counters[1].lines_fetched_remote == 4


def test_second_read_hits_cache(csm):
    csm.read(1, 0, LINE)
    mark = csm.ledger.mark()
    csm.read(1, 0, LINE)
    assert csm.ledger.time_since(mark) == 0.0


def test_remote_write_invisible_until_flush(csm):
    csm.read(0, 0, LINE)            # owner caches zeros
    csm.read(2, 0, LINE)            # third node caches zeros
    csm.write(1, 0, b'hello')

    assert csm.read(0, 0, 5) == bytes(5)
    assert csm.backing_peek(0, 5) == bytes(5)

    csm.flush_range(1, 0, LINE)

    assert csm.backing_peek(0, 5) == b'hello'
    # the write-back went through the owner, dropping its copy
    assert csm.read(0, 0, 5) == b'hello'
    # nobody invalidates the third node
    assert csm.read(2, 0, 5) == bytes(5)
    csm.flush_range(2, 0, LINE)
    assert csm.read(2, 0, 5) == b'hello'


def test_owner_cache_is_snooped_under_local_coherence(csm):
    csm.write(0, 0, b'abc')
    assert csm.read(1, 0, 3) == b'abc'
    snoops = [e for e in csm.ledger.trace if e.op is EventKind.SNOOP]
    assert len(snoops) == 1
    assert snoops[0].snooped_lines == 1
    assert csm.ledger.counters[1].owner_snoops == 1


def test_owner_cache_not_snooped_without_coherence(segment_map):
    handle = CsmHandle(segment_map, level=CoherenceLevel.NC_CSM)
    handle.write(0, 0, b'abc')
    assert handle.read(1, 0, 3) == bytes(3)


def test_global_coherence_writes_through(segment_map):
    handle = CsmHandle(segment_map, level=CoherenceLevel.GC_CSM)
    handle.read(0, 0, LINE)
    handle.read(2, 0, LINE)
    handle.write(1, 0, b'xyz')
    assert handle.backing_peek(0, 3) == b'xyz'
    assert handle.read(0, 0, 3) == b'xyz'
    assert handle.read(2, 0, 3) == b'xyz'


def test_write_spanning_lines(csm):
    payload = bytes(range(200)) * 2
    csm.write(0, 100, payload)
    assert csm.read(0, 100, len(payload)) == payload
    assert csm.read(0, 99, 1) == b'\x00'


def test_flush_range_counts(csm):
    csm.read(1, 0, 3 * LINE)
    assert csm.flush_range(1, 0, 3 * LINE) == 3
    assert csm.flush_range(1, 0, 3 * LINE) == 0
    event = csm.ledger.trace[-1]
    assert event.op is EventKind.FLUSH
    assert event.cached_lines == 0
    assert event.remote_lines == 3


def test_flush_of_owned_range_has_no_remote_lines(csm):
    csm.write(0, 0, b'x' * 300)
    csm.flush_range(0, 0, 300)
    event = csm.ledger.trace[-1]
    assert event.remote_lines == 0
    assert event.cached_lines == 3
    assert event.dirty_lines == 3
    assert event.cost_ns == pytest.approx(3 * 1.4)


def test_flush_charges_uncached_remote_lines(csm):
    cost = CostModel()
    assert csm.flush_range(1, 0, 4 * LINE) == 0
    event = csm.ledger.trace[-1]
    assert event.cached_lines == 0
    assert event.remote_lines == 4
    assert event.cost_ns == pytest.approx(4 * cost.flush_remote_line)

    csm.read(1, 0, LINE)
    csm.flush_range(1, 0, 4 * LINE)
    event = csm.ledger.trace[-1]
    assert event.cached_lines == 1
    assert event.cost_ns == pytest.approx(cost.flush_local_line + 4 * cost.flush_remote_line)


def test_out_of_range_access_raises(csm):
    with pytest.raises(AddressRangeError):
        csm.read(0, 3 * SEG - 4, 8)
    with pytest.raises(AddressRangeError):
        csm.write(0, -1, b'x')


def test_gap_between_segments_is_unowned():
    handle = CsmHandle(SegmentMap.uniform(2, 1024, gap_bytes=1024))
    with pytest.raises(AddressRangeError):
        handle.read(0, 1024, 1)
    assert handle.read(0, 2048, 4) == bytes(4)
    assert handle.owner_of(2048) == 1


def test_unknown_node_raises(csm):
    with pytest.raises(KeyError):
        csm.read(7, 0, 1)


def test_gather_charges_each_line_once(csm):
    csm.write(0, 0, np.arange(64, dtype='<u8'))
    csm.flush_range(0, 0, 512)
    mark = csm.ledger.mark()
    addrs = np.arange(0, 512, 8)
    out = csm.gather(1, addrs, 8)
    assert out.shape == (64, 8)
    assert out.reshape(-1).view('<u8').tolist() == list(range(64))
    events = csm.ledger.events_since(mark)
    assert len(events) == 1
    assert events[0].detail == 'gather'
    assert events[0].remote_lines == 4


def test_gather_rejects_straddling_elements(csm):
    with pytest.raises(ValueError):
        csm.gather(0, np.array([124]), 8)


def test_capacity_evicts_least_recently_used(segment_map):
    handle = CsmHandle(segment_map, cache_capacity=2)
    for line in range(3):
        handle.write(0, line * LINE, bytes([line + 1]) * 4)
    assert len(handle.caches[0]) == 2
    assert handle.cache_peek(0, 0) is None
    assert handle.backing_peek(0, 4) == b'\x01' * 4
    evictions = [e for e in handle.ledger.trace if e.op is EventKind.EVICT]
    assert evictions[0].detail == 'capacity'


def test_cache_peek_reports_dirty(csm):
    csm.write(1, 0, b'z')
    line = csm.cache_peek(1, 0)
    assert line.dirty
    assert line.data[:1] == b'z'
    assert csm.cache_peek(0, 0) is None


def test_cache_iterates_cached_line_addresses(csm):
    csm.read(1, LINE, 2 * LINE)
    assert list(csm.caches[1]) == [LINE, 2 * LINE]
    assert all(csm.cache_peek(1, addr) is not None for addr in csm.caches[1])


def test_adversary_requires_seed(csm):
    assert not csm.armed
    with pytest.raises(AdversaryNotArmedError):
        csm.step_adversary()


def test_barrier_lands_pending_writebacks(segment_map):
    handle = CsmHandle(segment_map, eviction_seed=3)
    handle.write(1, 0, bytes(range(256)) * 32)
    pending_node = None
    for _ in range(500):
        handle.step_adversary()
        if handle.pending_writebacks(1):
            pending_node = 1
            break
    assert pending_node == 1
    handle.barrier(1)
    assert handle.pending_writebacks(1) == []


@pytest.mark.parametrize("seed", range(20))
def test_adversary_never_loses_flushed_data(segment_map, seed):
    handle = CsmHandle(segment_map, eviction_seed=seed, auto_adversary_steps=2)
    rng = np.random.default_rng(seed)
    payload = rng.integers(0, 256, size=3000, dtype=np.uint8)
    addr = SEG + 256
    handle.write(2, addr, payload)
    handle.run_adversary(50)
    handle.barrier(2)
    handle.flush_range(2, addr, payload.size)
    handle.barrier(2)
    assert handle.backing_peek(addr, payload.size) == payload.tobytes()
    handle.flush_range(0, addr, payload.size)
    assert handle.read(0, addr, payload.size) == payload.tobytes()


def _workload(handle: CsmHandle) -> None:
    handle.write(0, 0, b'a' * 500)
    handle.read(1, 0, 500)
    handle.write(1, SEG, b'b' * 300)
    handle.flush_range(1, SEG, 300)
    handle.read(2, SEG, 300)
    handle.run_adversary(40)


def test_adversary_is_deterministic(segment_map):
    first = CsmHandle(segment_map, eviction_seed=11)
    second = CsmHandle(segment_map, eviction_seed=11)
    _workload(first)
    _workload(second)
    assert first.state_digest() == second.state_digest()
    assert [e.to_record() for e in first.ledger.trace] == [e.to_record() for e in second.ledger.trace]


def test_replay_reproduces_simulated_time(segment_map):
    handle = CsmHandle(segment_map, eviction_seed=5)
    _workload(handle)
    assert handle.ledger.replay() == pytest.approx(handle.ledger.simulated_time_ns, rel=1e-12)
    slower = CostModel(remote_line_transfer=100.0)
    assert handle.ledger.replay(slower) > handle.ledger.simulated_time_ns


def test_cost_only_mode_matches_charges(segment_map):
    tracked = CsmHandle(segment_map)
    cost_only = CsmHandle(segment_map, track_data=False)
    for handle in (tracked, cost_only):
        handle.write(1, 0, np.ones(4096, dtype=np.uint8))
        handle.flush_range(1, 0, 4096)
        handle.read(2, 0, 4096)
    assert cost_only.ledger.simulated_time_ns == pytest.approx(tracked.ledger.simulated_time_ns)
    assert cost_only.read(2, 0, 4) == bytes(4)
    assert cost_only.backing is None


def test_trace_export_jsonl(csm, tmp_path):
    csm.read(1, 0, LINE)
    path = csm.ledger.export_jsonl(tmp_path / 'trace.jsonl')
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1
    assert '"op":"read"' in lines[0]


def test_csm_create_matches_constructor(segment_map):
    handle = csm_create(segment_map, eviction_seed=1)
    assert handle.armed
    assert handle.level is CoherenceLevel.LC_CSM
