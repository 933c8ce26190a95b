"""Tests for the five-step shared buffer creation protocol."""
import numpy as np
import pytest

from src.models.columnar import DataType, Field, Schema
from src.models.errors import (
    InvalidFreeError, OutOfMemoryError, RpcTimeoutError, SchemaMismatchError, SealedObjectError,
)
from src.models.ledger import EventKind
from src.models.memory import CoherenceLevel, SegmentMap
from src.repositories.csm_handle import CsmHandle
from src.services.cluster_runtime import rt_spawn
from src.services.protocol import (
    CoherenceProtocol, ProtocolOptions, build_array, build_spanning_table, create_shared_buffer,
)
from src.repositories.column_reader import ColumnReader


SEGMENT = 128 * 1024
MAX_OBJECT = 64 * 1024


def _cluster(nodes, seed=None, level=CoherenceLevel.LC_CSM, adversary_steps=0):
    handle = CsmHandle(SegmentMap.uniform(nodes, SEGMENT), level=level, eviction_seed=seed,
                       auto_adversary_steps=adversary_steps)
    return rt_spawn(handle, schedule_seed=seed)


def _run_schedule(nodes: int, seed: int, level=CoherenceLevel.LC_CSM):
    """
    One seeded schedule: stale copies everywhere, then one buffer creation
    under an active adversary. Returns (payload, reads per node).
    """
    rng = np.random.default_rng(seed)
    cluster = _cluster(nodes, seed, level, adversary_steps=1)
    writer, owner = (int(x) for x in rng.integers(0, nodes, size=2))
    size = int(np.exp(rng.uniform(0, np.log(MAX_OBJECT))))
    size = max(1, min(size, MAX_OBJECT))
    payload = rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()

    # every node first caches the owner's (still zero) memory where the object will land
    base = cluster.segment_map.segment_of(owner).base
    for node in cluster.node_ids:
        if rng.random() < 0.7:
            cluster.csm.read(node, base, size)

    ref = CoherenceProtocol(cluster).create_shared_buffer(writer, owner, size, payload)
    cluster.csm.run_adversary(int(rng.integers(0, 20)))
    reads = {node: cluster.csm.read(node, ref.addr, size) for node in cluster.node_ids}
    return payload, reads


@pytest.mark.parametrize("nodes", [2, 3, 5])
def test_adversarial_schedules_match_oracle(nodes):
    failures = []
    for seed in range(340):
        payload, reads = _run_schedule(nodes, seed)
        bad = [node for node, data in reads.items() if data != payload]
        if bad:
            failures.append((seed, bad))
    assert failures == []


@pytest.mark.parametrize("seed", range(5))
def test_global_coherence_oracle_agrees(seed):
    payload, reads = _run_schedule(3, seed, CoherenceLevel.GC_CSM)
    assert all(data == payload for data in reads.values())


def _stale_read_setup(options):
    cluster = _cluster(3)
    cluster.csm.read(2, 0, 256)          # node 2 caches node 0's memory early
    protocol = CoherenceProtocol(cluster, options)
    ref = protocol.create_shared_buffer(1, 0, 256, b'\xaa' * 256)
    return cluster, ref


def test_skipping_pre_write_flush_gives_stale_read():
    cluster, ref = _stale_read_setup(ProtocolOptions(pre_write_flush=False))
    assert ref.addr == 0
    assert cluster.csm.read(2, ref.addr, 256) == bytes(256)


def test_pre_write_flush_prevents_stale_read():
    cluster, ref = _stale_read_setup(ProtocolOptions())
    assert cluster.csm.read(2, ref.addr, 256) == b'\xaa' * 256


def test_skipping_post_write_flush_loses_write():
    cluster = _cluster(3)
    protocol = CoherenceProtocol(cluster, ProtocolOptions(post_write_flush=False))
    ref = protocol.create_shared_buffer(1, 0, 300, b'\x55' * 300)
    assert cluster.csm.backing_peek(ref.addr, 300) == bytes(300)
    assert cluster.csm.read(0, ref.addr, 300) == bytes(300)
    assert cluster.csm.read(2, ref.addr, 300) == bytes(300)
    # the bytes only exist in the writer's cache
    assert cluster.csm.read(1, ref.addr, 300) == b'\x55' * 300


def test_phases_run_in_order(protocol, cluster):
    mark = cluster.ledger.mark()
    protocol.create_shared_buffer(1, 0, 1000, bytes(1000))
    phases = []
    for event in cluster.ledger.events_since(mark):
        if not phases or phases[-1] != event.phase:
            phases.append(event.phase)
    assert phases == ['allocation', 'clear', 'write', 'flush_if_remote', 'seal']


def test_writer_flush_is_bracketed_by_barriers(protocol, cluster):
    mark = cluster.ledger.mark()
    protocol.create_shared_buffer(2, 0, 512, bytes(512))
    ops = [e.op for e in cluster.ledger.events_since(mark)
           if e.phase == 'flush_if_remote' and e.node == 2]
    assert ops == [EventKind.BARRIER, EventKind.FLUSH, EventKind.BARRIER]


def test_local_writer_skips_post_write_flush(protocol, cluster):
    mark = cluster.ledger.mark()
    protocol.create_shared_buffer(0, 0, 512, bytes(512))
    assert not [e for e in cluster.ledger.events_since(mark) if e.phase == 'flush_if_remote']


def test_pre_write_flush_reaches_every_node(protocol, cluster):
    mark = cluster.ledger.mark()
    ref = protocol.create_shared_buffer(1, 0, 128, bytes(128))
    flushes = [e for e in cluster.ledger.events_since(mark)
               if e.phase == 'clear' and e.op is EventKind.FLUSH]
    assert sorted(e.node for e in flushes) == cluster.node_ids
    assert all(e.addr == ref.addr for e in flushes)


def test_sealed_range_rejects_writes(protocol, cluster):
    ref = protocol.create_shared_buffer(1, 0, 256, bytes(256))
    for node in cluster.node_ids:
        assert len(cluster.nodes[node].registry) == 1
        with pytest.raises(SealedObjectError):
            protocol.write(node, ref.addr + 10, b'x')
    with pytest.raises(SealedObjectError):
        protocol.write(0, ref.addr - 1, b'xy')


def test_sealed_allocation_cannot_be_freed(protocol, cluster):
    ref = protocol.create_shared_buffer(1, 0, 256, bytes(256))
    assert cluster.nodes[0].region_for(ref.addr).record_for(ref.addr).sealed
    with pytest.raises(InvalidFreeError):
        cluster.rpc_free(1, 0, ref.addr)


def test_reads_after_seal_need_no_flush(protocol, cluster):
    payload = bytes(range(256)) * 4
    ref = protocol.create_shared_buffer(2, 1, len(payload), payload)
    mark = cluster.ledger.mark()
    for _ in range(3):
        for node in cluster.node_ids:
            assert cluster.csm.read(node, ref.addr, len(payload)) == payload
    ops = {e.op for e in cluster.ledger.events_since(mark)}
    assert EventKind.FLUSH not in ops
    assert EventKind.MSG not in ops


def test_producer_chunks_and_length_check(protocol, cluster):
    ref = protocol.create_shared_buffer(1, 0, 4, [b'ab', b'cd'])
    assert cluster.csm.read(2, ref.addr, 4) == b'abcd'
    with pytest.raises(ValueError):
        protocol.create_shared_buffer(1, 0, 5, b'abcd')


def test_zero_producer_writes_zeros(protocol, cluster):
    ref = protocol.create_shared_buffer(1, 0, 64)
    assert cluster.csm.read(0, ref.addr, 64) == bytes(64)


def test_invalid_size_and_oom(protocol):
    with pytest.raises(ValueError):
        protocol.create_shared_buffer(0, 1, 0)
    with pytest.raises(OutOfMemoryError):
        protocol.create_shared_buffer(0, 1, 10 * 1024 * 1024)


def test_module_level_helpers(cluster):
    ref = create_shared_buffer(cluster, 1, 2, 8, b'12345678')
    assert cluster.csm.read(0, ref.addr, 8) == b'12345678'

    array = build_array(cluster, 0, 2, DataType.INT64, [3, None])
    assert ColumnReader(cluster.csm, 1).to_pylist(array) == [3, None]
    assert array.sealed

    schema = Schema.of(Field('k', DataType.UTF8))
    table = build_spanning_table(cluster, schema, [(0, [['a']]), (2, [['b', 'c']])])
    assert table.num_rows == 3
    assert ColumnReader(cluster.csm, 1).chunked_get(table.column('k'), 2) == 'c'


def test_spanning_table_chunks_live_on_their_nodes(protocol, cluster):
    schema = Schema.of(Field('x', DataType.INT64), Field('y', DataType.BOOL))
    table, payload = protocol.build_spanning_table(schema, {
        0: {'x': [1, 2], 'y': [True, False]},
        1: {'x': [3], 'y': [None]},
        2: {'x': [4, 5, 6], 'y': [True, True, False]},
    })
    owners = [cluster.csm.owner_of(chunk.data.addr) for chunk in table.column('x').chunks]
    assert owners == [0, 1, 2]
    for node in (1, 2):
        assert cluster.nodes[node].received_descriptors[-1] == payload
    assert table.is_sealed


def test_spanning_table_rejects_bad_partitions(protocol):
    schema = Schema.of(Field('x', DataType.INT64, nullable=False))
    with pytest.raises(SchemaMismatchError):
        protocol.build_spanning_table(schema, {})
    with pytest.raises(SchemaMismatchError):
        protocol.build_spanning_table(schema, {0: {'z': [1]}})
    with pytest.raises(SchemaMismatchError):
        protocol.build_spanning_table(schema, {0: {'x': [1, None]}})


def test_record_batch_requires_equal_lengths(protocol):
    schema = Schema.of(Field('a', DataType.INT64), Field('b', DataType.INT64))
    with pytest.raises(SchemaMismatchError):
        protocol.build_record_batch(0, 0, schema, {'a': [1, 2], 'b': [1]})


def test_failed_flush_releases_allocation(protocol, cluster):
    region = cluster.nodes[0].regions[0]
    cluster.isolate(2)
    with pytest.raises(RpcTimeoutError):
        protocol.create_shared_buffer(0, 0, 256)
    assert region.stats()['live'] == 0
    assert region.stats()['largest_free'] == region.size
    assert cluster._replies == {}

    cluster.heal(2)
    ref = protocol.create_shared_buffer(1, 0, 256, b'\x11' * 256)
    assert ref.addr == region.base
    assert cluster.csm.read(2, ref.addr, 256) == b'\x11' * 256


def test_failed_write_releases_allocation(protocol, cluster):
    region = cluster.nodes[0].regions[0]
    with pytest.raises(ValueError):
        protocol.create_shared_buffer(1, 0, 8, b'short')
    assert region.stats()['live'] == 0


def test_timed_out_flush_broadcast_leaves_no_replies(cluster):
    cluster.isolate(1)
    with pytest.raises(RpcTimeoutError):
        cluster.broadcast_flush(0, 0, 128)
    assert cluster._replies == {}
