"""Tests for the data-free descriptor codec."""
import numpy as np
import pytest

from src.models.columnar import (
    ArrayDescriptor, BufferRef, ChunkedColumn, DataType, Field, RecordBatchDescriptor, Schema,
    TableDescriptor,
)
from src.models.errors import DescriptorFormatError, UnsealedArrayError
from src.models.ledger import EventKind
from src.repositories.column_reader import ColumnReader
from src.services.descriptor_ipc import (
    descriptor_wire_size, deserialize_descriptor, max_descriptor_size, serialize_descriptor,
)

from conftest import read_fixture


def _uint64_batch() -> RecordBatchDescriptor:
    array = ArrayDescriptor(DataType.UINT64, 3, 0, BufferRef(0x80, 24), sealed=True)
    return RecordBatchDescriptor(Schema.of(Field('a', DataType.UINT64)), 3, (array,))


def _utf8_table() -> TableDescriptor:
    array = ArrayDescriptor(DataType.UTF8, 2, 1, data=BufferRef(0x200, 3),
                            validity=BufferRef(0x100, 1), offsets=BufferRef(0x180, 12), sealed=True)
    schema = Schema.of(Field('s', DataType.UTF8))
    return TableDescriptor(schema, (ChunkedColumn(DataType.UTF8, (array,)),), 2)


def test_single_column_batch_is_55_bytes():
    encoded = serialize_descriptor(_uint64_batch())
    assert len(encoded) == 55
    assert descriptor_wire_size(_uint64_batch()) == 55


@pytest.mark.parametrize("fixture,factory", [
    ('batch_uint64.hex', _uint64_batch),
    ('table_utf8.hex', _utf8_table),
])
def test_golden_fixtures(fixture, factory):
    golden = read_fixture(fixture)
    assert serialize_descriptor(factory()) == golden
    decoded = deserialize_descriptor(golden)
    assert decoded == factory()
    assert all(array.sealed and not array.trusted for array in decoded.arrays())


def _random_array(rng: np.random.Generator, dtype: DataType, length: int) -> ArrayDescriptor:
    def ref(min_len: int) -> BufferRef:
        return BufferRef(int(rng.integers(0, 1 << 40)) * 128, min_len + int(rng.integers(0, 64)))

    null_count = int(rng.integers(0, length + 1)) if length and rng.random() < 0.5 else 0
    validity = ref((length + 7) // 8) if null_count else None
    offsets = ref(4 * (length + 1)) if dtype is DataType.UTF8 else None
    data = ref(0 if dtype is DataType.UTF8 else dtype.data_bytes(length))
    return ArrayDescriptor(dtype, length, null_count, data, validity, offsets, sealed=True)


def _random_descriptor(rng: np.random.Generator):
    dtypes = list(DataType)
    n_fields = int(rng.integers(1, 6))
    schema = Schema(tuple(
        Field(f"col{i}_" + 'x' * int(rng.integers(0, 12)), dtypes[int(rng.integers(len(dtypes)))],
              bool(rng.integers(2)))
        for i in range(n_fields)))
    if rng.random() < 0.5:
        rows = int(rng.integers(0, 10_000))
        return RecordBatchDescriptor(schema, rows, tuple(_random_array(rng, f.dtype, rows) for f in schema))

    rows = int(rng.integers(0, 10_000))
    columns = []
    for f in schema:
        cuts = np.sort(rng.integers(0, rows + 1, size=int(rng.integers(0, 4))))
        bounds = [0, *cuts.tolist(), rows]
        columns.append(ChunkedColumn(f.dtype, tuple(
            _random_array(rng, f.dtype, hi - lo) for lo, hi in zip(bounds, bounds[1:]))))
    return TableDescriptor(schema, tuple(columns), rows)


def test_fuzzed_descriptors_round_trip():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        desc = _random_descriptor(rng)
        encoded = serialize_descriptor(desc)
        assert len(encoded) == descriptor_wire_size(desc)
        assert len(encoded) <= max_descriptor_size(desc)
        decoded = deserialize_descriptor(encoded)
        assert decoded == desc
        assert serialize_descriptor(decoded) == encoded


def test_unsealed_array_refused():
    array = ArrayDescriptor(DataType.INT64, 1, 0, BufferRef(0, 8))
    batch = RecordBatchDescriptor(Schema.of(Field('v', DataType.INT64)), 1, (array,))
    with pytest.raises(UnsealedArrayError):
        serialize_descriptor(batch)


def _corrupt(offset: int, value: int) -> bytes:
    data = bytearray(read_fixture('batch_uint64.hex'))
    data[offset] = value
    return bytes(data)


@pytest.mark.parametrize("data,message", [
    (_corrupt(0, 0x58), "bad magic"),
    (_corrupt(4, 9), "unsupported version"),
    (_corrupt(6, 7), "unknown descriptor kind"),
    (_corrupt(12, 42), "unknown dtype"),
    (_corrupt(38, 0x80), "unknown buffer flags"),
])
def test_malformed_header_fields(data, message):
    with pytest.raises(DescriptorFormatError, match=message):
        deserialize_descriptor(data)


def test_truncated_input():
    golden = read_fixture('batch_uint64.hex')
    for cut in (0, 3, 10, 30, 54):
        with pytest.raises(DescriptorFormatError, match="truncated"):
            deserialize_descriptor(golden[:cut])


def test_trailing_bytes():
    with pytest.raises(DescriptorFormatError, match="trailing"):
        deserialize_descriptor(read_fixture('batch_uint64.hex') + b'\x00')


def test_null_count_above_length():
    data = bytearray(read_fixture('batch_uint64.hex'))
    data[30] = 5  # null_count low byte
    with pytest.raises(DescriptorFormatError):
        deserialize_descriptor(bytes(data))


def test_short_data_buffer():
    data = bytearray(read_fixture('batch_uint64.hex'))
    data[47] = 16  # data length 16 < 3 * 8
    with pytest.raises(DescriptorFormatError):
        deserialize_descriptor(bytes(data))


def test_codec_never_touches_data_buffers(protocol, cluster):
    schema = Schema.of(Field('n', DataType.INT64), Field('s', DataType.UTF8))
    batch = protocol.build_record_batch(1, 0, schema, {'n': [1, None, 3], 's': ['a', None, 'ccc']})
    mark = cluster.ledger.mark()
    encoded = serialize_descriptor(batch, cluster.ledger, 1)
    decoded = deserialize_descriptor(encoded)

    events = cluster.ledger.events_since(mark)
    assert [e.op for e in events] == [EventKind.CODEC]
    assert decoded == batch

    # eager validation reads validity and offsets but never a data buffer
    mark = cluster.ledger.mark()
    deserialize_descriptor(encoded, reader=ColumnReader(cluster.csm, 2), eager=True)
    data_ranges = [(a.data.addr, a.data.end) for a in batch.columns]
    for event in cluster.ledger.events_since(mark):
        if event.op is EventKind.READ:
            assert not any(lo <= event.addr < hi for lo, hi in data_ranges)


def test_lazy_validation_catches_bad_offsets(protocol, cluster):
    schema = Schema.of(Field('s', DataType.UTF8))
    batch = protocol.build_record_batch(0, 0, schema, {'s': ['ab', 'cd']})
    forged = batch.columns[0]
    # claim the offsets buffer starts one byte later: first offset is no longer 0
    bad = ArrayDescriptor(forged.dtype, forged.length, 0, forged.data,
                          offsets=BufferRef(forged.offsets.addr + 4, forged.offsets.length),
                          sealed=True)
    encoded = serialize_descriptor(RecordBatchDescriptor(schema, 2, (bad,)))
    decoded = deserialize_descriptor(encoded)
    with pytest.raises(DescriptorFormatError):
        ColumnReader(cluster.csm, 1).get(decoded.columns[0], 0)
