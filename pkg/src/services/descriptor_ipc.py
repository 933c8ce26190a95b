"""
Data-free descriptor codec.

Only structure and buffer references are encoded; addresses are shipped
verbatim because every node sees the same global address space. Layout
(little-endian):

    header   magic "CSMT" | version u16 | kind u8 (1 batch, 2 table)
    schema   field_count u16 | per field: name_len u16, name, dtype u8, nullable u8
    batch    num_rows u64 | per column: array
    table    num_rows u64 | per column: chunk_count u32, per chunk: array
    array    length u64 | null_count u64 | flags u8 (bit0 validity, bit1 offsets)
             | per present buffer (validity, offsets, data): addr u64, len u64
"""
import logging
from typing import TYPE_CHECKING, List, Optional, Union

from ..config.settings import Settings
from ..models.columnar import (
    ArrayDescriptor, BufferRef, ChunkedColumn, DataType, Field, RecordBatchDescriptor, Schema,
    TableDescriptor,
)
from ..models.errors import DescriptorFormatError, SchemaMismatchError, UnsealedArrayError
from ..models.ledger import EventKind
from ..utils.validators import DescriptorValidator
from ..utils.wire import WireReader, WireWriter

if TYPE_CHECKING:
    from ..models.ledger import CostLedger
    from ..repositories.column_reader import ColumnReader


logger = logging.getLogger(__name__)

Descriptor = Union[RecordBatchDescriptor, TableDescriptor]

FLAG_VALIDITY = 0x01
FLAG_OFFSETS = 0x02

HEADER_BYTES = 7
ARRAY_FIXED_BYTES = 17
BUFFER_REF_BYTES = 16


def serialize_descriptor(desc: Descriptor, ledger: Optional['CostLedger'] = None,
                         node: int = 0) -> bytes:
    """
    Encode a record batch or table descriptor.

    Never touches the data buffers. When a ledger is passed, one codec
    event is charged to `node`.

    Args:
        desc: Sealed RecordBatchDescriptor or TableDescriptor
        ledger: Optional ledger to charge
        node: Node performing the serialization

    Returns:
        Encoded bytes

    Raises:
        UnsealedArrayError: If any array is not sealed
    """
    for array in desc.arrays():
        if not array.sealed:
            raise UnsealedArrayError("Cannot serialize a descriptor with unsealed arrays")

    writer = WireWriter()
    writer.write_raw(Settings.WIRE_MAGIC)
    writer.write_uint16(Settings.WIRE_VERSION)
    if isinstance(desc, RecordBatchDescriptor):
        writer.write_uint8(Settings.KIND_RECORD_BATCH)
        _write_schema(writer, desc.schema)
        writer.write_uint64(desc.num_rows)
        for array in desc.columns:
            _write_array(writer, array)
    elif isinstance(desc, TableDescriptor):
        writer.write_uint8(Settings.KIND_TABLE)
        _write_schema(writer, desc.schema)
        writer.write_uint64(desc.num_rows)
        for column in desc.columns:
            writer.write_uint32(len(column.chunks))
            for array in column.chunks:
                _write_array(writer, array)
    else:
        raise TypeError(f"Cannot serialize {type(desc).__name__}")

    encoded = writer.getvalue()
    if ledger is not None:
        ledger.record(EventKind.CODEC, node, 0, len(encoded), detail='serialize')
    logger.debug(f"Serialized {type(desc).__name__} into {len(encoded)} bytes")
    return encoded


def deserialize_descriptor(data: Union[bytes, bytearray, memoryview],
                           reader: Optional['ColumnReader'] = None,
                           eager: Optional[bool] = None) -> Descriptor:
    """
    Decode descriptor bytes.

    Structural invariants are checked here. Buffer contents (validity
    counts, Utf8 offsets) are checked on first access, or right away when
    `eager` is set and a reader is given.

    Args:
        data: Encoded descriptor
        reader: Column reader used for eager content validation
        eager: Override Settings.EAGER_DESCRIPTOR_VALIDATION

    Returns:
        RecordBatchDescriptor or TableDescriptor referencing the same addresses

    Raises:
        DescriptorFormatError: Bad magic, unknown version/kind/dtype,
            truncated input, trailing bytes or invariant violation
    """
    stream = WireReader(data)
    magic = stream.read_raw(4, 'magic')
    if magic != Settings.WIRE_MAGIC:
        raise DescriptorFormatError(f"bad magic: {magic!r}")
    version = stream.read_uint16('version')
    if version != Settings.WIRE_VERSION:
        raise DescriptorFormatError(f"unsupported version {version}")
    kind = stream.read_uint8('kind')
    if kind not in (Settings.KIND_RECORD_BATCH, Settings.KIND_TABLE):
        raise DescriptorFormatError(f"unknown descriptor kind {kind}")

    schema = _read_schema(stream)
    num_rows = stream.read_uint64('num_rows')
    try:
        if kind == Settings.KIND_RECORD_BATCH:
            columns = tuple(_read_array(stream, f.dtype) for f in schema)
            desc: Descriptor = RecordBatchDescriptor(schema=schema, num_rows=num_rows, columns=columns)
        else:
            chunked = []
            for f in schema:
                count = stream.read_uint32('chunk_count')
                chunked.append(ChunkedColumn(f.dtype, tuple(_read_array(stream, f.dtype)
                                                            for _ in range(count))))
            desc = TableDescriptor(schema=schema, columns=tuple(chunked), num_rows=num_rows)
    except SchemaMismatchError as e:
        raise DescriptorFormatError(f"descriptor invariant violated: {e}")
    stream.expect_end()

    if eager is None:
        eager = Settings.EAGER_DESCRIPTOR_VALIDATION
    if eager and reader is not None:
        for array in desc.arrays():
            reader.ensure_valid(array)
    return desc


def descriptor_wire_size(desc: Descriptor) -> int:
    """Exact encoded size, computed without encoding."""
    size = HEADER_BYTES + 2 + sum(2 + len(f.name.encode('utf-8')) + 2 for f in desc.schema) + 8
    if isinstance(desc, TableDescriptor):
        size += 4 * len(desc.columns)
    for array in desc.arrays():
        size += ARRAY_FIXED_BYTES + BUFFER_REF_BYTES * len(array.buffers())
    return size


def max_descriptor_size(desc: Descriptor) -> int:
    """
    Closed-form upper bound on the encoded size.

    64 + sum over fields of (6 + name length) + 4 per column + 65 per chunk.
    An array with all three buffers takes 17 + 3 * 16 = 65 bytes.
    """
    fields_part = sum(6 + len(f.name.encode('utf-8')) for f in desc.schema)
    return 64 + fields_part + 4 * len(desc.schema) + 65 * sum(1 for _ in desc.arrays())


def _write_schema(writer: WireWriter, schema: Schema) -> None:
    writer.write_uint16(len(schema))
    for f in schema:
        writer.write_string16(f.name)
        writer.write_uint8(f.dtype.code)
        writer.write_uint8(1 if f.nullable else 0)


def _read_schema(stream: WireReader) -> Schema:
    count = stream.read_uint16('field_count')
    fields: List[Field] = []
    for _ in range(count):
        name = stream.read_string16('field name')
        code = stream.read_uint8('dtype')
        try:
            dtype = DataType.from_code(code)
        except ValueError:
            raise DescriptorFormatError(f"unknown dtype {code}")
        nullable = stream.read_uint8('nullable')
        if nullable > 1:
            raise DescriptorFormatError(f"nullable flag must be 0 or 1, got {nullable}")
        if not name:
            raise DescriptorFormatError("field name must not be empty")
        fields.append(Field(name, dtype, bool(nullable)))
    try:
        return Schema(tuple(fields))
    except SchemaMismatchError as e:
        raise DescriptorFormatError(f"invalid schema: {e}")


def _write_array(writer: WireWriter, array: ArrayDescriptor) -> None:
    flags = (FLAG_VALIDITY if array.validity is not None else 0) | \
            (FLAG_OFFSETS if array.offsets is not None else 0)
    writer.write_uint64(array.length)
    writer.write_uint64(array.null_count)
    writer.write_uint8(flags)
    for buf in array.buffers():
        writer.write_uint64(buf.addr)
        writer.write_uint64(buf.length)


def _read_array(stream: WireReader, dtype: DataType) -> ArrayDescriptor:
    length = stream.read_uint64('array length')
    null_count = stream.read_uint64('null_count')
    flags = stream.read_uint8('buffer flags')
    if flags & ~(FLAG_VALIDITY | FLAG_OFFSETS):
        raise DescriptorFormatError(f"unknown buffer flags 0x{flags:02x}")

    def read_ref(what: str) -> BufferRef:
        return BufferRef(stream.read_uint64(f"{what} addr"), stream.read_uint64(f"{what} len"))

    validity = read_ref('validity') if flags & FLAG_VALIDITY else None
    offsets = read_ref('offsets') if flags & FLAG_OFFSETS else None
    data = read_ref('data')
    array = ArrayDescriptor(dtype=dtype, length=length, null_count=null_count, data=data,
                            validity=validity, offsets=offsets, sealed=True, trusted=False)
    DescriptorValidator.validate_structure(array)
    return array
