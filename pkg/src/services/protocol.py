"""
Object creation protocol for locally-coherent cluster shared memory.

A buffer is created in five steps: allocation by the owner, a flush of the
range on every node, the write, a flush by the writer when the memory is
remote, and sealing. Once sealed the buffer never changes, so every node
reads the same bytes without further flushing.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.columnar import (
    ArrayDescriptor, BufferRef, DataType, RecordBatchDescriptor, Schema,
    TableDescriptor,
)
from ..models.errors import CsmError, SchemaMismatchError
from ..repositories.csm_handle import BytesLike
from ..utils.layout import ColumnLayout
from ..utils.validators import DescriptorValidator
from .cluster_runtime import ClusterHandle
from .descriptor_ipc import Descriptor, serialize_descriptor


logger = logging.getLogger(__name__)

Producer = Union[BytesLike, Iterable[BytesLike], None]
ColumnValues = Union[Sequence[Any], np.ndarray]


@dataclass(frozen=True)
class ProtocolOptions:
    """
    Switches for the optional steps.

    Both default to on; turning one off reproduces the hazard it prevents.
    """
    pre_write_flush: bool = True
    post_write_flush: bool = True


class CoherenceProtocol:
    """Creates sealed buffers and columnar objects on cluster shared memory."""

    def __init__(self, cluster: ClusterHandle, options: Optional[ProtocolOptions] = None):
        self.cluster = cluster
        self.csm = cluster.csm
        self.ledger = cluster.ledger
        self.options = options or ProtocolOptions()

    def create_shared_buffer(self, writer: int, owner: int, size: int,
                             producer: Producer = None) -> BufferRef:
        """
        Create, fill and seal one buffer in `owner`'s memory.

        Args:
            writer: Node producing the bytes
            owner: Node whose memory holds the buffer
            size: Buffer size in bytes (> 0)
            producer: The bytes, an iterable of byte chunks written in order,
                or None for zeros

        Returns:
            BufferRef of the sealed buffer

        Raises:
            ValueError: Non-positive size or producer length mismatch
            OutOfMemoryError: Owner cannot allocate
            RpcTimeoutError: A flush ack never arrived
            SealedObjectError: The range is already sealed
        """
        if size <= 0:
            raise ValueError(f"Buffer size must be positive, got {size}")

        with self.ledger.phase('allocation'):
            addr = self.cluster.rpc_alloc(writer, owner, size)

        try:
            with self.ledger.phase('clear'):
                if self.options.pre_write_flush:
                    self.cluster.broadcast_flush(owner, addr, size)

            with self.ledger.phase('write'):
                self.write(writer, addr, producer, size)

            with self.ledger.phase('flush_if_remote'):
                if writer != owner and self.options.post_write_flush:
                    self.cluster.nodes[writer].flush_local(addr, size)
        except Exception as e:
            logger.error(f"Creating buffer at {addr} failed, releasing it: {e}")
            self._release(writer, owner, addr)
            raise

        with self.ledger.phase('seal'):
            self.cluster.broadcast_seal(writer, addr, size)

        logger.debug(f"Sealed buffer of {size} bytes at {addr} (writer={writer}, owner={owner})")
        return BufferRef(addr, size)

    def _release(self, writer: int, owner: int, addr: int) -> None:
        try:
            self.cluster.rpc_free(writer, owner, addr)
        except CsmError as e:
            logger.warning(f"Could not free {addr} on node {owner}: {e}")

    def write(self, node: int, addr: int, producer: Producer, size: Optional[int] = None) -> int:
        """
        Write through `node`, refusing any byte of a sealed range.

        Returns:
            Number of bytes written

        Raises:
            SealedObjectError: If the range overlaps a sealed object
            ValueError: If `size` is given and the producer yields a different length
        """
        chunks = self._chunks(producer, size)
        registry = self.cluster.nodes[node].registry
        written = 0
        for chunk in chunks:
            length = int(chunk.nbytes) if isinstance(chunk, np.ndarray) else len(chunk)
            if length == 0:
                continue
            registry.check_write(addr + written, length)
            self.csm.write(node, addr + written, chunk)
            written += length
        if size is not None and written != size:
            raise ValueError(f"Producer supplied {written} bytes, buffer holds {size}")
        return written

    def build_array(self, writer: int, owner: int, dtype: DataType,
                    values: ColumnValues) -> ArrayDescriptor:
        """
        Build a sealed array; one buffer creation per present buffer.

        Args:
            writer: Producing node
            owner: Node whose memory holds the buffers
            dtype: Column type
            values: Values, None for nulls

        Returns:
            Sealed ArrayDescriptor
        """
        encoded = ColumnLayout.encode(dtype, values)
        refs: Dict[str, BufferRef] = {}
        for name, buf in encoded.buffers():
            refs[name] = (self.create_shared_buffer(writer, owner, int(buf.nbytes), buf)
                          if buf.nbytes else BufferRef.empty())
        array = ArrayDescriptor(
            dtype=dtype,
            length=encoded.length,
            null_count=encoded.null_count,
            data=refs['data'],
            validity=refs.get('validity'),
            offsets=refs.get('offsets'),
            sealed=True,
        )
        DescriptorValidator.validate_structure(array)
        return array

    def build_fixed_array(self, writer: int, owner: int, dtype: DataType, length: int,
                          producer: Producer = None) -> ArrayDescriptor:
        """
        Build a sealed null-free 64-bit array straight from raw data bytes.

        With producer None the data is zeros and never materialized.
        """
        if not dtype.is_numeric:
            raise ValueError(f"build_fixed_array needs a 64-bit type, got {dtype.name}")
        size = dtype.data_bytes(length)
        data = self.create_shared_buffer(writer, owner, size, producer) if size else BufferRef.empty()
        return ArrayDescriptor(dtype=dtype, length=length, null_count=0, data=data, sealed=True)

    def build_record_batch(self, writer: int, owner: int, schema: Schema,
                           columns: Union[Mapping[str, ColumnValues], Sequence[ColumnValues]]
                           ) -> RecordBatchDescriptor:
        """
        Build one array per schema field and assemble a record batch.

        Raises:
            SchemaMismatchError: Missing/extra columns, unequal lengths,
                or nulls in a non-nullable field
        """
        ordered = self._ordered_columns(schema, columns)
        arrays = tuple(self.build_array(writer, owner, f.dtype, values)
                       for f, values in zip(schema, ordered))
        for f, array in zip(schema, arrays):
            if array.null_count and not f.nullable:
                raise SchemaMismatchError(f"Field '{f.name}' is not nullable but has nulls")
        num_rows = arrays[0].length
        return RecordBatchDescriptor(schema=schema, num_rows=num_rows, columns=arrays)

    def build_spanning_table(self, schema: Schema,
                             partitions: Union[Mapping[int, Any], Sequence[Tuple[int, Any]]],
                             initiator: Optional[int] = None) -> Tuple[TableDescriptor, bytes]:
        """
        Build a table whose chunks live on the nodes that produced them.

        Every node writes its partition into its own memory, one chunk per
        column; the descriptor is then serialized and sent to all other nodes.

        Args:
            schema: Table schema
            partitions: node -> columns (mapping by field name or sequence in schema order)
            initiator: Node that publishes the descriptor (default: first partition's node)

        Returns:
            (TableDescriptor, serialized descriptor bytes)

        Raises:
            SchemaMismatchError: No partitions, or a partition not matching the schema
        """
        items = list(partitions.items()) if isinstance(partitions, Mapping) else list(partitions)
        if not items:
            raise SchemaMismatchError("A spanning table needs at least one partition")

        batches = [self.build_record_batch(node, node, schema, columns) for node, columns in items]
        table = TableDescriptor.from_batches(schema, batches)
        publisher = items[0][0] if initiator is None else initiator
        payload = self.publish(publisher, table)
        logger.info(f"Spanning table built: {table.num_rows} rows over {len(items)} nodes")
        return table, payload

    def publish(self, initiator: int, desc: Descriptor) -> bytes:
        """Serialize the descriptor and send it to every other node."""
        with self.ledger.phase('serialize'):
            payload = serialize_descriptor(desc, self.ledger, initiator)
        with self.ledger.phase('publish'):
            self.cluster.broadcast_descriptor(initiator, payload)
        return payload

    def rebuild_batch(self, node: int, source: RecordBatchDescriptor,
                      buffers: Sequence[np.ndarray]) -> RecordBatchDescriptor:
        """
        Recreate a batch in `node`'s own memory from shipped buffer contents.

        `buffers` holds the contents of every present buffer of every
        column, in layout order.
        """
        contents = iter(buffers)
        columns: List[ArrayDescriptor] = []
        for array in source.columns:
            refs: Dict[str, BufferRef] = {}
            for name in ('validity', 'offsets', 'data'):
                ref = getattr(array, name)
                if ref is None:
                    continue
                data = next(contents)
                refs[name] = (self.create_shared_buffer(node, node, ref.length, data)
                              if ref.length else BufferRef.empty())
            columns.append(ArrayDescriptor(
                dtype=array.dtype, length=array.length, null_count=array.null_count,
                data=refs['data'], validity=refs.get('validity'), offsets=refs.get('offsets'),
                sealed=True,
            ))
        return RecordBatchDescriptor(schema=source.schema, num_rows=source.num_rows,
                                     columns=tuple(columns))

    @staticmethod
    def _chunks(producer: Producer, size: Optional[int]) -> Iterable[BytesLike]:
        if producer is None:
            if size is None:
                raise ValueError("A size is required when there is no producer")
            return [np.zeros(size, dtype=np.uint8)]
        if isinstance(producer, (bytes, bytearray, memoryview, np.ndarray)):
            return [producer]
        return producer

    @staticmethod
    def _ordered_columns(schema: Schema, columns) -> List[ColumnValues]:
        if isinstance(columns, Mapping):
            if set(columns) != set(schema.names):
                raise SchemaMismatchError(
                    f"Columns {sorted(columns)} do not match schema fields {schema.names}")
            ordered = [columns[name] for name in schema.names]
        else:
            ordered = list(columns)
            if len(ordered) != len(schema):
                raise SchemaMismatchError(
                    f"Got {len(ordered)} columns for a schema of {len(schema)} fields")
        lengths = {len(values) for values in ordered}
        if len(lengths) > 1:
            raise SchemaMismatchError(f"Columns have different lengths: {sorted(lengths)}")
        return ordered


def create_shared_buffer(cluster: ClusterHandle, writer: int, owner: int, size: int,
                         producer: Producer = None,
                         options: Optional[ProtocolOptions] = None) -> BufferRef:
    """Run the five-step creation flow for one buffer."""
    return CoherenceProtocol(cluster, options).create_shared_buffer(writer, owner, size, producer)


def build_array(cluster: ClusterHandle, writer: int, owner: int, dtype: DataType,
                values: ColumnValues) -> ArrayDescriptor:
    return CoherenceProtocol(cluster).build_array(writer, owner, dtype, values)


def build_spanning_table(cluster: ClusterHandle, schema: Schema,
                         partitions: Union[Mapping[int, Any], Sequence[Tuple[int, Any]]]
                         ) -> TableDescriptor:
    table, _ = CoherenceProtocol(cluster).build_spanning_table(schema, partitions)
    return table
