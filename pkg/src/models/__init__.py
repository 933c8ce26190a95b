"""Data models for memory, descriptors, messages and reports."""
from .errors import (
    AddressRangeError, AdversaryNotArmedError, ClusterShutdownError, ComputeError, CsmError,
    DescriptorFormatError, IntegerOverflowError, InvalidFreeError, OutOfMemoryError,
    RegionError, RpcTimeoutError, SchemaMismatchError, SealedObjectError, SegmentMapError,
    UnsealedArrayError,
)
from .memory import CoherenceLevel, Segment, SegmentMap
from .ledger import CostLedger, EventKind, TraceEvent
from .allocation import AllocRecord
from .columnar import (
    ArrayDescriptor, BufferRef, ChunkedColumn, DataType, Field, RecordBatchDescriptor, Schema,
    TableDescriptor,
)
from .sealed_registry import SealedRegistry
from .messages import Message, decode_frame
from .bench import BreakdownReport, StridedReport, TransferReport

__all__ = [
    'AddressRangeError', 'AdversaryNotArmedError', 'ClusterShutdownError', 'ComputeError',
    'CsmError', 'DescriptorFormatError', 'IntegerOverflowError', 'InvalidFreeError',
    'OutOfMemoryError', 'RegionError', 'RpcTimeoutError', 'SchemaMismatchError',
    'SealedObjectError', 'SegmentMapError', 'UnsealedArrayError',
    'CoherenceLevel', 'Segment', 'SegmentMap',
    'CostLedger', 'EventKind', 'TraceEvent',
    'AllocRecord',
    'ArrayDescriptor', 'BufferRef', 'ChunkedColumn', 'DataType', 'Field',
    'RecordBatchDescriptor', 'Schema', 'TableDescriptor',
    'SealedRegistry', 'Message', 'decode_frame',
    'BreakdownReport', 'StridedReport', 'TransferReport',
]
