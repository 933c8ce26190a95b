"""Arrow-style columnar descriptors: structure and buffer references, never data."""
import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import SchemaMismatchError


class DataType(Enum):
    """Supported column types; the value is the wire code."""
    UINT64 = 1
    INT64 = 2
    FLOAT64 = 3
    BOOL = 4
    UTF8 = 5

    @property
    def code(self) -> int:
        return self.value

    @property
    def byte_width(self) -> int:
        """Bytes per element for 64-bit types, 0 for bit-packed and variable width."""
        return 8 if self in (DataType.UINT64, DataType.INT64, DataType.FLOAT64) else 0

    @property
    def numpy_dtype(self) -> Optional[np.dtype]:
        return _NUMPY_DTYPES.get(self)

    @property
    def is_numeric(self) -> bool:
        return self.byte_width == 8

    @property
    def is_integer(self) -> bool:
        return self in (DataType.UINT64, DataType.INT64)

    def data_bytes(self, length: int) -> int:
        """Minimum data buffer size for `length` elements (Utf8 excluded)."""
        if self is DataType.BOOL:
            return (length + 7) // 8
        return length * self.byte_width

    @classmethod
    def from_code(cls, code: int) -> 'DataType':
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"Unknown dtype code {code}")

    @classmethod
    def parse(cls, name: str) -> 'DataType':
        """Parse 'uint64', 'Int64', 'utf8', 'string', ..."""
        key = name.strip().lower()
        aliases = {'string': 'utf8', 'str': 'utf8', 'double': 'float64', 'boolean': 'bool'}
        key = aliases.get(key, key)
        for dtype in cls:
            if dtype.name.lower() == key:
                return dtype
        raise ValueError(f"Unknown data type: {name}")


_NUMPY_DTYPES: Dict[DataType, np.dtype] = {
    DataType.UINT64: np.dtype('<u8'),
    DataType.INT64: np.dtype('<i8'),
    DataType.FLOAT64: np.dtype('<f8'),
}


@dataclass(frozen=True)
class Field:
    """Named, typed schema column."""
    name: str
    dtype: DataType
    nullable: bool = True

    def __post_init__(self):
        if not self.name:
            raise SchemaMismatchError("Field name must not be empty")


@dataclass(frozen=True)
class Schema:
    """Ordered, uniquely named list of fields."""
    fields: Tuple[Field, ...]

    def __post_init__(self):
        if not self.fields:
            raise SchemaMismatchError("Schema needs at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise SchemaMismatchError(f"Duplicate field names in schema: {names}")

    @classmethod
    def of(cls, *fields: Field) -> 'Schema':
        return cls(tuple(fields))

    @property
    def names(self) -> List[str]:
        return [f.name for f in self.fields]

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self) -> Iterator[Field]:
        return iter(self.fields)

    def index_of(self, name: str) -> int:
        for index, f in enumerate(self.fields):
            if f.name == name:
                return index
        raise KeyError(f"No field named '{name}'")


@dataclass(frozen=True)
class BufferRef:
    """Reference to bytes in the cluster address space."""
    addr: int
    length: int

    @classmethod
    def empty(cls) -> 'BufferRef':
        return cls(0, 0)

    @property
    def end(self) -> int:
        return self.addr + self.length


@dataclass(frozen=True)
class ArrayDescriptor:
    """
    One immutable array: row count, null count and buffer references.

    `trusted` is False for descriptors that arrived over the wire; their
    buffer contents are validated on first read. It takes no part in
    equality.
    """
    dtype: DataType
    length: int
    null_count: int
    data: BufferRef
    validity: Optional[BufferRef] = None
    offsets: Optional[BufferRef] = None
    sealed: bool = False
    trusted: bool = field(default=True, compare=False)
    _checked: Dict[str, bool] = field(default_factory=dict, compare=False, repr=False)

    def buffers(self) -> List[BufferRef]:
        """Present buffers in layout order: validity, offsets, data."""
        return [b for b in (self.validity, self.offsets, self.data) if b is not None]

    @property
    def content_checked(self) -> bool:
        return self.trusted or self._checked.get('content', False)

    def mark_content_checked(self) -> None:
        self._checked['content'] = True


@dataclass(frozen=True)
class RecordBatchDescriptor:
    """Equal-length columns conforming to one schema."""
    schema: Schema
    num_rows: int
    columns: Tuple[ArrayDescriptor, ...]

    def __post_init__(self):
        if len(self.columns) != len(self.schema):
            raise SchemaMismatchError(
                f"Batch has {len(self.columns)} columns, schema has {len(self.schema)}")
        for f, column in zip(self.schema, self.columns):
            if column.dtype is not f.dtype:
                raise SchemaMismatchError(
                    f"Column '{f.name}' is {column.dtype.name}, schema says {f.dtype.name}")
            if column.length != self.num_rows:
                raise SchemaMismatchError(
                    f"Column '{f.name}' has {column.length} rows, batch has {self.num_rows}")

    def arrays(self) -> Iterator[ArrayDescriptor]:
        return iter(self.columns)

    def column(self, name: str) -> ArrayDescriptor:
        return self.columns[self.schema.index_of(name)]

    @property
    def is_sealed(self) -> bool:
        return all(c.sealed for c in self.columns)

    def to_table(self) -> 'TableDescriptor':
        """Single-chunk table view of this batch."""
        return TableDescriptor(
            schema=self.schema,
            columns=tuple(ChunkedColumn(f.dtype, (c,)) for f, c in zip(self.schema, self.columns)),
            num_rows=self.num_rows,
        )


@dataclass(frozen=True)
class ChunkedColumn:
    """Logical column made of contiguous arrays, possibly on different nodes."""
    dtype: DataType
    chunks: Tuple[ArrayDescriptor, ...]

    def __post_init__(self):
        for chunk in self.chunks:
            if chunk.dtype is not self.dtype:
                raise SchemaMismatchError(
                    f"Chunk dtype {chunk.dtype.name} differs from column dtype {self.dtype.name}")

    @property
    def length(self) -> int:
        return sum(chunk.length for chunk in self.chunks)

    @property
    def null_count(self) -> int:
        return sum(chunk.null_count for chunk in self.chunks)

    def chunk_starts(self) -> List[int]:
        """First global row of every chunk."""
        starts, total = [], 0
        for chunk in self.chunks:
            starts.append(total)
            total += chunk.length
        return starts

    def locate(self, row: int) -> Tuple[int, int]:
        """
        Resolve a global row to (chunk index, row within chunk).

        Raises:
            IndexError: If row is outside [0, length)
        """
        if row < 0 or row >= self.length:
            raise IndexError(f"Row {row} out of range for column of length {self.length}")
        starts = self.chunk_starts()
        # rightmost chunk starting at or before row; skips empty chunks
        index = bisect.bisect_right(starts, row) - 1
        return index, row - starts[index]


@dataclass(frozen=True)
class TableDescriptor:
    """Columns of a table; chunk boundaries may differ between columns."""
    schema: Schema
    columns: Tuple[ChunkedColumn, ...]
    num_rows: int

    def __post_init__(self):
        if len(self.columns) != len(self.schema):
            raise SchemaMismatchError(
                f"Table has {len(self.columns)} columns, schema has {len(self.schema)}")
        for f, column in zip(self.schema, self.columns):
            if column.dtype is not f.dtype:
                raise SchemaMismatchError(
                    f"Column '{f.name}' is {column.dtype.name}, schema says {f.dtype.name}")
            if column.length != self.num_rows:
                raise SchemaMismatchError(
                    f"Column '{f.name}' has {column.length} rows, table has {self.num_rows}")

    @classmethod
    def from_batches(cls, schema: Schema, batches: Sequence[RecordBatchDescriptor]) -> 'TableDescriptor':
        """Concatenate batches: chunk i of every column comes from batch i."""
        for batch in batches:
            if batch.schema != schema:
                raise SchemaMismatchError("Record batch schema differs from table schema")
        columns = tuple(
            ChunkedColumn(f.dtype, tuple(batch.columns[i] for batch in batches))
            for i, f in enumerate(schema)
        )
        return cls(schema=schema, columns=columns, num_rows=sum(b.num_rows for b in batches))

    def arrays(self) -> Iterator[ArrayDescriptor]:
        for column in self.columns:
            yield from column.chunks

    def column(self, name: str) -> ChunkedColumn:
        return self.columns[self.schema.index_of(name)]

    @property
    def is_sealed(self) -> bool:
        return all(a.sealed for a in self.arrays())
