"""
Compute kernels over chunked columns.

Values are streamed block by block through the CSM read path of the
reading node; chunks may live in different nodes' memory.
"""
import itertools
import logging
import math
from typing import Iterator, Tuple, Union

import numpy as np

from ..models.columnar import ArrayDescriptor, ChunkedColumn, DataType
from ..models.errors import ComputeError, IntegerOverflowError
from ..repositories.column_reader import DEFAULT_BLOCK_ROWS, ColumnReader
from ..repositories.csm_handle import CsmHandle
from ..utils.layout import ColumnLayout


logger = logging.getLogger(__name__)

Number = Union[int, float]
ColumnLike = Union[ChunkedColumn, ArrayDescriptor]

_UINT64_MAX = (1 << 64) - 1
_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1
_LOW32 = np.uint64(0xFFFFFFFF)


class ComputeService:
    """
    Aggregations over a column as seen from one node.

    Nulls are skipped. Integer sums are exact and raise when the result
    does not fit the column type; finite float sums are correctly rounded, so the
    result does not depend on how the column is chunked.
    """

    def __init__(self, csm: CsmHandle, node: int, block_rows: int = DEFAULT_BLOCK_ROWS):
        self.reader = ColumnReader(csm, node)
        self.block_rows = block_rows

    def sum(self, column: ColumnLike) -> Number:
        """
        Sum of all valid values.

        Returns:
            int for integer columns, float for Float64; 0 for an all-null column

        Raises:
            ComputeError: Non-numeric column
            IntegerOverflowError: Integer sum outside the column type's range
        """
        column = _as_chunked(column)
        self._require_numeric(column)
        if not column.dtype.is_integer:
            return self._float_sum(column)

        total = 0
        for values in self._valid_blocks(column):
            unsigned = values.view(np.uint64)
            high = int((unsigned >> np.uint64(32)).sum(dtype=np.uint64))
            low = int((unsigned & _LOW32).sum(dtype=np.uint64))
            total += (high << 32) + low
            if values.dtype.kind == 'i':
                total -= int(np.count_nonzero(values < 0)) << 64

        low_bound, high_bound = (0, _UINT64_MAX) if column.dtype is DataType.UINT64 else (_INT64_MIN, _INT64_MAX)
        if not low_bound <= total <= high_bound:
            raise IntegerOverflowError(f"Sum {total} overflows {column.dtype.name}")
        return total

    def _float_sum(self, column: ChunkedColumn) -> float:
        blocks = list(self._valid_blocks(column))
        try:
            return math.fsum(itertools.chain.from_iterable(v.tolist() for v in blocks))
        except (OverflowError, ValueError):
            # overflow and inf - inf: plain IEEE sum (inf or nan)
            with np.errstate(over='ignore', invalid='ignore'):
                return float(np.sum([np.sum(v, dtype=np.float64) for v in blocks], dtype=np.float64))

    def min_max(self, column: ColumnLike) -> Tuple[Number, Number]:
        """
        (min, max) over valid values.

        Raises:
            ComputeError: Non-numeric column, or no valid values
        """
        column = _as_chunked(column)
        self._require_numeric(column)
        low = high = None
        for values in self._valid_blocks(column):
            if values.size == 0:
                continue
            block_low, block_high = values.min(), values.max()
            low = block_low if low is None or block_low < low else low
            high = block_high if high is None or block_high > high else high
        if low is None:
            raise ComputeError("min_max of a column without valid values")
        return ColumnLayout.to_python(column.dtype, low), ColumnLayout.to_python(column.dtype, high)

    def _valid_blocks(self, column: ChunkedColumn) -> Iterator[np.ndarray]:
        for chunk in column.chunks:
            for values, valid in self.reader.iter_blocks(chunk, self.block_rows):
                yield values if valid.all() else values[valid]

    @staticmethod
    def _require_numeric(column: ChunkedColumn) -> None:
        if not column.dtype.is_numeric:
            raise ComputeError(f"Kernel does not support {column.dtype.name} columns")


def _as_chunked(column: ColumnLike) -> ChunkedColumn:
    if isinstance(column, ArrayDescriptor):
        return ChunkedColumn(column.dtype, (column,))
    return column


def compute_sum(csm: CsmHandle, reader_node: int, column: ColumnLike) -> Number:
    """Sum of valid values of a column read from `reader_node`."""
    return ComputeService(csm, reader_node).sum(column)


def compute_min_max(csm: CsmHandle, reader_node: int, column: ColumnLike) -> Tuple[Number, Number]:
    """(min, max) of valid values of a column read from `reader_node`."""
    return ComputeService(csm, reader_node).min_max(column)
