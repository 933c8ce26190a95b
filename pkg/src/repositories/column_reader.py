"""Read side of the columnar format: every byte goes through the CSM read path."""
import logging
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..models.columnar import ArrayDescriptor, ChunkedColumn, DataType
from ..models.errors import UnsealedArrayError
from ..utils.layout import ColumnLayout
from ..utils.validators import DescriptorValidator
from .csm_handle import CsmHandle


logger = logging.getLogger(__name__)

DEFAULT_BLOCK_ROWS = 1 << 16


class ColumnReader:
    """
    Reads sealed arrays as seen from one node.

    Descriptors received over the wire are validated against their buffer
    contents the first time they are read.
    """

    def __init__(self, csm: CsmHandle, node: int):
        self.csm = csm
        self.node = node

    def ensure_valid(self, array: ArrayDescriptor) -> None:
        """Run content validation once for an untrusted descriptor."""
        if array.content_checked:
            return
        bits = None
        offsets = None
        if array.validity is not None:
            raw = self.csm.read_array(self.node, array.validity.addr, (array.length + 7) // 8)
            bits = ColumnLayout.unpack_bits(raw, array.length)
        if array.offsets is not None:
            raw = self.csm.read_array(self.node, array.offsets.addr, 4 * (array.length + 1))
            offsets = ColumnLayout.decode_offsets(raw, array.length)
        DescriptorValidator.validate_content(array, bits, offsets)
        array.mark_content_checked()
        logger.debug(f"Validated {array.dtype.name} array of {array.length} rows at node {self.node}")

    def get(self, array: ArrayDescriptor, row: int) -> Optional[Any]:
        """
        One value, or None when the row is null.

        Raises:
            UnsealedArrayError: If the array is not sealed
            IndexError: If row is out of range
        """
        self._check_readable(array)
        if row < 0 or row >= array.length:
            raise IndexError(f"Row {row} out of range for array of length {array.length}")
        if not self._is_valid(array, row):
            return None

        dtype = array.dtype
        if dtype is DataType.UTF8:
            raw = self.csm.read_array(self.node, array.offsets.addr + 4 * row, 8)
            start, end = (int(v) for v in raw.view('<u4'))
            if end == start:
                return ''
            return ColumnLayout.decode_utf8(self.csm.read(self.node, array.data.addr + start, end - start))
        if dtype is DataType.BOOL:
            byte = self.csm.read_array(self.node, array.data.addr + row // 8, 1)[0]
            return bool((byte >> (row % 8)) & 1)
        raw = self.csm.read_array(self.node, array.data.addr + row * 8, 8)
        return ColumnLayout.to_python(dtype, raw.view(dtype.numpy_dtype)[0])

    def chunked_get(self, column: ChunkedColumn, row: int) -> Optional[Any]:
        """Resolve a global row to its chunk and read it there."""
        chunk, local = column.locate(row)
        return self.get(column.chunks[chunk], local)

    def take(self, array: ArrayDescriptor, rows: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Batched read of selected rows.

        Fixed-width values are fetched with one gather call, so every
        touched line is charged once.

        Returns:
            (values, valid) arrays aligned with `rows`
        """
        self._check_readable(array)
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        if rows.size and (rows.min() < 0 or rows.max() >= array.length):
            raise IndexError(f"Rows out of range for array of length {array.length}")

        if array.validity is not None:
            raw = self.csm.gather(self.node, array.validity.addr + rows // 8, 1)[:, 0]
            valid = ((raw >> (rows % 8).astype(np.uint8)) & 1).astype(bool)
        else:
            valid = np.ones(rows.size, dtype=bool)

        dtype = array.dtype
        if dtype.is_numeric:
            raw = self.csm.gather(self.node, array.data.addr + rows * 8, 8)
            values = np.ascontiguousarray(raw).view(dtype.numpy_dtype).reshape(-1)
        elif dtype is DataType.BOOL:
            raw = self.csm.gather(self.node, array.data.addr + rows // 8, 1)[:, 0]
            values = ((raw >> (rows % 8).astype(np.uint8)) & 1).astype(bool)
        else:
            values = np.array([self.get(array, int(r)) if ok else None
                               for r, ok in zip(rows, valid)], dtype=object)
        return values, valid

    def read(self, array: ArrayDescriptor) -> Tuple[np.ndarray, np.ndarray]:
        """Decode a whole array: (values, valid)."""
        blocks = list(self.iter_blocks(array, max(array.length, 1)))
        if not blocks:
            empty = np.zeros(0, dtype=array.dtype.numpy_dtype or object)
            return empty, np.zeros(0, dtype=bool)
        return blocks[0]

    def to_pylist(self, array: ArrayDescriptor) -> List[Optional[Any]]:
        values, valid = self.read(array)
        return [ColumnLayout.to_python(array.dtype, v) if ok else None
                for v, ok in zip(values, valid)]

    def iter_blocks(self, array: ArrayDescriptor,
                    block_rows: int = DEFAULT_BLOCK_ROWS) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """
        Stream an array in row blocks of (values, valid).

        Block boundaries for bool and validity bitmaps are rounded to whole
        bytes, so block_rows is rounded up to a multiple of 8.
        """
        self._check_readable(array)
        block_rows = max(8, -(-block_rows // 8) * 8)
        offsets = None
        if array.dtype is DataType.UTF8 and array.length:
            raw = self.csm.read_array(self.node, array.offsets.addr, 4 * (array.length + 1))
            offsets = ColumnLayout.decode_offsets(raw, array.length)

        for start in range(0, array.length, block_rows):
            count = min(block_rows, array.length - start)
            if array.validity is not None:
                raw = self.csm.read_array(self.node, array.validity.addr + start // 8, (count + 7) // 8)
                valid = ColumnLayout.unpack_bits(raw, count)
            else:
                valid = np.ones(count, dtype=bool)

            if array.dtype is DataType.UTF8:
                lo, hi = int(offsets[start]), int(offsets[start + count])
                blob = self.csm.read(self.node, array.data.addr + lo, hi - lo) if hi > lo else b''
                bounds = offsets[start:start + count + 1] - lo
                values = np.array([ColumnLayout.decode_utf8(blob[bounds[i]:bounds[i + 1]])
                                   for i in range(count)], dtype=object)
            elif array.dtype is DataType.BOOL:
                raw = self.csm.read_array(self.node, array.data.addr + start // 8, (count + 7) // 8)
                values = ColumnLayout.unpack_bits(raw, count)
            else:
                raw = self.csm.read_array(self.node, array.data.addr + start * 8, count * 8)
                values = ColumnLayout.decode_fixed(array.dtype, raw, count)
            yield values, valid

    def _check_readable(self, array: ArrayDescriptor) -> None:
        if not array.sealed:
            raise UnsealedArrayError("Array must be sealed before it is read")
        self.ensure_valid(array)

    def _is_valid(self, array: ArrayDescriptor, row: int) -> bool:
        if array.validity is None:
            return True
        byte = self.csm.read_array(self.node, array.validity.addr + row // 8, 1)[0]
        return bool((byte >> (row % 8)) & 1)


def array_get(csm: CsmHandle, reader_node: int, array: ArrayDescriptor, row: int) -> Optional[Any]:
    """Value at `row` read from `reader_node`, None for nulls."""
    return ColumnReader(csm, reader_node).get(array, row)


def chunked_get(csm: CsmHandle, reader_node: int, column: ChunkedColumn, row: int) -> Optional[Any]:
    """Value at global `row` of a chunked column read from `reader_node`."""
    return ColumnReader(csm, reader_node).chunked_get(column, row)


def array_take(csm: CsmHandle, reader_node: int, array: ArrayDescriptor,
               rows: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Batched row read, see ColumnReader.take."""
    return ColumnReader(csm, reader_node).take(array, rows)
