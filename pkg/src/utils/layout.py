"""Conversion between Python/numpy values and columnar buffer bytes."""
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..models.columnar import DataType
from ..models.errors import DescriptorFormatError

# Utf8 offsets are u4
MAX_UTF8_BYTES = 2**32 - 1


@dataclass
class EncodedColumn:
    """Buffer contents for one array, ready to be written to shared memory."""
    dtype: DataType
    length: int
    null_count: int
    data: np.ndarray
    validity: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None

    def buffers(self) -> List[Tuple[str, np.ndarray]]:
        """Present buffers in layout order."""
        named = [('validity', self.validity), ('offsets', self.offsets), ('data', self.data)]
        return [(name, buf) for name, buf in named if buf is not None]


class ColumnLayout:
    """Encode and decode the buffers of one array."""

    @staticmethod
    def pack_bits(mask: np.ndarray) -> np.ndarray:
        """LSB-first bitmap, the bit order used for validity and bool data."""
        return np.packbits(np.asarray(mask, dtype=bool), bitorder='little')

    @staticmethod
    def unpack_bits(raw: np.ndarray, length: int) -> np.ndarray:
        return np.unpackbits(np.asarray(raw, dtype=np.uint8), count=length,
                             bitorder='little').astype(bool)

    @staticmethod
    def encode(dtype: DataType, values: Sequence[Any]) -> EncodedColumn:
        """
        Encode values (None marks a null) into validity/offsets/data buffers.

        A numpy array without nulls is encoded without a Python-level loop.

        Args:
            dtype: Column type
            values: Sequence or numpy array of values

        Returns:
            EncodedColumn; validity is present only when there are nulls
        """
        if isinstance(values, np.ndarray) and values.dtype != object:
            length = int(values.size)
            valid = np.ones(length, dtype=bool)
            present = values.reshape(-1)
        else:
            items = list(values)
            length = len(items)
            valid = np.array([v is not None for v in items], dtype=bool)
            present = items

        null_count = int(length - np.count_nonzero(valid))
        validity = ColumnLayout.pack_bits(valid) if null_count else None

        if dtype is DataType.UTF8:
            encoded = [(v.encode('utf-8') if ok else b'') for v, ok in zip(present, valid)]
            ends = np.cumsum([len(b) for b in encoded], dtype=np.int64)
            if length and int(ends[-1]) > MAX_UTF8_BYTES:
                raise ValueError(f"Utf8 data of {int(ends[-1])} bytes exceeds 32-bit offsets")
            offsets = np.zeros(length + 1, dtype='<u4')
            if length:
                offsets[1:] = ends
            data = np.frombuffer(b''.join(encoded), dtype=np.uint8)
            return EncodedColumn(dtype, length, null_count, data, validity, offsets.view(np.uint8))

        if dtype is DataType.BOOL:
            bits = np.array([bool(v) if ok else False for v, ok in zip(present, valid)], dtype=bool)
            return EncodedColumn(dtype, length, null_count, ColumnLayout.pack_bits(bits), validity)

        np_dtype = dtype.numpy_dtype
        if isinstance(present, np.ndarray):
            data = np.ascontiguousarray(present, dtype=np_dtype)
        else:
            zero = np_dtype.type(0)
            data = np.array([v if ok else zero for v, ok in zip(present, valid)], dtype=np_dtype)
        return EncodedColumn(dtype, length, null_count, data.view(np.uint8), validity)

    @staticmethod
    def decode_fixed(dtype: DataType, raw: np.ndarray, length: int) -> np.ndarray:
        """Decode the data buffer of a fixed-width or bool array."""
        raw = np.asarray(raw, dtype=np.uint8)
        if dtype is DataType.BOOL:
            return ColumnLayout.unpack_bits(raw, length)
        width = dtype.byte_width
        return raw[:length * width].view(dtype.numpy_dtype)

    @staticmethod
    def decode_offsets(raw: np.ndarray, length: int) -> np.ndarray:
        return np.asarray(raw, dtype=np.uint8)[:4 * (length + 1)].view('<u4').astype(np.int64)

    @staticmethod
    def decode_utf8(raw: bytes) -> str:
        try:
            return bytes(raw).decode('utf-8')
        except UnicodeDecodeError as e:
            raise DescriptorFormatError(f"Utf8 value is not valid UTF-8: {e}") from e

    @staticmethod
    def to_python(dtype: DataType, value: Any) -> Any:
        """numpy scalar to plain Python value."""
        if dtype is DataType.UTF8:
            return value
        if dtype is DataType.BOOL:
            return bool(value)
        if dtype is DataType.FLOAT64:
            return float(value)
        return int(value)
