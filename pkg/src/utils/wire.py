"""Little-endian binary stream helpers for the descriptor and message codecs."""
import struct
from typing import Union

from ..models.errors import DescriptorFormatError


_U8 = struct.Struct('<B')
_U16 = struct.Struct('<H')
_U32 = struct.Struct('<I')
_U64 = struct.Struct('<Q')


class WireWriter:
    """Append-only little-endian encoder."""

    def __init__(self):
        self._parts = bytearray()

    def __len__(self) -> int:
        return len(self._parts)

    def write_uint8(self, value: int) -> 'WireWriter':
        self._parts += _U8.pack(value)
        return self

    def write_uint16(self, value: int) -> 'WireWriter':
        self._parts += _U16.pack(value)
        return self

    def write_uint32(self, value: int) -> 'WireWriter':
        self._parts += _U32.pack(value)
        return self

    def write_uint64(self, value: int) -> 'WireWriter':
        self._parts += _U64.pack(value)
        return self

    def write_raw(self, data: Union[bytes, bytearray, memoryview]) -> 'WireWriter':
        self._parts += data
        return self

    def write_string16(self, value: str) -> 'WireWriter':
        """u16 byte length followed by UTF-8 bytes."""
        encoded = value.encode('utf-8')
        if len(encoded) > 0xFFFF:
            raise DescriptorFormatError(f"String too long for the wire format: {len(encoded)} bytes")
        self.write_uint16(len(encoded))
        return self.write_raw(encoded)

    def write_blob32(self, data: Union[bytes, bytearray, memoryview]) -> 'WireWriter':
        """u32 byte length followed by the bytes."""
        self.write_uint32(len(data))
        return self.write_raw(data)

    def getvalue(self) -> bytes:
        return bytes(self._parts)


class WireReader:
    """
    Bounds-checked little-endian decoder.

    Every read past the end raises DescriptorFormatError('truncated ...').
    """

    def __init__(self, data: Union[bytes, bytearray, memoryview]):
        self._data = memoryview(data)
        self.position = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self.position

    def _take(self, size: int, what: str) -> memoryview:
        if self.position + size > len(self._data):
            raise DescriptorFormatError(
                f"truncated input: need {size} bytes for {what} at offset {self.position}, "
                f"{self.remaining} left")
        chunk = self._data[self.position:self.position + size]
        self.position += size
        return chunk

    def read_uint8(self, what: str = 'u8') -> int:
        return _U8.unpack(self._take(1, what))[0]

    def read_uint16(self, what: str = 'u16') -> int:
        return _U16.unpack(self._take(2, what))[0]

    def read_uint32(self, what: str = 'u32') -> int:
        return _U32.unpack(self._take(4, what))[0]

    def read_uint64(self, what: str = 'u64') -> int:
        return _U64.unpack(self._take(8, what))[0]

    def read_raw(self, size: int, what: str = 'bytes') -> bytes:
        return bytes(self._take(size, what))

    def read_string16(self, what: str = 'string') -> str:
        size = self.read_uint16(f"{what} length")
        raw = self.read_raw(size, what)
        try:
            return raw.decode('utf-8')
        except UnicodeDecodeError as e:
            raise DescriptorFormatError(f"{what} is not valid UTF-8: {e}")

    def read_blob32(self, what: str = 'blob') -> bytes:
        size = self.read_uint32(f"{what} length")
        return self.read_raw(size, what)

    def expect_end(self) -> None:
        if self.remaining:
            raise DescriptorFormatError(f"{self.remaining} trailing bytes after end of message")
