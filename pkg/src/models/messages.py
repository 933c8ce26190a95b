"""
Cluster runtime messages and their frame encoding.

Frame: u32 length of (kind + body) | u8 kind | body, little-endian. The
ledger charges a message for its body bytes; the five frame bytes are
transport overhead.
"""
from dataclasses import dataclass, field
from typing import ClassVar, Dict, Tuple, Type

import numpy as np

from ..utils.wire import WireReader, WireWriter
from .errors import DescriptorFormatError


FRAME_HEADER_BYTES = 5


@dataclass(frozen=True)
class Message:
    """Base class; subclasses set KIND and implement the body codec."""
    KIND: ClassVar[int] = 0

    def write_body(self, writer: WireWriter) -> None:
        pass

    @classmethod
    def read_body(cls, reader: WireReader) -> 'Message':
        return cls()

    def wire_size(self) -> int:
        """Body bytes charged on the ethernet fabric."""
        writer = WireWriter()
        self.write_body(writer)
        return len(writer)

    def frame_size(self) -> int:
        return FRAME_HEADER_BYTES + self.wire_size()

    def encode(self) -> bytes:
        body = WireWriter()
        self.write_body(body)
        frame = WireWriter()
        frame.write_uint32(len(body) + 1)
        frame.write_uint8(self.KIND)
        frame.write_raw(body.getvalue())
        return frame.getvalue()


@dataclass(frozen=True)
class AllocRequest(Message):
    KIND: ClassVar[int] = 1
    req_id: int
    size: int

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id).write_uint64(self.size)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'AllocRequest':
        return cls(reader.read_uint64('req_id'), reader.read_uint64('size'))


@dataclass(frozen=True)
class AllocResponse(Message):
    """Allocated address, or oom=True with addr 0."""
    KIND: ClassVar[int] = 2
    req_id: int
    addr: int
    oom: bool = False

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id).write_uint64(self.addr).write_uint8(int(self.oom))

    @classmethod
    def read_body(cls, reader: WireReader) -> 'AllocResponse':
        return cls(reader.read_uint64('req_id'), reader.read_uint64('addr'),
                   bool(reader.read_uint8('oom')))


@dataclass(frozen=True)
class FreeRequest(Message):
    KIND: ClassVar[int] = 3
    req_id: int
    addr: int

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id).write_uint64(self.addr)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'FreeRequest':
        return cls(reader.read_uint64('req_id'), reader.read_uint64('addr'))


@dataclass(frozen=True)
class FreeResponse(Message):
    """ok=False carries the error text of a rejected free."""
    KIND: ClassVar[int] = 4
    req_id: int
    ok: bool
    error: str = ''

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id).write_uint8(int(self.ok)).write_string16(self.error)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'FreeResponse':
        return cls(reader.read_uint64('req_id'), bool(reader.read_uint8('ok')),
                   reader.read_string16('error'))


@dataclass(frozen=True)
class FlushRequest(Message):
    KIND: ClassVar[int] = 5
    req_id: int
    addr: int
    length: int

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id).write_uint64(self.addr).write_uint64(self.length)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'FlushRequest':
        return cls(reader.read_uint64('req_id'), reader.read_uint64('addr'),
                   reader.read_uint64('length'))


@dataclass(frozen=True)
class FlushAck(Message):
    KIND: ClassVar[int] = 6
    req_id: int

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.req_id)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'FlushAck':
        return cls(reader.read_uint64('req_id'))


@dataclass(frozen=True)
class SealNotice(Message):
    KIND: ClassVar[int] = 7
    addr: int
    length: int

    def write_body(self, writer: WireWriter) -> None:
        writer.write_uint64(self.addr).write_uint64(self.length)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'SealNotice':
        return cls(reader.read_uint64('addr'), reader.read_uint64('length'))


@dataclass(frozen=True)
class DescriptorBroadcast(Message):
    """Body is the serialized descriptor itself; the frame length delimits it."""
    KIND: ClassVar[int] = 8
    payload: bytes

    def write_body(self, writer: WireWriter) -> None:
        writer.write_raw(self.payload)

    @classmethod
    def read_body(cls, reader: WireReader) -> 'DescriptorBroadcast':
        return cls(reader.read_raw(reader.remaining, 'descriptor'))

    def wire_size(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class FullCopy(Message):
    """
    Ethernet baseline: descriptor plus the contents of every buffer.

    Buffers are numpy byte arrays; zero-stride arrays stand in for data
    that is not materialized (cost-only runs).
    """
    KIND: ClassVar[int] = 9
    descriptor: bytes
    buffers: Tuple[np.ndarray, ...] = field(default=(), compare=False)

    def write_body(self, writer: WireWriter) -> None:
        writer.write_blob32(self.descriptor)
        writer.write_uint32(len(self.buffers))
        for buf in self.buffers:
            writer.write_uint64(buf.nbytes)
            writer.write_raw(np.ascontiguousarray(buf).tobytes())

    @classmethod
    def read_body(cls, reader: WireReader) -> 'FullCopy':
        descriptor = reader.read_blob32('descriptor')
        count = reader.read_uint32('buffer count')
        buffers = tuple(np.frombuffer(reader.read_raw(reader.read_uint64('buffer length'), 'buffer'),
                                      dtype=np.uint8)
                        for _ in range(count))
        return cls(descriptor, buffers)

    def wire_size(self) -> int:
        return 4 + len(self.descriptor) + 4 + sum(8 + int(b.nbytes) for b in self.buffers)


@dataclass(frozen=True)
class Shutdown(Message):
    KIND: ClassVar[int] = 10


MESSAGE_TYPES: Dict[int, Type[Message]] = {
    cls.KIND: cls for cls in (AllocRequest, AllocResponse, FreeRequest, FreeResponse,
                              FlushRequest, FlushAck, SealNotice, DescriptorBroadcast,
                              FullCopy, Shutdown)
}


def decode_frame(frame: bytes) -> Message:
    """
    Decode one length-prefixed frame.

    Raises:
        DescriptorFormatError: Truncated frame, unknown kind or trailing bytes
    """
    reader = WireReader(frame)
    length = reader.read_uint32('frame length')
    if length < 1 or length != reader.remaining:
        raise DescriptorFormatError(
            f"frame length {length} does not match {reader.remaining} bytes received")
    kind = reader.read_uint8('kind')
    cls = MESSAGE_TYPES.get(kind)
    if cls is None:
        raise DescriptorFormatError(f"unknown message kind {kind}")
    message = cls.read_body(reader)
    reader.expect_end()
    return message
