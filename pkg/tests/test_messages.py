"""Tests for runtime message framing."""
import numpy as np
import pytest

from src.models.errors import DescriptorFormatError
from src.models.messages import (
    AllocRequest, AllocResponse, DescriptorBroadcast, FlushAck, FlushRequest, FreeRequest,
    FreeResponse, FullCopy, MESSAGE_TYPES, Message, SealNotice, Shutdown, decode_frame,
)


@pytest.mark.parametrize("message", [
    AllocRequest(1, 4096),
    AllocResponse(2, 1 << 33),
    AllocResponse(3, 0, oom=True),
    FreeRequest(4, 256),
    FreeResponse(5, False, "sealed"),
    FlushRequest(6, 128, 1 << 30),
    FlushAck(7),
    SealNotice(640, 24),
    DescriptorBroadcast(b'CSMT' + bytes(51)),
    Shutdown(),
])
def test_frame_decodes_to_same_message(message):
    frame = message.encode()
    assert len(frame) == message.frame_size() == message.wire_size() + 5
    assert decode_frame(frame) == message


def test_body_sizes():
    assert AllocRequest(1, 1).wire_size() == 16
    assert FlushAck(1).wire_size() == 8
    assert SealNotice(0, 1).wire_size() == 16
    assert DescriptorBroadcast(bytes(55)).wire_size() == 55
    assert Shutdown().wire_size() == 0


def test_full_copy_carries_buffers():
    buffers = (np.arange(10, dtype=np.uint8), np.zeros(3, dtype=np.uint8))
    message = FullCopy(b'desc', buffers)
    assert message.wire_size() == 4 + 4 + 4 + 8 + 10 + 8 + 3
    decoded = decode_frame(message.encode())
    assert decoded.descriptor == b'desc'
    assert [b.tolist() for b in decoded.buffers] == [b.tolist() for b in buffers]


def test_full_copy_size_without_materializing():
    big = np.broadcast_to(np.zeros(1, dtype=np.uint8), (1 << 28,))
    assert FullCopy(b'', (big,)).wire_size() == 4 + 4 + 8 + (1 << 28)


def test_bad_frames():
    frame = AllocRequest(1, 2).encode()
    with pytest.raises(DescriptorFormatError):
        decode_frame(frame[:-1])
    with pytest.raises(DescriptorFormatError):
        decode_frame(frame + b'\x00')
    with pytest.raises(DescriptorFormatError, match="unknown message kind"):
        decode_frame(b'\x01\x00\x00\x00\x63')


def test_every_message_kind_is_registered():
    kinds = {cls.KIND: cls for cls in Message.__subclasses__()}
    assert MESSAGE_TYPES == kinds
    assert sorted(MESSAGE_TYPES) == list(range(1, 11))
