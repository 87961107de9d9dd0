import io
import struct

import pytest

from grcomp import ContainerHeader, StrategyConfig, compress
from grcomp.codec import (
    END_OF_STREAM,
    HEADER_SIZE,
    INTERNAL,
    SEGMENT_END,
    EventReader,
    EventWriter,
    Leaf,
    iter_segments,
    label_width,
)
from grcomp.errors import CorruptStreamError, FramingError, TruncatedStreamError
from grcomp.strategies import Mode


def golden_ab() -> bytes:
    header = b"GRC1" + bytes([1, 0]) + struct.pack("<HQIQQ", 256, 0, 0, 0, 2)
    # 0 01100001 | 0 01100010 | 1 | 1 | pad: 0011 0000 1001 1000 1011 0000
    return header + bytes([0x30, 0x98, 0xB0])


def test_golden_ab_container():
    assert compress(b"ab") == golden_ab()


def test_header_roundtrip():
    h = ContainerHeader.for_config(StrategyConfig.freq(1 << 16, 0.3), original_length=99)
    raw = h.pack()
    assert len(raw) == HEADER_SIZE == 36
    back = ContainerHeader.unpack(raw)
    assert back == h
    assert back.eps_ppm == 3000
    assert back.config() == StrategyConfig.freq(1 << 16, 0.3)


@pytest.mark.parametrize(
    "patch",
    [
        lambda r: b"XXXX" + r[4:],
        lambda r: r[:4] + b"\x09" + r[5:],
        lambda r: r[:5] + b"\x07" + r[6:],
        lambda r: r[:6] + struct.pack("<H", 2) + r[8:],
        lambda r: r[:8] + struct.pack("<Q", 5) + r[16:],  # k set in plain mode
    ],
)
def test_bad_headers(patch):
    raw = ContainerHeader(Mode.PLAIN).pack()
    with pytest.raises(CorruptStreamError):
        ContainerHeader.unpack(patch(raw))


def test_short_header():
    with pytest.raises(TruncatedStreamError):
        ContainerHeader.unpack(b"GRC1")


def test_label_width():
    assert label_width(0) == 8
    assert label_width(1) == 9
    assert label_width(256) == 9
    assert label_width(257) == 10


def test_width_grows_after_256_creations():
    buf = io.BytesIO()
    w = EventWriter(buf)
    w.created = 255
    w.emit_leaf(97)
    assert int(w.wm[3]) == 1 + 9
    w.created = 256
    w.emit_leaf(511)
    assert int(w.wm[3]) == 2 * (1 + 9)
    w.created = 257
    w.emit_leaf(512)
    assert int(w.wm[3]) == 2 * (1 + 9) + 1 + 10


def test_ab_events_decode():
    reader = EventReader(golden_ab()[HEADER_SIZE:])
    events = [reader.read_event(0), reader.read_event(0), reader.read_event(0)]
    assert events == [Leaf(97), Leaf(98), INTERNAL]
    assert reader.read_event(1) is SEGMENT_END
    assert reader.read_event(1) is END_OF_STREAM


def test_single_terminal_segment():
    buf = io.BytesIO()
    w = EventWriter(buf)
    w.emit_leaf(97)
    w.end_segment()
    w.close()
    reader = EventReader(buf.getvalue())
    assert reader.read_event(0) == Leaf(97)
    assert reader.read_event(0) is SEGMENT_END
    assert reader.read_event(0) is END_OF_STREAM


def test_truncated_label():
    with pytest.raises(TruncatedStreamError):
        EventReader(golden_ab()[HEADER_SIZE : HEADER_SIZE + 1]).read_event(0)
    reader = EventReader(golden_ab()[HEADER_SIZE : HEADER_SIZE + 2])
    assert reader.read_event(0) == Leaf(97)
    with pytest.raises(TruncatedStreamError):
        reader.read_event(0)


def test_truncated_inside_segment():
    payload = compress(b"abcabcabd" * 3)[HEADER_SIZE:]
    reader = EventReader(payload[:-1])
    created = 0
    with pytest.raises(TruncatedStreamError):
        while True:
            ev = reader.read_event(created)
            if ev is INTERNAL:
                created += 1
            assert ev is not END_OF_STREAM


def test_corrupt_padding():
    payload = bytearray(golden_ab()[HEADER_SIZE:])
    payload[-1] |= 1
    reader = EventReader(bytes(payload))
    for created in (0, 0, 0, 1):
        reader.read_event(created)
    with pytest.raises(CorruptStreamError):
        reader.read_event(1)


def test_segment_cannot_start_with_internal():
    with pytest.raises(CorruptStreamError):
        EventReader(b"\x80").read_event(0)


def test_writer_framing_errors():
    w = EventWriter(io.BytesIO())
    with pytest.raises(FramingError):
        w.end_segment()
    w.emit_leaf(1)
    with pytest.raises(FramingError):
        w.emit_internal()
    with pytest.raises(FramingError):
        w.emit_leaf(300)
    with pytest.raises(FramingError):
        w.close()


def test_iter_segments_resets_numbering_in_block_mode():
    blob = compress(b"abcd" * 8, StrategyConfig.block(16))
    segs = list(iter_segments(blob[HEADER_SIZE:], Mode.BLOCK))
    assert len(segs) == 2
    assert segs[0] == segs[1]  # same text, same fresh numbering
