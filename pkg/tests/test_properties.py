import io

from hypothesis import given
from hypothesis import strategies as st

from grcomp import StrategyConfig, compress, decompress, landmark
from grcomp.codec import (
    END_OF_STREAM,
    HEADER_SIZE,
    INTERNAL,
    SEGMENT_END,
    EventReader,
    EventWriter,
    Leaf,
    iter_segments,
)
from grcomp.strategies import Mode
from grcomp.testkit.oracle import run_oracle
from grcomp.testkit.probe import compress_run, decompress_run

configs = st.one_of(
    st.just(StrategyConfig.plain()),
    st.builds(StrategyConfig.freq, st.integers(2, 64), st.sampled_from([0.3, 10.0, 50.0, 99.0])),
    st.builds(StrategyConfig.lossy, st.integers(1, 200)),
    st.builds(StrategyConfig.block, st.integers(1, 200)),
)

texts = st.one_of(
    st.binary(max_size=2000),
    st.binary(min_size=1, max_size=8).flatmap(
        lambda unit: st.integers(1, 300).map(lambda n: unit * n)
    ),
    st.lists(st.sampled_from(b"ACGT"), max_size=3000).map(bytes),
)


@given(texts, configs)
def test_roundtrip(data, config):
    assert decompress(compress(data, config)) == data


@given(texts, configs)
def test_mirroring_and_bit_accounting(data, config):
    run = compress_run(data, config, snapshots=True)
    text, snaps = decompress_run(run.container)
    assert text == data
    assert snaps == run.snapshots
    res = run_oracle(run.container)
    assert res.text == data
    for seg in res.segments:
        assert seg.structure_bits == 2 * seg.internals + 2
        assert seg.leaves == seg.internals + 1
    used = sum(s.structure_bits + s.label_bits for s in res.segments)
    assert 0 <= res.payload_bits - used <= 7


@given(st.lists(st.integers(-1, 1 << 40), min_size=4, max_size=4))
def test_landmark_is_pure(window):
    first = landmark(*window)
    assert all(landmark(*window) == first for _ in range(3))


@st.composite
def segments(draw):
    """Random valid post-order event sequences, as a list of segments."""
    out = []
    created = 0
    for _ in range(draw(st.integers(0, 6))):
        events = []
        open_ = 0
        for _ in range(draw(st.integers(0, 40))):
            if open_ >= 2 and draw(st.booleans()):
                events.append("I")
                open_ -= 1
                created += 1
            else:
                events.append(draw(st.integers(0, 256 + created - 1)))
                open_ += 1
        if open_ == 0:
            events.append(draw(st.integers(0, 255)))
            open_ = 1
        while open_ > 1:
            events.append("I")
            open_ -= 1
            created += 1
        out.append(events)
    return out


@given(segments())
def test_codec_encode_decode(segs):
    buf = io.BytesIO()
    w = EventWriter(buf, buffer_size=256)
    for events in segs:
        for ev in events:
            w.emit_internal() if ev == "I" else w.emit_leaf(ev)
        w.end_segment()
    nbits = w.close()
    payload = buf.getvalue()
    assert len(payload) == (nbits + 7) // 8
    reader = EventReader(payload)
    created = 0
    for events in segs:
        for ev in events:
            got = reader.read_event(created)
            if ev == "I":
                assert got is INTERNAL
                created += 1
            else:
                assert got == Leaf(ev)
        assert reader.read_event(created) is SEGMENT_END
    assert reader.read_event(created) is END_OF_STREAM


@given(st.binary(min_size=1, max_size=400), st.integers(1, 50))
def test_block_segments_are_independent(data, ell):
    # with the dictionary and numbering reset, the last block encodes exactly
    # as it would on its own
    cut = ell * ((len(data) - 1) // ell)
    whole = list(iter_segments(compress(data, StrategyConfig.block(ell))[HEADER_SIZE:], Mode.BLOCK))
    alone = list(iter_segments(compress(data[cut:], StrategyConfig.block(ell))[HEADER_SIZE:], Mode.BLOCK))
    assert whole[-1] == alone[-1]
