import random
from itertools import permutations
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telelink import wire

VECTORS = Path(__file__).parent / "data" / "wire_vectors.txt"


def make_header(topic=0, seq=0, frag_index=0, frag_count=1, t=0, payload=b"", flags=0):
    return wire.PacketHeader(
        topic_id=topic,
        seq=seq,
        frag_index=frag_index,
        frag_count=frag_count,
        send_time_ns=t,
        payload_len=len(payload),
        flags=flags,
    )


def test_empty_payload_header_layout():
    raw = wire.encode_packet(make_header(), b"")
    assert len(raw) == 24
    assert raw[:3] == b"\x4e\x41\x01"
    assert raw.hex() == "4e4101000000000000010000000000000000000000000000"


def test_golden_vectors():
    for line in VECTORS.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        hex_raw, topic, seq, fi, fc, t, flags, payload_hex = line.split()
        payload = b"" if payload_hex == "-" else bytes.fromhex(payload_hex)
        header = make_header(int(topic), int(seq), int(fi), int(fc), int(t), payload, int(flags))
        assert wire.encode_packet(header, payload).hex() == hex_raw
        decoded_header, decoded_payload = wire.decode_packet(bytes.fromhex(hex_raw))
        assert decoded_header == header
        assert decoded_payload == payload


def test_roundtrip_randomized():
    rng = random.Random(1234)
    for _ in range(10_000):
        frag_count = rng.randint(1, 8)
        payload = rng.randbytes(rng.randint(0, wire.MTU_PAYLOAD))
        header = make_header(
            topic=rng.randint(0, 0xFFFF),
            seq=rng.randint(0, 0xFFFFFFFF),
            frag_index=rng.randint(0, frag_count - 1),
            frag_count=frag_count,
            t=rng.randint(0, 2**64 - 1),
            payload=payload,
            flags=rng.randint(0, 3),
        )
        decoded = wire.decode_packet(wire.encode_packet(header, payload))
        assert decoded == (header, payload)


def test_payload_too_large():
    payload = bytes(1401)
    with pytest.raises(wire.PayloadTooLarge):
        wire.encode_packet(make_header(payload=payload), payload)


def test_payload_len_mismatch_rejected():
    with pytest.raises(ValueError):
        wire.encode_packet(make_header(payload=b"abc"), b"ab")


def test_decode_truncated_below_header():
    with pytest.raises(wire.Truncated):
        wire.decode_packet(bytes(23))


def test_decode_bad_magic():
    raw = bytearray(wire.encode_packet(make_header(), b""))
    raw[0] ^= 0xFF
    with pytest.raises(wire.BadMagic):
        wire.decode_packet(bytes(raw))


def test_decode_bad_version():
    raw = bytearray(wire.encode_packet(make_header(), b""))
    raw[2] = 9
    with pytest.raises(wire.BadVersion):
        wire.decode_packet(bytes(raw))


def test_decode_truncated_payload():
    payload = b"x" * 100
    raw = wire.encode_packet(make_header(payload=payload), payload)
    with pytest.raises(wire.Truncated):
        wire.decode_packet(raw[:50])


def test_decode_trailing_bytes_ignored():
    payload = b"abc"
    raw = wire.encode_packet(make_header(payload=payload), payload)
    header, decoded = wire.decode_packet(raw + b"garbage")
    assert decoded == payload
    assert header.payload_len == 3


def test_decode_is_total_on_fuzz():
    rng = random.Random(0xF00D)
    for _ in range(20_000):
        raw = rng.randbytes(rng.randint(0, 80))
        try:
            wire.decode_packet(raw)
        except wire.WireError:
            pass


def test_decode_survives_bitflips_of_valid_packets():
    rng = random.Random(99)
    payload = b"p" * 64
    raw = wire.encode_packet(make_header(payload=payload), payload)
    for _ in range(2_000):
        mutated = bytearray(raw)
        for _ in range(rng.randint(1, 6)):
            mutated[rng.randrange(len(mutated))] ^= 1 << rng.randrange(8)
        try:
            wire.decode_packet(bytes(mutated))
        except wire.WireError:
            pass


def test_fragment_empty_message():
    msg = wire.Message(topic_id=1, seq=0, send_time_ns=0, payload=b"")
    frags = wire.fragment_message(msg)
    assert len(frags) == 1
    assert frags[0][0].frag_count == 1
    assert frags[0][0].is_last_fragment()


def test_fragment_3500_at_1400():
    payload = random.Random(7).randbytes(3500)
    msg = wire.Message(topic_id=1, seq=5, send_time_ns=0, payload=payload)
    frags = wire.fragment_message(msg, 1400)
    assert [len(chunk) for _, chunk in frags] == [1400, 1400, 700]
    assert all(h.frag_count == 3 for h, _ in frags)
    assert [h.frag_index for h, _ in frags] == [0, 1, 2]
    assert [h.is_last_fragment() for h, _ in frags] == [False, False, True]
    assert b"".join(chunk for _, chunk in frags) == payload


def test_fragment_too_many():
    msg = wire.Message(topic_id=1, seq=0, send_time_ns=0, payload=bytes(70_000))
    with pytest.raises(wire.TooManyFragments):
        wire.fragment_message(msg, 1)


def test_fragment_message_ceiling():
    msg = wire.Message(topic_id=1, seq=0, send_time_ns=0, payload=bytes(wire.MAX_MESSAGE_BYTES + 1))
    with pytest.raises(wire.PayloadTooLarge):
        wire.fragment_message(msg)


def test_reassemble_single_fragment_immediate():
    store = wire.FragmentStore()
    msg = wire.Message(topic_id=2, seq=9, send_time_ns=4, payload=b"one")
    [(header, chunk)] = wire.fragment_message(msg)
    assert wire.reassemble(store, header, chunk, now_ns=0) == msg
    assert len(store) == 0


@pytest.mark.parametrize("n_frags", [2, 3, 4])
def test_reassemble_all_arrival_permutations(n_frags):
    payload = random.Random(n_frags).randbytes(n_frags * 100 - 30)
    msg = wire.Message(topic_id=3, seq=77, send_time_ns=11, payload=payload)
    frags = wire.fragment_message(msg, 100)
    assert len(frags) == n_frags
    for order in permutations(range(n_frags)):
        store = wire.FragmentStore()
        results = [store.offer(*frags[i], now_ns=0) for i in order]
        assert results[:-1] == [None] * (n_frags - 1)
        assert results[-1] == msg
        assert len(store) == 0


def test_reassemble_duplicate_fragments_idempotent():
    payload = random.Random(5).randbytes(250)
    msg = wire.Message(topic_id=3, seq=8, send_time_ns=0, payload=payload)
    frags = wire.fragment_message(msg, 100)
    store = wire.FragmentStore()
    # duplicate every fragment before completion; only the last unique completes
    assert store.offer(*frags[0], now_ns=0) is None
    assert store.offer(*frags[0], now_ns=0) is None
    assert store.offer(*frags[1], now_ns=0) is None
    assert store.offer(*frags[1], now_ns=0) is None
    assert store.offer(*frags[2], now_ns=0) == msg


def test_reassemble_expiry_discards_incomplete():
    payload = bytes(300)
    msg = wire.Message(topic_id=3, seq=8, send_time_ns=0, payload=payload)
    frags = wire.fragment_message(msg, 100)
    store = wire.FragmentStore()
    store.offer(*frags[0], now_ns=0)
    store.offer(*frags[1], now_ns=0)
    assert len(store) == 1
    store.expire(now_ns=600_000_000)
    assert len(store) == 0
    # the late fragment alone cannot complete the message anymore
    assert store.offer(*frags[2], now_ns=700_000_000) is None


def test_reassemble_inconsistent_frag_count():
    store = wire.FragmentStore()
    a = make_header(topic=1, seq=1, frag_index=0, frag_count=3, payload=b"x")
    b = make_header(topic=1, seq=1, frag_index=1, frag_count=4, payload=b"y")
    store.offer(a, b"x", now_ns=0)
    with pytest.raises(wire.InconsistentFragCount):
        store.offer(b, b"y", now_ns=0)


@settings(max_examples=80, derandomize=True, deadline=None)
@given(payload=st.binary(max_size=65536), mtu=st.integers(min_value=1, max_value=1400))
def test_fragment_reassemble_roundtrip_property(payload, mtu):
    msg = wire.Message(topic_id=9, seq=1, send_time_ns=0, payload=payload)
    frags = wire.fragment_message(msg, mtu)
    assert len(frags) == max(1, -(-len(payload) // mtu))
    store = wire.FragmentStore()
    result = None
    for header, chunk in frags:
        assert result is None
        result = store.offer(header, chunk, now_ns=0)
    assert result == msg
