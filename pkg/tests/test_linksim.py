from decimal import Decimal

import pytest

from telelink.config import Direction, Link, parse_topic_table
from telelink.linksim import JitterBurst, LinkProfile, LinkSim, Outage, TokenBucket

NS = 1_000_000_000


def table(text):
    return parse_topic_table(text)


def clean_profiles(latency_ms=0.0, loss=0.0, cap=None, bursts=(), outages=()):
    return {
        link: LinkProfile(
            link=link,
            base_latency_ms=latency_ms,
            loss_prob=loss,
            bandwidth_cap_mbits=cap,
            jitter_bursts=tuple(bursts),
            outages=tuple(outages),
        )
        for link in Link
    }


def test_identity_channel_delivers_everything_in_order():
    t = table("topic 1 a dir=up mbits=0.1 group=a links=5g mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(), seed=1)
    sim.arm_sources()
    deliveries = sim.step(NS)  # emissions at 0, 10ms, ..., 1000ms inclusive
    assert [d.message.seq for d in deliveries] == list(range(101))


def test_total_loss_delivers_nothing():
    t = table("topic 1 a dir=up mbits=0.1 group=a links=5g,2g4 mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(loss=1.0), seed=1)
    sim.arm_sources()
    assert sim.step(NS) == []
    counters = sim.link_counters[(1, Link.GHZ5)]
    assert counters.sent == counters.dropped_loss


def test_redundant_delivery_fraction_matches_analytic():
    t = table("topic 1 red dir=up mbits=0.08 group=a links=5g,2g4 mode=dedup rate=1000\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, loss=0.1), seed=42)
    sim.arm_sources()
    sim.step(20 * NS)
    topic = sim.topic_counters[1]
    fraction = topic.messages_delivered / topic.messages_sent
    assert fraction == pytest.approx(1 - 0.1 * 0.1, abs=0.01)


def test_latency_floor_never_violated():
    t = table("topic 1 a dir=up mbits=0.5 group=a links=5g mode=dedup rate=200\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, loss=0.3), seed=5)
    sim.arm_sources()
    deliveries = sim.step(5 * NS)
    assert deliveries
    assert all(d.t_ns - d.message.send_time_ns >= 2_000_000 for d in deliveries)


def test_burst_adds_latency_during_window():
    t = table("topic 1 a dir=up mbits=0.1 group=a links=5g mode=dedup rate=100\n")
    burst = JitterBurst(start_s=1.0, duration_s=1.0, added_latency_ms=150.0)
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, bursts=[burst]), seed=1)
    sim.arm_sources()
    deliveries = sim.step(3 * NS)
    for d in deliveries:
        latency_ms = (d.t_ns - d.message.send_time_ns) / 1e6
        if NS <= d.message.send_time_ns < 2 * NS:
            assert latency_ms == pytest.approx(152.0)
        else:
            assert latency_ms == pytest.approx(2.0)


def test_burst_loss_probability_applies():
    t = table("topic 1 a dir=up mbits=0.1 group=a links=5g mode=dedup rate=1000\n")
    burst = JitterBurst(start_s=1.0, duration_s=1.0, burst_loss_prob=1.0)
    sim = LinkSim(t, clean_profiles(latency_ms=1.0, bursts=[burst]), seed=1)
    sim.arm_sources()
    deliveries = sim.step(3 * NS)
    in_burst = [d for d in deliveries if NS <= d.message.send_time_ns < 2 * NS]
    assert in_burst == []
    assert len(deliveries) == pytest.approx(2000, abs=5)


def test_outage_and_no_handshake_recovery():
    t = table("topic 1 a dir=up mbits=0.1 group=a links=5g,2g4 mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, outages=[Outage(1.0, 5.0)]), seed=1)
    sim.arm_sources()
    sim.step(3 * NS)
    sim.reset_receiver(Direction.UP)  # endpoint recreated mid-outage
    deliveries = sim.step(5 * NS)
    post = [d for d in deliveries if d.t_ns >= 6 * NS]
    assert post
    # bound: send interval (10 ms) + base latency (2 ms) + 10 ms slack
    assert post[0].t_ns - 6 * NS <= (10 + 2 + 10) * 1_000_000


def test_conservation_per_flow():
    t = table(
        "topic 1 a dir=up mbits=0.4 group=a links=5g,2g4 mode=dedup rate=500\n"
        "topic 2 b dir=down mbits=0.4 group=b links=5g mode=latest rate=300\n"
    )
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, loss=0.2), seed=9)
    sim.arm_sources()
    sim.step(5 * NS)
    flight = sim.in_flight()
    for key, counters in sim.link_counters.items():
        assert counters.sent == (
            counters.delivered + counters.dropped_loss + counters.dropped_congestion + flight.get(key, 0)
        ), key


def test_deliveries_deterministic_for_seed():
    text = "topic 1 a dir=up mbits=0.2 group=a links=5g,2g4 mode=dedup rate=400\n"

    def run(seed):
        sim = LinkSim(table(text), clean_profiles(latency_ms=1.5, loss=0.1), seed=seed)
        sim.arm_sources()
        return [(d.t_ns, d.message.seq, d.link.value) for d in sim.step(3 * NS)]

    assert run(4) == run(4)
    assert run(4) != run(5)


def test_token_bucket_generous_cap_passes_everything():
    t = table("topic 1 big dir=down mbits=28.1 group=a links=5g mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, cap=Decimal("100")), seed=1)
    sim.arm_sources()
    sim.step(3 * NS)
    counters = sim.link_counters[(1, Link.GHZ5)]
    assert counters.dropped_congestion == 0
    assert counters.dropped_loss == 0


def test_token_bucket_tight_cap_sheds_half():
    t = table("topic 1 big dir=down mbits=28.1 group=a links=5g mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, cap=Decimal("14.0")), seed=1)
    sim.arm_sources()
    sim.step(10 * NS)
    counters = sim.link_counters[(1, Link.GHZ5)]
    carried_mbits = counters.payload_bits_delivered / 10 / 1e6
    assert carried_mbits == pytest.approx(14.0, rel=0.02)
    drop_fraction = counters.dropped_congestion / counters.sent
    assert drop_fraction == pytest.approx(0.5, abs=0.03)


def test_token_bucket_zero_offered():
    bucket = TokenBucket(14_000_000)
    assert bucket.try_consume(0, now_ns=0)
    t = table("topic 1 idle dir=down mbits=0 group=a links=5g mode=latest rate=10\n")
    sim = LinkSim(t, clean_profiles(latency_ms=2.0, cap=Decimal("14.0")), seed=1)
    sim.arm_sources()
    sim.step(NS)
    counters = sim.link_counters[(1, Link.GHZ5)]
    assert counters.payload_bits_delivered == 0
    assert counters.dropped_congestion == 0


def test_token_bucket_burst_depth():
    bucket = TokenBucket(10_000_000, depth_ns=100_000_000)  # 10 Mbit/s, 1 Mbit burst
    assert bucket.try_consume(1_000_000, now_ns=0)  # full burst available at start
    assert not bucket.try_consume(1, now_ns=0)
    assert bucket.try_consume(500_000, now_ns=50_000_000)  # refilled at rate


def test_enabling_both_links_duplicates_every_packet():
    from telelink.config import set_group_links

    t = table("topic 1 ctrl dir=up mbits=0.1 group=ctrl links=5g mode=latest rate=100\n")
    sim = LinkSim(t, clean_profiles(latency_ms=1.0), seed=3)
    sim.arm_sources()
    sim.step(NS)
    assert (1, Link.GHZ24) not in sim.link_counters
    before_5g = sim.link_counters[(1, Link.GHZ5)].sent
    sim.set_table(set_group_links(sim.table, "ctrl", {Link.GHZ5, Link.GHZ24}))
    sim.step(NS)
    after_5g = sim.link_counters[(1, Link.GHZ5)].sent
    after_2g4 = sim.link_counters[(1, Link.GHZ24)].sent
    assert after_5g - before_5g == after_2g4  # every later packet rides both carriers
    assert after_2g4 > 0


def test_signal_model_and_outage():
    profile = LinkProfile(
        link=Link.GHZ5,
        outages=(Outage(2.0, 1.0),),
        signal_model=((0.0, 1.0), (5.0, 0.4)),
    )
    assert profile.signal(0) == 1.0
    assert profile.signal(int(2.5 * NS)) == 0.0  # outage wins
    assert profile.signal(6 * NS) == 0.4


def test_profile_validation():
    with pytest.raises(ValueError):
        LinkProfile(link=Link.GHZ5, loss_prob=1.5)
    with pytest.raises(ValueError):
        LinkProfile(link=Link.GHZ5, jitter_bursts=(JitterBurst(0, -1),))
