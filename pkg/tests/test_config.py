import random
from decimal import Decimal

import pytest

from telelink.config import (
    ConfigSyntaxError,
    Direction,
    DuplicateTopicId,
    EmptyLinkSet,
    Link,
    UnknownGroup,
    UnknownLinkName,
    aggregate_bandwidth,
    format_topic_table,
    parse_topic_table,
    set_group_links,
)

BOTH = frozenset({Link.GHZ5, Link.GHZ24})


def test_finals_table_shape(finals_table):
    assert len(finals_table.topics) == 10
    directions = [t.direction for t in finals_table.topics]
    assert directions.count(Direction.DOWN) == 6
    assert directions.count(Direction.UP) == 4
    assert len({t.topic_id for t in finals_table.topics}) == 10


def test_finals_budget_totals_exact(finals_table):
    agg = aggregate_bandwidth(finals_table)
    assert agg[(Direction.DOWN, Link.GHZ5)] == Decimal("28.1")
    assert agg[(Direction.DOWN, Link.GHZ24)] == Decimal("6.3")
    assert agg[(Direction.UP, Link.GHZ5)] == Decimal("6.7")
    assert agg[(Direction.UP, Link.GHZ24)] == Decimal("11.0")


def test_empty_file_is_valid():
    table = parse_topic_table("# nothing but comments\n\n")
    assert table.topics == ()
    totals = aggregate_bandwidth(table)
    assert all(v == 0 for v in totals.values())


def test_duplicate_topic_id_reports_second_line():
    text = (
        "topic 7 a dir=down mbits=1.0 group=a links=5g mode=latest rate=10\n"
        "topic 7 b dir=down mbits=1.0 group=b links=5g mode=latest rate=10\n"
    )
    with pytest.raises(DuplicateTopicId) as err:
        parse_topic_table(text)
    assert err.value.line == 2


def test_empty_link_set_rejected():
    with pytest.raises(EmptyLinkSet):
        parse_topic_table("topic 1 a dir=down mbits=1.0 group=a links= mode=latest rate=10\n")


def test_unknown_link_name():
    with pytest.raises(UnknownLinkName) as err:
        parse_topic_table("topic 1 a dir=down mbits=1.0 group=a links=6g mode=latest rate=10\n")
    assert err.value.line == 1


@pytest.mark.parametrize(
    "line",
    [
        "not_a_topic 1 a",
        "topic x a dir=down mbits=1.0 group=a links=5g mode=latest rate=10",
        "topic 1 a dir=sideways mbits=1.0 group=a links=5g mode=latest rate=10",
        "topic 1 a dir=down mbits=fast group=a links=5g mode=latest rate=10",
        "topic 1 a dir=down mbits=1.0 group=a links=5g mode=latest",
        "topic 1 a dir=down mbits=1.0 group=a links=5g mode=latest rate=audio:48000",
        "topic 1 a dir=down mbits=1.0 group=a links=5g mode=maybe rate=10",
    ],
)
def test_syntax_errors_carry_line_number(line):
    with pytest.raises(ConfigSyntaxError) as err:
        parse_topic_table("# leading comment\n" + line + "\n")
    assert err.value.line == 2


def test_group_with_mixed_link_sets_rejected():
    text = (
        "topic 1 a dir=down mbits=1.0 group=g links=5g mode=latest rate=10\n"
        "topic 2 b dir=down mbits=1.0 group=g links=2g4 mode=latest rate=10\n"
    )
    with pytest.raises(Exception, match="mixes link sets"):
        parse_topic_table(text)


def test_topic_on_both_links_counts_on_each_carrier():
    table = parse_topic_table("topic 1 a dir=down mbits=2.5 group=a links=5g,2g4 mode=dedup rate=10\n")
    agg = aggregate_bandwidth(table)
    assert agg[(Direction.DOWN, Link.GHZ5)] == Decimal("2.5")
    assert agg[(Direction.DOWN, Link.GHZ24)] == Decimal("2.5")


def test_set_group_links_moves_hand_camera(finals_table):
    moved = set_group_links(finals_table, "hand_camera", {Link.GHZ5})
    agg = aggregate_bandwidth(moved)
    assert agg[(Direction.DOWN, Link.GHZ5)] == Decimal("33.6")
    assert agg[(Direction.DOWN, Link.GHZ24)] == Decimal("0.8")
    # original table untouched
    assert aggregate_bandwidth(finals_table)[(Direction.DOWN, Link.GHZ5)] == Decimal("28.1")


def test_set_group_links_idempotent(finals_table):
    same = set_group_links(finals_table, "arm_control", BOTH)
    assert same == finals_table


def test_set_group_links_errors(finals_table):
    with pytest.raises(UnknownGroup):
        set_group_links(finals_table, "no_such_group", {Link.GHZ5})
    with pytest.raises(EmptyLinkSet):
        set_group_links(finals_table, "arm_control", set())


def test_set_group_links_total_shift_matches_group_sum(finals_table):
    before = aggregate_bandwidth(finals_table)
    moved = set_group_links(finals_table, "audio_up", {Link.GHZ5})
    after = aggregate_bandwidth(moved)
    assert before[(Direction.UP, Link.GHZ24)] - after[(Direction.UP, Link.GHZ24)] == Decimal("0.4")
    assert after[(Direction.UP, Link.GHZ5)] == before[(Direction.UP, Link.GHZ5)]


def test_format_parse_roundtrip(finals_table):
    assert parse_topic_table(format_topic_table(finals_table)) == finals_table


def test_format_parse_roundtrip_synthetic():
    text = (
        "topic 42 odd dir=up mbits=0.1 group=g1 links=2g4 mode=latest rate=12.5\n"
        "topic 43 aud dir=up mbits=0.4 group=g2 links=5g,2g4 mode=dedup rate=audio:44100/441\n"
    )
    table = parse_topic_table(text)
    assert parse_topic_table(format_topic_table(table)) == table
    assert float(table.by_id[43].rate.hz) == 100.0


def test_aggregate_permutation_invariant(finals_table):
    lines = [line for line in format_topic_table(finals_table).splitlines() if line.strip()]
    rng = random.Random(0)
    for _ in range(5):
        rng.shuffle(lines)
        shuffled = parse_topic_table("\n".join(lines))
        assert aggregate_bandwidth(shuffled) == aggregate_bandwidth(finals_table)


def test_group_links_lookup(finals_table):
    assert finals_table.group_links("arm_control") == BOTH
    assert finals_table.group_links("main_cameras") == frozenset({Link.GHZ5})
    with pytest.raises(UnknownGroup):
        finals_table.group_links("ghost")
