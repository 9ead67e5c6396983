"""Regularity, DF-reduction, the decision procedure and the step monitor."""

import random

import pytest
from hypothesis import given, strategies as st

from conftest import coll, to_pairs
from oracles import literal_reducible, regular_collections
from mtlc.dfcheck import (
    BoundExceeded, DFParseError, ReductionError, canonical, channel_cycle, df_reduce,
    drop_empty, is_df_normal, is_df_reducible, is_regular, monitor_step, oracle_df_reducible,
    parse_collection, render_verdict, rch, rch_map,
)
from mtlc.runtime import Pool, TraceEvent
from mtlc.syntax import Chan, Endpoint, Pair, Unit


def _from_pairs(sets):
    return tuple(frozenset(Endpoint(i, s == "+") for i, s in x) for x in sets)


def event(rule, tids, chan=None, path=()):
    return TraceEvent(1, rule, tuple(tids), chan, "", "", tuple(path) or ((chan,) if chan else ()))


class TestRegularity:
    def test_examples(self):
        assert is_regular(coll("+1", "-1"))
        assert not is_regular(coll("+1"))
        assert not is_regular(coll("+1 -1", "+1"))
        assert is_regular(coll(""))

    def test_self_loop_is_regular(self):
        assert is_regular(coll("+1 -1"))


class TestReduce:
    def test_merge(self):
        assert canonical(df_reduce(coll("+1 +2", "-1 -3", "-2 +3"), 1)) == \
            canonical(coll("+2 -3", "-2 +3"))

    def test_pair_to_empty(self):
        assert df_reduce(coll("+1", "-1"), 1) == coll("")

    def test_self_loop_refused(self):
        with pytest.raises(ReductionError):
            df_reduce(coll("+1 -1"), 1)

    def test_missing_channel(self):
        with pytest.raises(ReductionError):
            df_reduce(coll("+1", "-1"), 2)

    def test_normal(self):
        assert is_df_normal(coll("+1 -1", ""))
        assert not is_df_normal(coll("+1", "-1"))


class TestVerdict:
    @pytest.mark.parametrize("sets,ok", [
        (("+1", "-1"), True),
        (("+1 -2", "+2 -1"), False),
        (("+1 -1",), False),
        (("+1 +2", "-1", "-2"), True),
        (("", ""), True),
        (("+1 +2", "-1 -2"), False),
        (("+1", "-1 +2", "-2 +3", "-3"), True),
    ])
    def test_examples(self, sets, ok):
        m = coll(*sets)
        assert bool(is_df_reducible(m)) is ok
        assert oracle_df_reducible(m) is ok
        assert literal_reducible(to_pairs(m)) is ok

    def test_trace_of_chain(self):
        v = is_df_reducible(coll("+1", "-1 +2", "-2"))
        assert v.trace == ((1, 0, 1), (2, 0, 2))
        assert v.normal_form == coll("")

    def test_irregular_refused(self):
        with pytest.raises(ReductionError):
            is_df_reducible(coll("+1"))

    def test_self_loop_witness(self):
        v = is_df_reducible(coll("+1 -1", "+2", "-2"))
        assert v.witness["kind"] == "self-loop" and v.witness["set"] == 0
        assert v.witness["cycle"] == [(0, 1)]

    def test_cycle_witness(self):
        v = is_df_reducible(coll("+1 -2", "+2 -1"))
        assert v.witness["kind"] == "normal-form"
        assert sorted(c for _, c in v.witness["cycle"]) == [1, 2]

    def test_oracle_bound(self):
        big = coll(*[f"+{i} -{i + 1}" for i in range(1, 8)], "+8 -1")
        with pytest.raises(BoundExceeded):
            oracle_df_reducible(big)


# exhaustive agreement with both oracles on small instances

SMALL = list(regular_collections(3, 3))


def test_exhaustive_agreement():
    assert len(SMALL) > 100
    for sets in SMALL:
        m = _from_pairs(sets)
        want = literal_reducible(sets)
        assert bool(is_df_reducible(m)) is want, sets
        assert oracle_df_reducible(m) is want, sets


def test_n_sets_with_n_pairs_never_reduce():
    """n channels among at most n nonempty sets never reduce away."""
    for sets in regular_collections(4, 4):
        pairs = sum(len(s) for s in sets) // 2
        if pairs and pairs >= sum(1 for s in sets if s):
            assert not is_df_reducible(_from_pairs(sets)), sets


def _random_regular(rng: random.Random):
    k = rng.randint(1, 5)
    sets = [set() for _ in range(k)]
    for cid in range(1, rng.randint(0, 5) + 1):
        sets[rng.randrange(k)].add(Endpoint(cid, True))
        sets[rng.randrange(k)].add(Endpoint(cid, False))
    return tuple(frozenset(s) for s in sets)


def test_random_agreement():
    rng = random.Random(2024)
    for _ in range(1000):
        m = _random_regular(rng)
        assert bool(is_df_reducible(m)) is oracle_df_reducible(m) is literal_reducible(to_pairs(m))


regular = st.randoms(use_true_random=False).map(_random_regular)


@given(regular)
def test_empty_sets_do_not_matter(m):
    assert bool(is_df_reducible(m)) is bool(is_df_reducible(drop_empty(m) or coll("")))
    assert bool(is_df_reducible(m + (frozenset(),))) is bool(is_df_reducible(m))


@given(regular)
def test_order_does_not_matter(m):
    assert bool(is_df_reducible(m)) is bool(is_df_reducible(tuple(reversed(m))))


@given(regular)
def test_witness_checks_out(m):
    v = is_df_reducible(m)
    if v:
        assert all(not s for s in v.normal_form)
        assert channel_cycle(m) == []
        return
    w = v.witness
    if w["kind"] == "self-loop":
        s = m[w["set"]]
        assert any(e.positive and e.dual in s for e in s)
    else:
        nf = [s for s in v.normal_form if s]
        assert nf and is_df_normal(v.normal_form)
        assert all(e.dual in s for s in nf for e in s)
    assert w["cycle"]


@given(regular)
def test_one_step_reducts_agree(m):
    """A reducible collection stays reducible under every reduction."""
    if not is_df_reducible(m):
        return
    for cid in sorted({e.id for s in m for e in s}):
        try:
            assert is_df_reducible(df_reduce(m, cid))
        except ReductionError:
            pass


class TestParse:
    def test_basic(self):
        assert parse_collection("{+1 -2}\n{+2 -1}\n") == coll("+1 -2", "+2 -1")

    def test_blank_line_is_empty_set(self):
        assert parse_collection("+1\n\n-1") == coll("+1", "", "-1")

    def test_commas(self):
        assert parse_collection("{+1, +2}\n{-1,-2}") == coll("+1 +2", "-1 -2")

    @pytest.mark.parametrize("text,line", [("{+1\n-1", 1), ("+1\n-x", 2), ("", 1), ("+1 +1\n-1", 1)])
    def test_errors(self, text, line):
        with pytest.raises(DFParseError) as ei:
            parse_collection(text)
        assert ei.value.line == line


class TestRender:
    def test_reducible(self):
        assert render_verdict(coll("+1", "-1")) == (0, ["reducible", "reduce 1: sets 0 and 1"])

    def test_cycle(self):
        status, lines = render_verdict(coll("+1 -2", "+2 -1"))
        assert status == 1 and lines[0] == "non-reducible"
        assert lines[-1].startswith("cycle: 2 set(s)")

    def test_unpaired(self):
        status, lines = render_verdict(coll("+1"))
        assert status == 1 and "unpaired endpoint" in lines[1]


# ---------------------------------------------------------------------------
# pools and the monitor


def test_rch():
    pool = Pool({0: Pair(Chan(Endpoint(1, False)), Unit()), 2: Chan(Endpoint(1, True)), 1: Unit()})
    assert rch(pool) == coll("-1", "", "+1")
    assert rch_map(pool.threads)[2] == frozenset({Endpoint(1, True)})


class TestMonitor:
    def test_channel_creation(self):
        prev = {0: frozenset()}
        nxt = {0: coll("-1")[0], 1: coll("+1")[0]}
        assert monitor_step(prev, event("PR3", (0, 1), 1), nxt)

    def test_close(self):
        prev = {0: coll("-1")[0], 1: coll("+1")[0]}
        nxt = {0: frozenset(), 1: frozenset()}
        assert monitor_step(prev, event("PR4-clos", (1, 0), 1), nxt)

    def test_fabricated_self_loop(self):
        prev = {0: coll("-1")[0], 1: coll("+1")[0]}
        nxt = {0: coll("-1 +1")[0], 1: frozenset()}
        res = monitor_step(prev, event("PR4-send", (1, 0), 1), nxt)
        assert not res and res.check == "reducible"

    def test_channel_send_moves_endpoint(self):
        # thread 1 sends -2 to thread 0 over channel 1
        prev = {0: coll("-1")[0], 1: coll("+1 -2")[0], 2: coll("+2")[0]}
        nxt = {0: coll("-1 -2")[0], 1: coll("+1")[0], 2: coll("+2")[0]}
        assert monitor_step(prev, event("PR4-send", (1, 0), 1), nxt)

    def test_bad_shape(self):
        prev = {0: coll("-1")[0], 1: coll("+1")[0], 2: frozenset()}
        nxt = {0: coll("-1")[0], 1: frozenset(), 2: coll("+1")[0]}
        res = monitor_step(prev, event("PR0", (1,)), nxt)
        assert not res and res.check == "shape:PR0"

    def test_irregular(self):
        prev = {0: coll("-1")[0], 1: coll("+1")[0]}
        nxt = {0: coll("-1")[0], 1: coll("+1")[0], 2: coll("+1")[0]}
        assert monitor_step(prev, event("PR1", (1, 2)), nxt).check == "regular"

    def test_terminal_exemption(self):
        prev = {0: coll("-1 +1")[0]}
        assert monitor_step(prev, event("PR0", (0,)), prev, terminal_exempt=True)
        assert not monitor_step(prev, event("PR0", (0,)), prev)
