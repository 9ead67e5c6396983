"""Connective encodings, tag tables, generators and corpus access."""

import random

import pytest
from hypothesis import given, strategies as st

from conftest import run_source
from oracles import fifo_replay
from mtlc import stdlib
from mtlc.parser import parse
from mtlc.session import SessionError, dual
from mtlc.syntax import INT, Branch, ChNeg, Lit, Named, Nil, Pair, Rcv, Snd, Unit

ENV = parse(stdlib.corpus_source("sieve")).env


def test_times():
    assert stdlib.times(Nil(), Nil()) == Snd(ChNeg(Nil()), Nil())


def test_limplies():
    assert stdlib.limplies(Nil(), Snd(INT, Nil())) == Rcv(ChNeg(Nil()), Snd(INT, Nil()))


def test_choices_are_dual_shapes():
    a, b = Snd(INT, Nil()), Nil()
    assert stdlib.adisj(a, b).direction == "snd"
    assert stdlib.aconj(a, b).direction == "rcv"
    assert dual(stdlib.adisj(a, b)) == Branch("rcv", (("l", dual(a)), ("r", dual(b))))


class TestTagTable:
    def test_sslist(self):
        t = stdlib.tag_table(ENV, "sslist", (INT,))
        assert t.direction == "rcv"
        assert (t.index("nil"), t.index("cons")) == (0, 1)
        assert t.continuation("cons") == Snd(INT, Named("sslist", (INT,)))

    def test_unknown_tag(self):
        with pytest.raises(KeyError):
            stdlib.tag_table(ENV, "sslist", (INT,)).index("zip")

    def test_undefined(self):
        with pytest.raises(SessionError):
            stdlib.tag_table(ENV, "nope")


class TestCorpus:
    def test_names(self):
        names = stdlib.corpus_names()
        assert set(stdlib.RUNNABLE) | set(stdlib.NEEDS_CREATE2) <= set(names)

    def test_reject_manifest_matches_files(self):
        for name in stdlib.reject_names():
            assert stdlib.corpus_source(f"reject/{name}")

    @pytest.mark.parametrize("spelling", ["sieve", "corpus/sieve", "corpus/sieve.mtl"])
    def test_resolve(self, spelling):
        text, shown = stdlib.resolve(spelling)
        assert shown == "corpus/sieve.mtl" and stdlib.ENTRY_MARKER in text

    def test_resolve_file(self, tmp_path):
        f = tmp_path / "p.mtl"
        f.write_text("fun main() = 1")
        assert stdlib.resolve(str(f)) == ("fun main() = 1", str(f))

    def test_missing(self):
        with pytest.raises(FileNotFoundError):
            stdlib.resolve("corpus/none")


# ---------------------------------------------------------------------------
# runs of the connective programs


def _run(name, **kw):
    r = run_source(stdlib.corpus_source(name), **kw)
    assert r.outcome.kind == "final", r.outcome
    assert r.machine.store.channels == {}
    return r


def test_times_round_trip():
    assert _run("times").outcome.value == Lit(22)


def test_adisj_both_sides():
    assert stdlib.tuple_values(_run("adisj").outcome.value) == [7, 101]


def test_aconj_both_picks():
    assert stdlib.tuple_values(_run("aconj").outcome.value) == [5, 42]


def test_limplies():
    assert _run("limplies").outcome.value == Lit(81)


def test_service_hands_out_distinct_channels():
    r = _run("service_echo", trace=1)
    chans = [ev.chan for ev in r.trace if ev.rule == "PR3" and ev.note == "service"]
    assert len(chans) == 2 and chans[0] != chans[1]
    assert stdlib.tuple_values(r.outcome.value) == [3, 4]


# ---------------------------------------------------------------------------
# generators


def test_sieve_program_rejects_zero():
    with pytest.raises(ValueError):
        stdlib.sieve_program(0)


def test_sieve_one():
    assert stdlib.sieve_result(_run_text(stdlib.sieve_program(1))) == [2]


def _run_text(text):
    return run_source(text).outcome.value


ops = st.lists(st.one_of(st.just(("deq",)), st.tuples(st.just("enq"), st.integers(0, 1021))),
               max_size=30)


@given(ops)
def test_script_encoding_is_injective_in_digits(script):
    n = stdlib.encode_script(script)
    digits = []
    while n:
        n, d = divmod(n, stdlib.BASE)
        digits.append(d)
    assert digits == [1 if op == ("deq",) else op[1] + 2 for op in script]


@given(ops)
def test_result_decoding(script):
    answers = fifo_replay(script)
    acc = 1
    for x in answers:
        acc = acc * stdlib.BASE + (0 if x is None else x + 1)
    assert stdlib.queue_result(Lit(acc)) == answers


def test_bad_operations():
    with pytest.raises(ValueError):
        stdlib.encode_script([("enq", 5000)])
    with pytest.raises(ValueError):
        stdlib.encode_script([("pop",)])


def test_random_script_mix():
    s = stdlib.random_script(random.Random(1), 1000)
    deqs = sum(op == ("deq",) for op in s)
    assert 400 < deqs < 600
    assert all(0 <= op[1] <= 99 for op in s if op != ("deq",))


def test_tuple_values():
    assert stdlib.tuple_values(Pair(Lit(1), Pair(Lit(2), Lit(True)))) == [1, 2, True]
    with pytest.raises(ValueError):
        stdlib.tuple_values(Pair(Lit(1), Unit()))
