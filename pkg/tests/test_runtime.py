"""Decomposition, reduction rules, scheduling and whole-program runs."""

import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from conftest import compile_source, run_source
from oracles import fifo_replay, first_primes
from mtlc import stdlib
from mtlc.runtime import (
    EXIT_CODES, Blocked, Deadlock, FinalValue, IsValue, Machine, Monitors, Redex,
    RuntimeFault, Scheduler, SchedulerConfig, StepLimit, apply_step, decompose, enabled_steps,
    reduce_adhoc, reduce_pure, run,
)
from mtlc.session import SessionEnv
from mtlc.syntax import (
    INT, UNIT, App, ChPos, Chan, ConstApp, Endpoint, Fst, If, Lam, LetPair, Lit, Nil,
    Offer, Pair, Rcv, Select, Snd, Unit, Var, Branch,
)

P = {i: Endpoint(i, True) for i in range(1, 5)}
N = {i: Endpoint(i, False) for i in range(1, 5)}
ENV = SessionEnv()


def op(name, *args):
    return ConstApp(name, tuple(args))


def machine(threads, sessions):
    """A machine with hand-written threads over channels 1, 2, ..."""
    m = Machine(Unit(), ENV)
    for s in sessions:
        m.store.fresh(s)
    m.pool.threads.clear()
    m.pool.threads.update(threads)
    m.pool.next_tid = max(threads) + 1
    m.invalidate()
    return m


# ---------------------------------------------------------------------------
# decomposition and local reduction


class TestDecompose:
    def test_beta_redex(self):
        d = decompose(App(Lam("x", UNIT, Lit(1)), Unit()))
        assert isinstance(d, Redex) and d.kind == "pure" and d.ctx.frames == ()

    def test_blocked_under_frames(self):
        send = op("chanpos_send", Chan(P[1]), Lit(2))
        d = decompose(Fst(Pair(Lit(1), send)))
        assert isinstance(d, Blocked) and d.term == send
        assert d.ctx.describe() == "Fst.0/Pair.1"
        assert d.op == "chanpos_send" and d.endpoint == P[1]

    def test_close_at_hole(self):
        d = decompose(op("channeg_close", Chan(N[1])))
        assert isinstance(d, Blocked) and d.ctx.describe() == "hole"

    def test_value(self):
        assert isinstance(decompose(Pair(Lit(1), Chan(P[1]))), IsValue)

    def test_left_to_right(self):
        e = Pair(op("+", Lit(1), Lit(1)), op("+", Lit(2), Lit(2)))
        d = decompose(e)
        assert d.term == op("+", Lit(1), Lit(1))
        assert d.ctx.plug(Lit(2)) == Pair(Lit(2), op("+", Lit(2), Lit(2)))

    def test_select_and_offer_block(self):
        assert decompose(Select("l", Chan(P[1]))).op == "select"
        assert decompose(Offer(Chan(N[1]), "c", (("l", Var("c")),))).op == "offer"

    def test_spawn_kinds(self):
        f = Lam("p", ChPos(Nil()), op("chanpos_close", Var("p")), True)
        assert decompose(op("chneg_create", f)).kind == "spawn"
        assert decompose(op("thread_create", Lam("u", UNIT, Unit(), True))).kind == "spawn"


class TestLocal:
    def test_pure(self):
        assert reduce_pure(If(Lit(True), Lit(1), Lit(2))) == Lit(1)
        assert reduce_pure(LetPair("a", "b", Pair(Lit(1), Lit(2)), Pair(Var("b"), Var("a")))) \
            == Pair(Lit(2), Lit(1))
        assert reduce_pure(App(Lam("x", INT, op("+", Var("x"), Var("x"))), Lit(4))) \
            == op("+", Lit(4), Lit(4))

    def test_adhoc(self):
        rng = random.Random(0)
        assert reduce_adhoc("+", (Lit(1), Lit(1)), rng) == Lit(2)
        assert reduce_adhoc("<", (Lit(3), Lit(2)), rng) == Lit(False)
        assert reduce_adhoc("mod", (Lit(-7), Lit(3)), rng) == Lit(2)
        assert reduce_adhoc("=", (Lit(True), Lit(True)), rng) == Lit(True)

    def test_division_by_zero(self):
        with pytest.raises(RuntimeFault):
            reduce_adhoc("/", (Lit(1), Lit(0)), random.Random(0))

    def test_randbit_deterministic(self):
        a = [reduce_adhoc("randbit", (), random.Random(9)) for _ in range(3)]
        assert len(set(a)) == 1 and a[0] in (Lit(0), Lit(1))

    def test_not_a_redex(self):
        with pytest.raises(RuntimeFault):
            reduce_pure(Lit(1))


# ---------------------------------------------------------------------------
# enabled steps and their effect


class TestSteps:
    def test_finished_worker_is_removed(self):
        m = machine({0: Lit(1), 1: Unit()}, [])
        assert [s.rule for s in enabled_steps(m)] == ["PR2"]
        apply_step(m, enabled_steps(m)[0])
        assert list(m.threads) == [0] and m.is_final()

    def test_send_pairs_with_receive(self):
        m = machine({0: op("channeg_send", Chan(N[1])),
                     1: op("chanpos_send", Chan(P[1]), Lit(5))}, [Snd(INT, Nil())])
        (s,) = enabled_steps(m)
        assert (s.rule, s.tids, s.chan, s.note) == ("PR4-send", (1, 0), 1, "direct")
        apply_step(m, s)
        assert m.threads == {0: Pair(Chan(N[1]), Lit(5)), 1: Chan(P[1])}
        assert m.store.channels[1].pos == Nil() and m.store.channels[1].neg == Nil()

    def test_send_does_not_pair_with_negative_receive(self):
        m = machine({0: op("channeg_recv", Chan(N[1]), Lit(1)),
                     1: op("chanpos_send", Chan(P[1]), Lit(5))}, [Snd(INT, Nil())])
        assert enabled_steps(m) == []

    def test_negative_send(self):
        m = machine({0: op("channeg_recv", Chan(N[1]), Lit(8)),
                     1: op("chanpos_recv", Chan(P[1]))}, [Rcv(INT, Nil())])
        (s,) = enabled_steps(m)
        assert s.rule == "PR4-recv"
        apply_step(m, s)
        assert m.threads == {0: Chan(N[1]), 1: Pair(Chan(P[1]), Lit(8))}

    def test_close(self):
        m = machine({0: op("channeg_close", Chan(N[1])),
                     1: op("chanpos_close", Chan(P[1]))}, [Nil()])
        (s,) = enabled_steps(m)
        assert s.rule == "PR4-clos"
        apply_step(m, s)
        assert m.threads == {0: Unit(), 1: Unit()} and m.store.channels == {}

    def test_tag(self):
        br = Branch("rcv", (("a", Nil()), ("b", Snd(INT, Nil()))))
        m = machine({0: Select("b", Chan(N[1])),
                     1: Offer(Chan(P[1]), "c", (("a", Unit()), ("b", Var("c"))))}, [br])
        (s,) = enabled_steps(m)
        assert s.rule == "PR4-tag"
        apply_step(m, s)
        assert m.threads == {0: Chan(N[1]), 1: Chan(P[1])}
        assert m.store.channels[1].pos == Snd(INT, Nil())

    def test_channel_creation(self):
        f = Lam("p", ChPos(Nil()), op("chanpos_close", Var("p")), True)
        m = machine({0: op("chneg_create", f)}, [])
        (s,) = enabled_steps(m)
        assert s.rule == "PR3"
        s = apply_step(m, s)
        assert s.tids == (0, 1) and s.chan == 1
        assert m.threads == {0: Chan(N[1]), 1: App(f, Chan(P[1]))}
        assert m.store.channels[1].pos == Nil()

    def test_thread_creation(self):
        f = Lam("u", UNIT, Unit(), True)
        m = machine({0: Pair(op("thread_create", f), Lit(1))}, [])
        s = apply_step(m, enabled_steps(m)[0])
        assert s.rule == "PR1" and s.tids == (0, 1)
        assert m.threads == {0: Pair(Unit(), Lit(1)), 1: App(f, Unit())}

    def test_send_through_linker(self):
        m = machine({0: op("channeg_send", Chan(N[1])),
                     1: op("chposneg_link", Chan(P[1]), Chan(N[2])),
                     2: op("chanpos_send", Chan(P[2]), Lit(7))},
                    [Snd(INT, Nil()), Snd(INT, Nil())])
        (s,) = enabled_steps(m)
        assert (s.rule, s.tids, s.note, s.path) == ("LINK-send", (2, 0, 1), "via:1>2", (1, 2))
        apply_step(m, s)
        assert m.threads[0] == Pair(Chan(N[1]), Lit(7))
        assert m.threads[2] == Chan(P[2])
        assert all(r.pos == Nil() for r in m.store.channels.values())

    def test_linker_between_two_closers(self):
        m = machine({0: op("channeg_close", Chan(N[1])),
                     1: op("chposneg_link", Chan(P[1]), Chan(N[2])),
                     2: op("chanpos_close", Chan(P[2]))}, [Nil(), Nil()])
        steps = enabled_steps(m)
        assert sorted((s.rule, s.tids) for s in steps) == [
            ("LINK-clos", (0, 1)), ("LINK-clos", (2, 1))]
        for _ in range(10):
            steps = enabled_steps(m)
            if not steps:
                break
            apply_step(m, steps[0])
        assert m.threads == {0: Unit()} and m.store.channels == {}


# ---------------------------------------------------------------------------
# whole runs


def test_trivial_program():
    r = run_source("fun main() = 1+1", trace=1)
    assert r.outcome == FinalValue(Lit(2)) and r.steps == 1
    assert [str(e) for e in r.trace] == ["step=1 rule=PR0 tids=0 chan=- note=adhoc"]


def test_trace_is_deterministic():
    src = stdlib.corpus_source("pingpong")
    a = run_source(src, seed=5, trace=2).trace_lines()
    b = run_source(src, seed=5, trace=2).trace_lines()
    assert a == b and a[-1] == "outcome=final"
    assert " R=" in a[0]


@pytest.mark.parametrize("policy", ["random", "rr", "adversarial"])
def test_sieve_primes(policy):
    r = run_source(stdlib.sieve_program(10), seed=3, policy=policy)
    assert stdlib.sieve_result(r.outcome.value) == first_primes(10)
    assert first_primes(10) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@given(st.lists(st.one_of(st.just(("deq",)), st.tuples(st.just("enq"), st.integers(0, 1021))),
                max_size=12), st.integers(0, 10_000))
def test_queue_against_fifo(ops, seed):
    r = run_source(stdlib.queue_program(ops), seed=seed)
    assert stdlib.queue_result(r.outcome.value) == fifo_replay(ops)


def test_queue_corpus_main():
    r = run_source(stdlib.corpus_source("queue"))
    assert stdlib.queue_result(r.outcome.value) == [1, 2, 3]


def test_create2_deadlock_witness():
    r = run_source(stdlib.corpus_source("create2_deadlock"), allow_create2=True)
    assert isinstance(r.outcome, Deadlock)
    w = r.outcome.witness
    assert w["threads"] == {0: "channeg_send(-1)", 1: "chanpos_recv(+2)"}
    assert w["edges"] == [(0, 1, 1), (1, 1, 2)]
    assert w["cycle"] == [(1, 1)]


def test_create2_flagged_by_df_monitor():
    r = run_source(stdlib.corpus_source("create2_deadlock"), allow_create2=True,
                   monitors=Monitors(df=True))
    assert r.outcome.kind == "monitor-violation" and r.outcome.step == 1


def test_create2_disabled_at_runtime():
    main, env = compile_source(stdlib.corpus_source("create2_deadlock"), allow_create2=True)
    r = run(main, env)
    assert isinstance(r.outcome, Deadlock) and r.steps == 0


def test_step_limit():
    r = run_source(stdlib.sieve_program(3), steps=10)
    assert r.outcome == StepLimit(10)


def test_exit_codes():
    assert EXIT_CODES == {"final": 0, "deadlock": 2, "step-limit": 3, "monitor-violation": 4}


def test_bad_config():
    with pytest.raises(ValueError):
        SchedulerConfig(steps=0)
    with pytest.raises(ValueError):
        SchedulerConfig(policy="fifo")


def _invariants(m: Machine, env) -> None:
    held = Counter(e for x in m.threads.values() for e in x.res)
    assert all(n == 1 for n in held.values()), "an endpoint is held twice"
    live = {Endpoint(c, p) for c, r in m.store.channels.items() for p in r.live}
    assert set(held) == live, "pool and channel store disagree"
    for r in m.store.channels.values():
        assert env.matches(r.pos, r.neg)


@pytest.mark.parametrize("name", ["bang", "link_demo", "aconj", "times", "service_echo"])
@given(seed=st.integers(0, 10_000), policy=st.sampled_from(["random", "rr", "adversarial"]))
def test_invariants_along_runs(corpus_compiled, name, seed, policy):
    main, env = corpus_compiled[name]
    m = Machine(main, env, seed=seed)
    sched = Scheduler(policy, m.rng)
    for _ in range(5000):
        _invariants(m, env)
        if m.is_final():
            break
        steps = m.enabled_steps()
        assert steps, "corpus program deadlocked"
        m.apply(sched.choose(steps))
    assert m.is_final()
    assert m.store.channels == {}


@pytest.mark.parametrize("name", stdlib.RUNNABLE)
def test_runnable_programs_finish_monitored(corpus_compiled, name):
    main, env = corpus_compiled[name]
    r = run(main, env, SchedulerConfig(seed=11), Monitors.all())
    assert isinstance(r.outcome, FinalValue), r.outcome
    assert r.violations == []
