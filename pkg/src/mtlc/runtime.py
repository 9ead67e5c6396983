"""Pool evaluator: evaluation contexts, redex reduction and the thread and
channel rules, driven by a seeded scheduler.

Communication is a synchronous rendezvous: a send and its matching
receive on the two endpoints of one channel fire as a single step.
A thread blocked on ``chposneg_link(ch1, ~ch2)`` forwards traffic between
the holder of ``~ch1`` and the holder of ``ch2``; a whole chain of such
linkers is crossed in one step.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import networkx as nx

from .dfcheck import monitor_step, rch_map, show_set
from .session import SessionEnv
from .syntax import (
    App, Branch, Chan, ConstApp, Endpoint, Expr, Fix, Fst, If, Lam, LetPair,
    Lit, Nil, Offer, Pair, ProdL, Rcv, Select, Session, Snd, Snd_, Unit,
    ChPos, subst,
)
from .typecheck import (
    CHANNEL_OPS, PoolTypeError, TypeErr, AuditError, canonical_form,
    check_pool, check_value_purity, Checker, resource_typing,
)
from .syntax import is_linear

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

SPAWN_OPS = frozenset({"thread_create", "chneg_create", "chneg_create2", "service_request"})


class RuntimeFault(Exception):
    """A well-typed program should never raise this."""


# ---------------------------------------------------------------------------
# evaluation contexts


@dataclass(frozen=True)
class Frame:
    node: Expr
    index: int  # which child holds the hole


@dataclass(frozen=True)
class EvalContext:
    frames: tuple[Frame, ...] = ()

    def plug(self, e: Expr) -> Expr:
        for fr in reversed(self.frames):
            e = _replace_child(fr.node, fr.index, e)
        return e

    def describe(self) -> str:
        return "/".join(f"{type(f.node).__name__}.{f.index}" for f in self.frames) or "hole"


HOLE = EvalContext()


def _child(e: Expr, i: int) -> Expr:
    match e:
        case ConstApp(_, args):
            return args[i]
        case Pair(a, b):
            return a if i == 0 else b
        case App(f, a):
            return f if i == 0 else a
        case If(c, _, _):
            return c
        case LetPair(_, _, a, _):
            return a
        case Fst(a) | Snd_(a):
            return a
        case Select(_, c) | Offer(c, _, _):
            return c
    raise RuntimeFault(f"no evaluation position in {type(e).__name__}")


def _replace_child(e: Expr, i: int, new: Expr) -> Expr:
    match e:
        case ConstApp(name, args, loc):
            return ConstApp(name, args[:i] + (new,) + args[i + 1:], loc)
        case Pair(a, b, loc):
            return Pair(new, b, loc) if i == 0 else Pair(a, new, loc)
        case App(f, a, loc):
            return App(new, a, loc) if i == 0 else App(f, new, loc)
        case If(_, a, b, loc):
            return If(new, a, b, loc)
        case LetPair(x1, x2, _, b, loc):
            return LetPair(x1, x2, new, b, loc)
        case Fst(_, loc):
            return Fst(new, loc)
        case Snd_(_, loc):
            return Snd_(new, loc)
        case Select(tag, _, loc):
            return Select(tag, new, loc)
        case Offer(_, x, arms, loc):
            return Offer(new, x, arms, loc)
    raise RuntimeFault(f"cannot plug into {type(e).__name__}")


def _eval_positions(e: Expr) -> range:
    match e:
        case ConstApp(_, args):
            return range(len(args))
        case Pair() | App():
            return range(2)
        case If() | LetPair() | Fst() | Snd_() | Select() | Offer():
            return range(1)
    return range(0)


@dataclass(frozen=True)
class IsValue:
    pass


@dataclass(frozen=True)
class Redex:
    ctx: EvalContext
    term: Expr
    kind: str  # pure | adhoc | spawn


@dataclass(frozen=True)
class Blocked:
    ctx: EvalContext
    term: Expr

    @property
    def op(self) -> str:
        match self.term:
            case Select():
                return "select"
            case Offer():
                return "offer"
            case ConstApp(name, _):
                return name
        raise RuntimeFault("bad partial redex")

    @property
    def endpoint(self) -> Endpoint:
        c = self.term.chan if isinstance(self.term, (Select, Offer)) else self.term.args[0]
        if not isinstance(c, Chan):
            raise RuntimeFault(f"{self.op} applied to a non-channel")
        return c.ep


Decomposition = Union[IsValue, Redex, Blocked]


def decompose(e: Expr) -> Decomposition:
    """Split ``e`` into an evaluation context and the subterm at its hole."""
    frames = []
    cur = e
    while True:
        if cur.is_val:
            if not frames:
                return IsValue()
            raise RuntimeFault("descended into a value")
        for i in _eval_positions(cur):
            if not _child(cur, i).is_val:
                frames.append(Frame(cur, i))
                cur = _child(cur, i)
                break
        else:
            return _classify(EvalContext(tuple(frames)), cur)


def _classify(ctx: EvalContext, r: Expr) -> Decomposition:
    match r:
        case Select() | Offer():
            return Blocked(ctx, r)
        case ConstApp(name, _):
            if name in CHANNEL_OPS:
                return Blocked(ctx, r)
            return Redex(ctx, r, "spawn" if name in SPAWN_OPS else "adhoc")
        case If() | LetPair() | Fst() | Snd_() | App() | Fix():
            return Redex(ctx, r, "pure")
    raise RuntimeFault(f"stuck on {type(r).__name__}")


def reduce_pure(r: Expr) -> Expr:
    match r:
        case If(Lit(True), a, _):
            return a
        case If(Lit(False), _, b):
            return b
        case LetPair(x1, x2, Pair(a, b), body):
            return subst(body, {x1: a, x2: b})
        case Fst(Pair(a, _)):
            return a
        case Snd_(Pair(_, b)):
            return b
        case App(Lam(x, _, body, _), v):
            return subst(body, {x: v})
        case Fix(f, _, v):
            return subst(v, {f: r})
    raise RuntimeFault(f"not a pure redex: {r!r}")


def _int(v) -> int:
    if not isinstance(v, Lit) or type(v.value) is not int:
        raise RuntimeFault(f"expected an integer, got {v!r}")
    return v.value


def _bool(v) -> bool:
    if not isinstance(v, Lit) or type(v.value) is not bool:
        raise RuntimeFault(f"expected a boolean, got {v!r}")
    return v.value


def reduce_adhoc(name: str, args, rng: random.Random) -> Expr:
    """Evaluate a non-channel constant applied to values."""
    match name, len(args):
        case "randbit", 0:
            return Lit(rng.getrandbits(1))
        case ("+" | "-" | "*" | "/" | "mod"), 2:
            a, b = _int(args[0]), _int(args[1])
            if name in ("/", "mod") and b == 0:
                raise RuntimeFault("division by zero")
            match name:
                case "+":
                    return Lit(a + b)
                case "-":
                    return Lit(a - b)
                case "*":
                    return Lit(a * b)
                case "/":
                    return Lit(a // b)
                case "mod":
                    return Lit(a % b)
        case ("<" | "<=" | ">" | ">="), 2:
            a, b = _int(args[0]), _int(args[1])
            return Lit({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[name])
        case ("=" | "<>"), 2:
            a, b = args
            if not (isinstance(a, Lit) and isinstance(b, Lit)):
                raise RuntimeFault("equality on non-literals")
            return Lit((a == b) == (name == "="))
        case ("&&" | "||"), 2:
            a, b = _bool(args[0]), _bool(args[1])
            return Lit(a and b if name == "&&" else a or b)
        case "not", 1:
            return Lit(not _bool(args[0]))
    raise RuntimeFault(f"undefined application of {name} to {len(args)} argument(s)")


# ---------------------------------------------------------------------------
# state


@dataclass
class ChanRec:
    pos: Session  # remaining protocol as typed at the positive endpoint
    neg: Session
    live: set = field(default_factory=lambda: {True, False})


@dataclass
class ChannelStore:
    channels: dict[int, ChanRec] = field(default_factory=dict)
    next_id: int = 1

    def fresh(self, s: Session) -> int:
        cid = self.next_id
        self.next_id += 1
        self.channels[cid] = ChanRec(s, s)
        return cid


@dataclass
class Pool:
    threads: dict[int, Expr]
    next_tid: int = 1


@dataclass(frozen=True)
class Step:
    """An enabled rule instance."""

    rule: str
    tids: tuple[int, ...]
    chan: Optional[int] = None
    note: str = ""
    path: tuple[int, ...] = ()  # channels a message crosses


@dataclass(frozen=True)
class TraceEvent:
    step: int
    rule: str
    tids: tuple[int, ...]
    chan: Optional[int]
    note: str
    summary: str
    path: tuple[int, ...] = ()

    def __str__(self) -> str:
        chan = "-" if self.chan is None else str(self.chan)
        line = (f"step={self.step} rule={self.rule} tids={','.join(map(str, self.tids))} "
                f"chan={chan} note={self.note}")
        return f"{line} R={self.summary}" if self.summary else line


# ---------------------------------------------------------------------------
# outcomes


@dataclass(frozen=True)
class FinalValue:
    value: Expr
    residual: bool = False  # other threads remain, blocked on channels in the value
    kind = "final"


@dataclass(frozen=True)
class Deadlock:
    witness: dict
    kind = "deadlock"


@dataclass(frozen=True)
class StepLimit:
    steps: int
    kind = "step-limit"


@dataclass(frozen=True)
class MonitorViolation:
    monitor: str
    step: int
    detail: str
    kind = "monitor-violation"


Outcome = Union[FinalValue, Deadlock, StepLimit, MonitorViolation]

EXIT_CODES = {"final": 0, "deadlock": 2, "step-limit": 3, "monitor-violation": 4}


@dataclass(frozen=True)
class SchedulerConfig:
    seed: int = 0
    steps: int = 1_000_000
    policy: str = "random"  # random | rr | adversarial

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("step limit must be positive")
        if self.policy not in ("random", "rr", "adversarial"):
            raise ValueError(f"unknown policy {self.policy}")


@dataclass(frozen=True)
class Monitors:
    types: bool = False  # re-check the pool after each step
    df: bool = False  # DF-reducibility and per-rule shape of channel sets
    canonical: bool = False  # canonical forms and purity of finished values
    halt: bool = True  # stop at the first violation

    @classmethod
    def all(cls, halt: bool = True) -> "Monitors":
        return cls(True, True, True, halt)

    @property
    def any(self) -> bool:
        return self.types or self.df or self.canonical


@dataclass
class RunResult:
    outcome: Outcome
    steps: int
    trace: list[TraceEvent]
    violations: list[MonitorViolation]
    machine: "Machine"
    rule_counts: dict[str, int] = field(default_factory=dict)

    def trace_lines(self) -> list[str]:
        return [str(ev) for ev in self.trace] + [f"outcome={self.outcome.kind}"]


# ---------------------------------------------------------------------------
# the machine


LOCAL_RULES = frozenset({"PR0", "PR1", "PR2", "PR3", "CREATE2"})


class Machine:
    def __init__(self, main: Expr, env: SessionEnv, *, seed: int = 0,
                 allow_create2: bool = False):
        self.pool = Pool({0: main})
        self.store = ChannelStore()
        self.env = env
        self.rng = random.Random(seed)
        self.allow_create2 = allow_create2
        self._dec: dict[int, tuple[Expr, Decomposition]] = {}
        self._contrib: dict = {}
        self._dirty: Optional[set] = None

    @property
    def threads(self) -> dict[int, Expr]:
        return self.pool.threads

    def decomp(self, tid: int) -> Decomposition:
        e = self.threads[tid]
        hit = self._dec.get(tid)
        if hit is not None and hit[0] is e:
            return hit[1]
        d = decompose(e)
        self._dec[tid] = (e, d)
        return d

    def is_final(self) -> bool:
        return list(self.threads) == [0] and self.threads[0].is_val

    # -- enabled steps ----------------------------------------------------

    def enabled_steps(self) -> list[Step]:
        self._refresh()
        steps = [st for tid in sorted(self._local) for st in self._local[tid]]
        for ep_n in sorted(self._negs):
            steps.extend(self._pairings(ep_n, self._wait, self._link))
        for ep in sorted(self._closes):
            if ep.dual in self._link:
                tid, _ = self._wait[ep]
                ltid, _ = self._link[ep.dual]
                steps.append(Step("LINK-clos", (tid, ltid), ep.id, "closer+linker", (ep.id,)))
        return steps

    # Each thread contributes local steps, at most one waiting endpoint and
    # the two ends of a link.  Contributions are recomputed only for threads
    # whose term changed since the last call.

    def invalidate(self) -> None:
        """Forget every cached contribution (after editing ``threads``)."""
        self._dirty = None

    def _mark(self, tid: int) -> None:
        if self._dirty is not None:
            self._dirty.add(tid)

    def _refresh(self) -> None:
        if self._dirty is not None:
            dirty, self._dirty = self._dirty, set()
            self._update(dirty)
            if len(self._contrib) == len(self.threads):
                return
        self._contrib, self._local, self._wait, self._link = {}, {}, {}, {}
        self._negs, self._closes = set(), set()
        self._chains: dict = {}
        self._dirty = set()
        self._update(self.threads)

    def _update(self, tids) -> None:
        for tid in tids:
            old = self._contrib.pop(tid, None)
            if old is not None:
                self._retract(tid, old)
            if tid in self.threads:
                c = self._contribution(tid)
                self._contrib[tid] = c
                self._assert(tid, c)

    def _contribution(self, tid: int):
        d = self.decomp(tid)
        local: list[Step] = []
        wait = None
        links: tuple = ()
        match d:
            case IsValue():
                if tid > 0 and isinstance(self.threads[tid], Unit):
                    local.append(Step("PR2", (tid,)))
            case Redex(_, term, "spawn"):
                name = term.name
                if name == "thread_create":
                    local.append(Step("PR1", (tid,)))
                elif name == "chneg_create2":
                    if self.allow_create2:
                        local.append(Step("CREATE2", (tid,)))
                else:
                    note = "service" if name == "service_request" else "create"
                    local.append(Step("PR3", (tid,), note=note))
            case Redex():
                local.append(Step("PR0", (tid,), note=d.kind))
            case Blocked():
                if d.op == "chposneg_link":
                    links = tuple((a.ep, d) for a in d.term.args)
                else:
                    wait = (d.endpoint, d.op)
        return local, wait, links

    def _assert(self, tid: int, c) -> None:
        local, wait, links = c
        if local:
            self._local[tid] = local
        if wait is not None:
            ep, op = wait
            self._wait[ep] = (tid, op)
            if not ep.positive:
                self._negs.add(ep)
            if op in ("chanpos_close", "channeg_close"):
                self._closes.add(ep)
        for ep, d in links:
            self._link[ep] = (tid, d)
        if links:
            self._chains.clear()

    def _retract(self, tid: int, c) -> None:
        local, wait, links = c
        self._local.pop(tid, None)
        if wait is not None:
            ep = wait[0]
            if self._wait.get(ep, (None,))[0] == tid:
                del self._wait[ep]
            self._negs.discard(ep)
            self._closes.discard(ep)
        for ep, _ in links:
            if self._link.get(ep, (None,))[0] == tid:
                del self._link[ep]
        if links:
            self._chains.clear()

    def _pairings(self, ep_n: Endpoint, waiting, linkers) -> list[Step]:
        tid_n, op_n = waiting[ep_n]
        chain = self._chains.get(ep_n)
        if chain is None:
            chain = self._chains[ep_n] = _follow(ep_n, linkers)
        if chain is False:
            return []
        cur, via, path = chain
        if cur not in waiting:
            return []
        tid_p, op_p = waiting[cur]
        kind = _pair_kind(op_p, op_n)
        if kind is None or (kind == "clos" and via):
            return []
        rule = ("LINK-" if via else "PR4-") + kind
        note = "direct" if not via else "via:" + ">".join(map(str, path))
        return [Step(rule, (tid_p, tid_n) + via, cur.id, note, path)]

    # -- applying steps -----------------------------------------------------

    def set(self, tid: int, e: Expr) -> None:
        self.threads[tid] = e
        self._mark(tid)

    def apply(self, st: Step) -> Step:
        """Fire ``st``; returns it with any newly allocated ids filled in."""
        match st.rule:
            case "PR0":
                (tid,) = st.tids
                d = self.decomp(tid)
                if d.kind == "pure":
                    new = reduce_pure(d.term)
                else:
                    new = reduce_adhoc(d.term.name, d.term.args, self.rng)
                self.set(tid, d.ctx.plug(new))
            case "PR1":
                (tid,) = st.tids
                d = self.decomp(tid)
                k = self._new_tid()
                self.set(k, App(d.term.args[0], Unit()))
                self.set(tid, d.ctx.plug(Unit()))
                return replace(st, tids=(tid, k))
            case "PR2":
                (tid,) = st.tids
                del self.threads[tid]
                self._dec.pop(tid, None)
                self._mark(tid)
            case "PR3":
                (tid,) = st.tids
                d = self.decomp(tid)
                fn = d.term.args[0]
                if d.term.name == "service_request":
                    fn = fn.args[0]
                s = _param_session(fn)
                cid = self.store.fresh(s)
                k = self._new_tid()
                self.set(k, App(fn, Chan(Endpoint(cid, True))))
                self.set(tid, d.ctx.plug(Chan(Endpoint(cid, False))))
                return replace(st, tids=(tid, k), chan=cid, path=(cid,))
            case "CREATE2":
                (tid,) = st.tids
                d = self.decomp(tid)
                fn = d.term.args[0]
                annot = fn.annot
                if not isinstance(annot, ProdL):
                    raise RuntimeFault("chneg_create2 needs a pair-of-channels parameter")
                c1 = self.store.fresh(annot.left.session)
                c2 = self.store.fresh(annot.right.session)
                k = self._new_tid()
                self.set(k, App(fn, Pair(Chan(Endpoint(c1, True)), Chan(Endpoint(c2, True)))))
                self.set(tid, d.ctx.plug(Pair(Chan(Endpoint(c1, False)), Chan(Endpoint(c2, False)))))
                return replace(st, tids=(tid, k), chan=c1, path=(c1, c2))
            case "PR4-clos":
                tid_p, tid_n = st.tids
                for t in (tid_p, tid_n):
                    d = self.decomp(t)
                    self.set(t, d.ctx.plug(Unit()))
                self._close(st.chan)
            case "LINK-clos":
                tid_c, tid_l = st.tids
                dc, dl = self.decomp(tid_c), self.decomp(tid_l)
                self.set(tid_c, dc.ctx.plug(Unit()))
                a, b = dl.term.args
                if dc.endpoint.dual == a.ep:
                    rest = ConstApp("channeg_close", (b,))
                else:
                    rest = ConstApp("chanpos_close", (a,))
                self.set(tid_l, dl.ctx.plug(rest))
                self._close(st.chan)
            case _:
                self._communicate(st)
        return st

    def _new_tid(self) -> int:
        k = self.pool.next_tid
        self.pool.next_tid += 1
        return k

    def _close(self, cid: int) -> None:
        rec = self.store.channels.pop(cid)
        for s in (rec.pos, rec.neg):
            if not isinstance(self.env.whnf(s), Nil):
                raise RuntimeFault(f"closing channel {cid} with session {s} left")

    def _advance(self, cid: int, how) -> None:
        rec = self.store.channels[cid]
        rec.pos = how(self.env.whnf(rec.pos))
        rec.neg = how(self.env.whnf(rec.neg))

    def _communicate(self, st: Step) -> None:
        tid_p, tid_n = st.tids[:2]
        dp, dn = self.decomp(tid_p), self.decomp(tid_n)
        ch_p, ch_n = Chan(dp.endpoint), Chan(dn.endpoint)
        kind = st.rule.split("-", 1)[1]
        match kind:
            case "send":  # positive end sends
                v = dp.term.args[1]
                self.set(tid_p, dp.ctx.plug(ch_p))
                self.set(tid_n, dn.ctx.plug(Pair(ch_n, v)))
                how = _expect(Snd)
            case "recv":  # negative end sends
                v = dn.term.args[1]
                self.set(tid_p, dp.ctx.plug(Pair(ch_p, v)))
                self.set(tid_n, dn.ctx.plug(ch_n))
                how = _expect(Rcv)
            case "tag":
                sel, off = (dp, dn) if dp.op == "select" else (dn, dp)
                tid_s, tid_o = (tid_p, tid_n) if dp.op == "select" else (tid_n, tid_p)
                tag = sel.term.tag
                arm = off.term.arm(tag)
                if arm is None:
                    raise RuntimeFault(f"offer has no arm #{tag}")
                self.set(tid_s, sel.ctx.plug(Chan(sel.endpoint)))
                self.set(tid_o, off.ctx.plug(subst(arm, {off.term.var: Chan(off.endpoint)})))
                how = _choose(tag)
            case _:
                raise RuntimeFault(f"unknown rule {st.rule}")
        for cid in st.path:
            self._advance(cid, how)


def _follow(ep_n: Endpoint, linkers):
    """Walk from a negative end through linking threads to the positive end
    that finally answers it; ``False`` for a malformed chain."""
    path = [ep_n.id]
    via: list[int] = []
    cur = ep_n.dual
    while cur in linkers:
        ltid, d = linkers[cur]
        a, b = (x.ep for x in d.term.args)
        if cur != a or ltid in via:
            return False
        via.append(ltid)
        path.append(b.id)
        cur = b.dual
    return cur, tuple(via), tuple(path)


def _pair_kind(op_p: str, op_n: str) -> Optional[str]:
    match op_p, op_n:
        case "chanpos_send", "channeg_send":
            return "send"
        case "chanpos_recv", "channeg_recv":
            return "recv"
        case "chanpos_close", "channeg_close":
            return "clos"
        case ("select", "offer") | ("offer", "select"):
            return "tag"
    return None


def _expect(cls):
    def step(s):
        if not isinstance(s, cls):
            raise RuntimeFault(f"session {s} cannot take a {cls.__name__} step")
        return s.rest
    return step


def _choose(tag: str):
    def step(s):
        if not isinstance(s, Branch) or s.arm(tag) is None:
            raise RuntimeFault(f"session {s} has no branch #{tag}")
        return s.arm(tag)
    return step


def _param_session(fn: Expr) -> Session:
    if not isinstance(fn, Lam) or not isinstance(fn.annot, ChPos):
        raise RuntimeFault("channel creation needs a function on a positive channel")
    return fn.annot.session


def enabled_steps(m: Machine) -> list[Step]:
    return m.enabled_steps()


def apply_step(m: Machine, st: Step) -> Step:
    """Apply ``st`` in place; returns it with allocated ids filled in."""
    return m.apply(st)


# ---------------------------------------------------------------------------
# scheduling


class Scheduler:
    def __init__(self, policy: str, rng: random.Random):
        self.policy = policy
        self.rng = rng
        self.cursor = 0

    def choose(self, steps: list[Step]) -> Step:
        match self.policy:
            case "random":
                return steps[self.rng.randrange(len(steps))]
            case "rr":
                later = [s for s in steps if min(s.tids) >= self.cursor]
                pick = min(later or steps, key=lambda s: min(s.tids))
                self.cursor = min(pick.tids) + 1
                return pick
            case "adversarial":
                # hold back communication for as long as anything else can move
                local = [s for s in steps if s.rule in LOCAL_RULES]
                pool = local or steps
                return pool[self.rng.randrange(len(pool))]
        raise ValueError(self.policy)


def summary(threads: dict[int, Expr]) -> str:
    return " ".join(f"{tid}:{show_set(threads[tid].res)}" for tid in sorted(threads))


def deadlock_witness(m: Machine) -> dict:
    """Each thread's partial redex plus the graph of who waits on whom."""
    holder = {e: tid for tid, x in m.threads.items() for e in x.res}
    g = nx.DiGraph()
    blocked = {}
    for tid in sorted(m.threads):
        d = m.decomp(tid)
        g.add_node(tid)
        if isinstance(d, Blocked):
            eps = [a.ep for a in d.term.args] if d.op == "chposneg_link" else [d.endpoint]
            blocked[tid] = f"{d.op}({', '.join(map(str, eps))})"
            for e in eps:
                if e.dual in holder:
                    g.add_edge(tid, holder[e.dual], chan=e.id)
        elif isinstance(d, IsValue):
            blocked[tid] = "value"
        else:
            blocked[tid] = d.kind
    try:
        cycle = [(u, v) for u, v in nx.find_cycle(g)]
    except nx.NetworkXNoCycle:
        cycle = []
    return {
        "threads": blocked,
        "edges": sorted((u, v, g.edges[u, v]["chan"]) for u, v in g.edges),
        "cycle": cycle,
    }


def run(main: Expr, env: SessionEnv, cfg: SchedulerConfig = SchedulerConfig(),
        monitors: Monitors = Monitors(), *, allow_create2: bool = False,
        trace: int = 0) -> RunResult:
    """Run the pool ``[0 -> main]`` to an outcome."""
    m = Machine(main, env, seed=cfg.seed, allow_create2=allow_create2)
    sched = Scheduler(cfg.policy, m.rng)
    events: list[TraceEvent] = []
    violations: list[MonitorViolation] = []
    counts: dict[str, int] = {}
    memo: dict = {}
    cache: dict = {}
    main_type = None

    def violate(kind: str, step: int, detail: str) -> Optional[MonitorViolation]:
        v = MonitorViolation(kind, step, detail)
        violations.append(v)
        return v if monitors.halt else None

    if monitors.types:
        try:
            main_type = check_pool(m.pool, m.store, env, allow_create2=allow_create2,
                                   memo=memo, cache=cache)
        except TypeErr as err:
            if (v := violate("types", 0, f"{err.code}: {err.msg}")) is not None:
                return RunResult(v, 0, events, violations, m, counts)
    prev_sets = rch_map(m.threads) if monitors.df else None
    n = 0
    while True:
        if m.is_final():
            return RunResult(FinalValue(m.threads[0]), n, events, violations, m, counts)
        steps = m.enabled_steps()
        if not steps:
            v0 = m.threads[0]
            if v0.is_val and v0.res:
                return RunResult(FinalValue(v0, residual=True), n, events, violations, m, counts)
            return RunResult(Deadlock(deadlock_witness(m)), n, events, violations, m, counts)
        if n >= cfg.steps:
            return RunResult(StepLimit(n), n, events, violations, m, counts)
        st = sched.choose(steps)
        st = m.apply(st)
        n += 1
        counts[st.rule] = counts.get(st.rule, 0) + 1
        ev = TraceEvent(n, st.rule, st.tids, st.chan, st.note,
                        summary(m.threads) if trace >= 2 else "", st.path)
        if trace:
            events.append(ev)
        if monitors.any:
            next_sets = rch_map(m.threads) if monitors.df else None
            v = _monitor(m, ev, monitors, prev_sets, next_sets, memo, cache, main_type,
                         allow_create2, violate)
            if v is not None:
                return RunResult(v, n, events, violations, m, counts)
            prev_sets = next_sets


def _monitor(m: Machine, ev: TraceEvent, monitors: Monitors, prev_sets, nxt, memo, cache,
             main_type, allow_create2, violate) -> Optional[MonitorViolation]:
    if monitors.df:
        v0 = m.threads[0]
        exempt = v0.is_val and bool(v0.res)
        res = monitor_step(prev_sets, ev, nxt, terminal_exempt=exempt)
        if not res.ok:
            if (v := violate("df", ev.step, f"{res.check}: {res.detail}")) is not None:
                return v
        live = {Endpoint(c, p) for c, r in m.store.channels.items() for p in r.live}
        held = {e for s in nxt.values() for e in s}
        if live != held:
            if (v := violate("df", ev.step, "channel store disagrees with the pool")) is not None:
                return v
    if monitors.types:
        try:
            t = check_pool(m.pool, m.store, m.env, allow_create2=allow_create2,
                           memo=memo, cache=cache)
            if main_type is not None and not m.env.type_eq(t, main_type):
                raise TypeErr("pool-main", f"main thread changed type from {main_type} to {t}")
        except TypeErr as err:
            if (v := violate("types", ev.step, f"{err.code}: {err.msg}")) is not None:
                return v
    if monitors.canonical:
        restype = resource_typing(m.store)
        for tid, e in m.threads.items():
            if not e.is_val:
                continue
            try:
                t = Checker(m.env, allow_create2=allow_create2, restype=restype,
                            memo=memo).check(e)
                if not canonical_form(e, t, m.env):
                    raise AuditError(f"thread {tid}: value does not have the canonical form of {t}")
                if not is_linear(t):
                    check_value_purity(e, t)
            except (TypeErr, AuditError) as err:
                if (v := violate("canonical", ev.step, str(err))) is not None:
                    return v
    return None
