"""Algorithmic linear type checking with leftover-context threading.

The linear context is a set of binding ids that are still available; a
rule that consumes a linear variable removes its id.  Branching rules run
each branch from the same snapshot and insist on identical leftovers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .parser import (
    ElabError, ParseError, Program, fun_lambda, fun_sccs, fun_type, is_recursive,
)
from .session import SessionEnv, SessionError, subst_vtype
from .syntax import (
    BOOL, INT, UNIT, App, ArrowI, ArrowL, Base, Branch, Chan, ChNeg, ChPos,
    ConstApp, Endpoint, Expr, Fix, FixVar, Fst, If, Lam, LetPair, Lit, Named,
    Nil, Offer, Pair, ProdI, ProdL, Rcv, Select, Service, Session, Snd, Snd_,
    SVar, TVar, TVarLin, Unit, UnitT, Var, VType, is_linear, is_value, mk_prod,
)


class TypeErr(Exception):
    def __init__(self, code: str, msg: str, loc=None):
        super().__init__(msg)
        self.code, self.msg, self.loc = code, msg, loc


@dataclass(frozen=True)
class Diagnostic:
    level: str
    file: str
    line: int
    col: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.level} {self.file}:{self.line}:{self.col} {self.code} {self.message}"


# ---------------------------------------------------------------------------
# signature


@dataclass(frozen=True)
class CType:
    params: tuple[VType, ...]
    result: VType

    def __str__(self) -> str:
        return f"({', '.join(map(str, self.params))}) => {self.result}"


_a = TVarLin("?a")
_b = TVar("?b")
_s, _s1, _s2 = SVar("?s"), SVar("?s1"), SVar("?s2")

_ARITH = CType((INT, INT), INT)
_CMP = CType((INT, INT), BOOL)
_LOGIC = CType((BOOL, BOOL), BOOL)

BASE_SIGNATURE: dict[str, CType] = {
    "thread_create": CType((ArrowL(UNIT, UNIT),), UNIT),
    "chneg_create": CType((ArrowL(ChPos(_s), UNIT),), ChNeg(_s)),
    "chanpos_send": CType((ChPos(Snd(_a, _s)), _a), ChPos(_s)),
    "chanpos_recv": CType((ChPos(Rcv(_a, _s)),), ProdL(ChPos(_s), _a)),
    "channeg_recv": CType((ChNeg(Rcv(_a, _s)), _a), ChNeg(_s)),
    "channeg_send": CType((ChNeg(Snd(_a, _s)),), ProdL(ChNeg(_s), _a)),
    "chanpos_close": CType((ChPos(Nil()),), UNIT),
    "channeg_close": CType((ChNeg(Nil()),), UNIT),
    "chposneg_link": CType((ChPos(_s), ChNeg(_s)), UNIT),
    "service_create": CType((ArrowI(ChPos(_s), UNIT),), Service(_s)),
    "service_request": CType((Service(_s),), ChNeg(_s)),
    "randbit": CType((), INT),
    "+": _ARITH, "-": _ARITH, "*": _ARITH, "/": _ARITH, "mod": _ARITH,
    "<": _CMP, "<=": _CMP, ">": _CMP, ">=": _CMP,
    "=": CType((_b, _b), BOOL), "<>": CType((_b, _b), BOOL),
    "&&": _LOGIC, "||": _LOGIC,
    "not": CType((BOOL,), BOOL),
}

CREATE2 = CType(
    (ArrowL(ProdL(ChPos(_s1), ChPos(_s2)), UNIT),),
    ProdL(ChNeg(_s1), ChNeg(_s2)),
)

# operations that block until a partner thread acts on the dual endpoint
CHANNEL_OPS = frozenset({
    "chanpos_send", "chanpos_recv", "channeg_send", "channeg_recv",
    "chanpos_close", "channeg_close", "chposneg_link",
})


def signature(allow_create2: bool = False) -> dict[str, CType]:
    sig = dict(BASE_SIGNATURE)
    if allow_create2:
        sig["chneg_create2"] = CREATE2
    return sig


# ---------------------------------------------------------------------------
# instantiation


class NoUnifier(Exception):
    pass


@dataclass
class TypeSubst:
    types: dict[str, VType] = field(default_factory=dict)
    sessions: dict[str, Session] = field(default_factory=dict)

    def apply(self, t: VType) -> VType:
        return subst_vtype(t, self.types, self.sessions)


def instantiate(ct: CType, args: list[VType], env: SessionEnv) -> tuple[TypeSubst, VType]:
    """Most general instance of ``ct`` whose parameters are ``args``."""
    if len(ct.params) != len(args):
        raise NoUnifier(f"expected {len(ct.params)} argument(s), got {len(args)}")
    theta = TypeSubst()
    for p, a in zip(ct.params, args):
        _unify_vt(p, a, theta, env)
    return theta, theta.apply(ct.result)


def _unify_vt(p: VType, a: VType, theta: TypeSubst, env: SessionEnv) -> None:
    match p:
        case TVar(n) | TVarLin(n) if n.startswith("?"):
            if n in theta.types:
                if not env.type_eq(theta.types[n], a):
                    raise NoUnifier(f"{theta.types[n]} vs {a}")
                return
            if isinstance(p, TVar) and is_linear(a):
                raise Stratify(f"type variable cannot stand for the linear type {a}")
            theta.types[n] = a
            return
        case ProdI(pl, pr) | ProdL(pl, pr) | ArrowI(pl, pr) | ArrowL(pl, pr):
            if type(a) is not type(p):
                raise NoUnifier(f"{p} vs {a}")
            _unify_vt(pl, _left(a), theta, env)
            _unify_vt(pr, _right(a), theta, env)
            return
        case ChPos(ps) | ChNeg(ps) | Service(ps):
            if type(a) is not type(p):
                raise NoUnifier(f"{p} vs {a}")
            _unify_sess(ps, a.session, theta, env)
            return
    if not env.type_eq(p, a):
        raise NoUnifier(f"{p} vs {a}")


class Stratify(NoUnifier):
    pass


def _left(t):
    return t.left if isinstance(t, (ProdI, ProdL)) else t.dom


def _right(t):
    return t.right if isinstance(t, (ProdI, ProdL)) else t.cod


def _unify_sess(p: Session, s: Session, theta: TypeSubst, env: SessionEnv) -> None:
    if isinstance(p, SVar) and p.name.startswith("?"):
        if p.name in theta.sessions:
            if not env.sess_eq(theta.sessions[p.name], s):
                raise NoUnifier(f"{theta.sessions[p.name]} vs {s}")
            return
        theta.sessions[p.name] = s
        return
    try:
        w = env.whnf(s)
    except SessionError as err:
        raise NoUnifier(str(err)) from None
    match p:
        case Snd(pt, pr) | Rcv(pt, pr):
            if type(w) is not type(p):
                raise NoUnifier(f"{p} vs {s}")
            _unify_vt(pt, w.payload, theta, env)
            _unify_sess(pr, w.rest, theta, env)
            return
    if not env.sess_eq(p, w):
        raise NoUnifier(f"{p} vs {s}")


# ---------------------------------------------------------------------------
# the checker


@dataclass
class TypingCtx:
    gamma: dict[str, VType] = field(default_factory=dict)
    delta: dict[str, VType] = field(default_factory=dict)


_MISSING = object()


class Checker:
    """One checking session: a signature, a resource typing and a memo.

    ``memo`` caches the types of closed resource-free subterms by identity,
    which makes re-checking a pool after each step cheap because most of a
    thread's code is shared with the previous step.
    """

    def __init__(self, env: SessionEnv, *, allow_create2: bool = False,
                 restype: Optional[dict[Endpoint, VType]] = None,
                 memo: Optional[dict] = None):
        self.env = env
        self.sig = signature(allow_create2)
        self.restype = restype if restype is not None else {}
        self.memo = memo if memo is not None else {}
        self.gamma: dict[str, VType] = {}
        self.lin: dict[str, tuple[int, VType]] = {}
        self.avail: set[int] = set()
        self._uid = 0

    # -- context ----------------------------------------------------------

    def bind(self, x: str, t: VType):
        saved = (x, self.gamma.pop(x, _MISSING), self.lin.pop(x, _MISSING))
        if is_linear(t):
            self._uid += 1
            self.lin[x] = (self._uid, t)
            self.avail.add(self._uid)
        else:
            self.gamma[x] = t
        return saved

    def unbind(self, saved, loc) -> None:
        x, g, l = saved
        if x in self.lin:
            uid, t = self.lin.pop(x)
            if uid in self.avail:
                self.avail.discard(uid)
                raise TypeErr("lin-unused", f"linear variable {x}: {t} is never consumed", loc)
        else:
            self.gamma.pop(x, None)
        if g is not _MISSING:
            self.gamma[x] = g
        if l is not _MISSING:
            self.lin[x] = l

    def lookup(self, x: str, loc) -> VType:
        if x in self.lin:
            uid, t = self.lin[x]
            if uid not in self.avail:
                raise TypeErr("lin-reuse", f"linear variable {x} is used more than once", loc)
            self.avail.discard(uid)
            return t
        if x in self.gamma:
            return self.gamma[x]
        raise TypeErr("unbound", f"unbound variable {x}", loc)

    # -- rules --------------------------------------------------------------

    def eq(self, a: VType, b: VType) -> bool:
        try:
            return self.env.type_eq(a, b)
        except SessionError as err:
            raise TypeErr("session-undef", str(err)) from None

    def expect(self, want: VType, got: VType, what: str, loc) -> None:
        if not self.eq(want, got):
            raise TypeErr("mismatch", f"{what}: expected {want}, found {got}", loc)

    def check(self, e: Expr) -> VType:
        closed = not e.fv and not e.res
        if closed:
            hit = self.memo.get(id(e))
            if hit is not None and hit[0] is e:
                return hit[1]
        t = self._check(e)
        if closed:
            self.memo[id(e)] = (e, t)
        return t

    def _check(self, e: Expr) -> VType:
        loc = e.loc
        match e:
            case Lit(v):
                return BOOL if isinstance(v, bool) else INT
            case Unit():
                return UNIT
            case Var(x) | FixVar(x):
                return self.lookup(x, loc)
            case Chan(ep):
                t = self.restype.get(ep)
                if t is None:
                    raise TypeErr("res-unknown", f"channel {ep} is not live", loc)
                return t
            case Pair(a, b):
                return mk_prod(self.check(a), self.check(b))
            case Fst(a) | Snd_(a):
                t = self.check(a)
                if isinstance(t, ProdL):
                    raise TypeErr("mismatch", f"cannot project from linear pair {t}", loc)
                if not isinstance(t, ProdI):
                    raise TypeErr("mismatch", f"projection expects a pair, found {t}", loc)
                return t.left if isinstance(e, Fst) else t.right
            case LetPair(x1, x2, a, b):
                if x1 == x2:
                    raise TypeErr("dup-bind", f"{x1} is bound twice in one pattern", loc)
                t = self.check(a)
                if not isinstance(t, (ProdI, ProdL)):
                    raise TypeErr("mismatch", f"pair pattern expects a pair, found {t}", loc)
                s1 = self.bind(x1, t.left)
                s2 = self.bind(x2, t.right)
                tb = self.check(b)
                self.unbind(s2, loc)
                self.unbind(s1, loc)
                return tb
            case If(c, a, b):
                self.expect(BOOL, self.check(c), "condition", c.loc)
                snap = set(self.avail)
                ta = self.check(a)
                after = self.avail
                self.avail = snap
                tb = self.check(b)
                if self.avail != after:
                    raise TypeErr("lin-branch", "branches consume different linear variables: "
                                  + self._describe(after ^ self.avail), loc)
                self.expect(ta, tb, "else branch", b.loc)
                if Counter(a.res) != Counter(b.res):
                    raise TypeErr("res-mismatch", "branches hold different channels", loc)
                return ta
            case App(Lam(x, None, body, True), arg):
                targ = self.check(arg)
                saved = self.bind(x, targ)
                tb = self.check(body)
                self.unbind(saved, loc)
                return tb
            case Lam(x, annot, body, lin):
                if annot is None:
                    raise TypeErr("annot", f"parameter {x} needs a type annotation", loc)
                self._wf(annot, loc)
                outer = set(self.avail)
                saved = self.bind(x, annot)
                tb = self.check(body)
                self.unbind(saved, loc)
                if not lin:
                    self._no_capture(outer, "an intuitionistic function", loc)
                    if body.res:
                        raise TypeErr("lin-capture",
                                      "an intuitionistic function cannot hold channels", loc)
                return (ArrowL if lin else ArrowI)(annot, tb)
            case Fix(f, annot, body):
                if annot is None:
                    raise TypeErr("annot", f"fix {f} needs a type annotation", loc)
                if is_linear(annot):
                    raise TypeErr("stratify", f"fix {f} must have a nonlinear type, not {annot}", loc)
                if not is_value(body):
                    raise TypeErr("syntax", f"the body of fix {f} must be a value", loc)
                outer = set(self.avail)
                saved = self.bind(f, annot)
                tb = self.check(body)
                self.unbind(saved, loc)
                self._no_capture(outer, "a recursive definition", loc)
                self.expect(annot, tb, f"body of fix {f}", loc)
                return annot
            case App(fn, arg):
                tf = self.check(fn)
                ta = self.check(arg)
                if not isinstance(tf, (ArrowI, ArrowL)):
                    raise TypeErr("mismatch", f"applying a non-function of type {tf}", loc)
                self.expect(tf.dom, ta, "argument", arg.loc or loc)
                return tf.cod
            case ConstApp(name, args):
                return self._const(name, args, loc)
            case Select(tag, c):
                t = self.check(c)
                br = self._branch(t, loc)
                if not _sends_tag(t, br):
                    raise TypeErr("tag", f"this endpoint must offer, not select ({t})", loc)
                cont = br.arm(tag)
                if cont is None:
                    raise TypeErr("tag", f"#{tag} is not a branch of {br}", loc)
                return type(t)(cont)
            case Offer(c, x, arms):
                return self._offer(c, x, arms, loc)
        raise TypeErr("syntax", f"unexpected expression {e!r}", loc)

    def _describe(self, uids: set[int]) -> str:
        names = sorted(x for x, (u, _) in self.lin.items() if u in uids)
        return ", ".join(names) if names else "(out of scope)"

    def _no_capture(self, outer: set[int], what: str, loc) -> None:
        used = outer - self.avail
        if used:
            raise TypeErr("lin-capture",
                          f"{what} captures linear variable(s) {self._describe(used)}", loc)

    def _wf(self, t: VType, loc) -> None:
        """Reject annotations mentioning undefined or ill-applied sessions."""
        try:
            _walk_sessions(t, self.env)
        except SessionError as err:
            raise TypeErr("session-undef", str(err), loc) from None

    def _branch(self, t: VType, loc) -> Branch:
        if not isinstance(t, (ChPos, ChNeg)):
            raise TypeErr("mismatch", f"expected a channel, found {t}", loc)
        try:
            w = self.env.whnf(t.session)
        except SessionError as err:
            raise TypeErr("session-undef", str(err), loc) from None
        if not isinstance(w, Branch):
            raise TypeErr("tag", f"channel session {t.session} is not a choice", loc)
        return w

    def _offer(self, c, x, arms, loc) -> VType:
        t = self.check(c)
        br = self._branch(t, loc)
        if _sends_tag(t, br):
            raise TypeErr("tag", f"this endpoint must select, not offer ({t})", loc)
        have = [k for k, _ in arms]
        want = [k for k, _ in br.arms]
        if sorted(have) != sorted(want) or len(set(have)) != len(have):
            raise TypeErr("tag", f"offer arms {have} do not match the branches {want}", loc)
        snap = set(self.avail)
        result = after = res = None
        for tag, body in arms:
            self.avail = set(snap)
            saved = self.bind(x, type(t)(br.arm(tag)))
            tb = self.check(body)
            self.unbind(saved, loc)
            if result is None:
                result, after, res = tb, self.avail, Counter(body.res)
                continue
            if self.avail != after:
                raise TypeErr("lin-branch", f"arm #{tag} consumes different linear variables: "
                              + self._describe(after ^ self.avail), body.loc or loc)
            self.expect(result, tb, f"arm #{tag}", body.loc or loc)
            if Counter(body.res) != res:
                raise TypeErr("res-mismatch", "offer arms hold different channels", loc)
        return result

    def _const(self, name: str, args, loc) -> VType:
        ct = self.sig.get(name)
        if ct is None:
            raise TypeErr("unknown-const", f"unknown constant {name}", loc)
        if len(args) != len(ct.params):
            raise TypeErr("mismatch", f"{name} expects {len(ct.params)} argument(s), "
                          f"got {len(args)}", loc)
        types = [self.check(a) for a in args]
        if name in ("=", "<>"):
            a, b = types
            if not isinstance(a, Base) or a != b:
                raise TypeErr("mismatch", f"{name} compares int or bool values, "
                              f"found {a} and {b}", loc)
            return BOOL
        try:
            _, result = instantiate(ct, types, self.env)
        except Stratify as err:
            raise TypeErr("stratify", f"{name}: {err}", loc) from None
        except NoUnifier as err:
            shown = ", ".join(map(str, types))
            raise TypeErr("no-unifier", f"{name} : {ct} cannot take ({shown})", loc) from None
        return result


def _sends_tag(t: VType, br: Branch) -> bool:
    return (br.direction == "snd") == isinstance(t, ChPos)


def _walk_sessions(t, env: SessionEnv) -> None:
    match t:
        case ChPos(s) | ChNeg(s) | Service(s):
            _walk_sessions(s, env)
        case ProdI(l, r) | ProdL(l, r) | ArrowI(l, r) | ArrowL(l, r):
            _walk_sessions(l, env)
            _walk_sessions(r, env)
        case Named():
            env.whnf(t)
            for a in t.args:
                _walk_sessions(a, env)
        case Snd(p, r) | Rcv(p, r):
            _walk_sessions(p, env)
            _walk_sessions(r, env)
        case Branch(_, arms):
            for _, a in arms:
                _walk_sessions(a, env)


# ---------------------------------------------------------------------------
# public entry points


def check(ctx: TypingCtx, e: Expr, env: SessionEnv | None = None, *,
          allow_create2: bool = False,
          restype: Optional[dict[Endpoint, VType]] = None) -> tuple[VType, dict[str, VType]]:
    """Type ``e`` under ``ctx``; return its type and the unconsumed part of Δ."""
    env = env or SessionEnv()
    c = Checker(env, allow_create2=allow_create2, restype=restype)
    for x, t in ctx.gamma.items():
        if is_linear(t):
            raise TypeErr("stratify", f"{x}: {t} is linear and cannot live in the "
                          "intuitionistic context")
        c.gamma[x] = t
    uids = {}
    for x, t in ctx.delta.items():
        if x in ctx.gamma:
            raise TypeErr("dup-bind", f"{x} is bound in both contexts")
        c._uid += 1
        uids[x] = c._uid
        c.lin[x] = (c._uid, t)
        c.avail.add(c._uid)
    t = c.check(e)
    leftover = {x: ctx.delta[x] for x, u in uids.items() if u in c.avail}
    return t, leftover


def check_closed(e: Expr, env: SessionEnv, **kw) -> VType:
    return Checker(env, **kw).check(e)


@dataclass
class CheckResult:
    diagnostics: list[Diagnostic]
    fun_types: dict[str, VType]
    main_type: Optional[VType]

    @property
    def ok(self) -> bool:
        return not self.diagnostics


def check_program(prog: Program, file: str = "<input>", *,
                  allow_create2: bool = False) -> CheckResult:
    """Check every function and then ``main``.

    Functions are checked in dependency order with the types of earlier
    functions in the intuitionistic context, so each error is reported at
    the function it occurs in.
    """
    env = prog.env
    diags: list[Diagnostic] = []
    types: dict[str, VType] = {}
    broken: set[str] = set()

    def report(err: TypeErr, fallback):
        line, col = err.loc or fallback or (1, 1)
        diags.append(Diagnostic("error", file, line, col, err.code, err.msg))

    if prog.fun("main") is None:
        diags.append(Diagnostic("error", file, 1, 1, "main", "program has no main function"))
        return CheckResult(diags, types, None)
    main_type = None
    for scc in fun_sccs(prog):
        funs = [prog.fun(n) for n in scc]
        deps = set().union(*(fun_lambda(f).fv for f in funs)) - set(scc)
        if deps & broken:
            broken.update(scc)
            continue
        rec = is_recursive(prog, scc)
        if "main" in scc:
            f = funs[0]
            if rec or f.params:
                why = "recursive" if rec else "given parameters"
                diags.append(Diagnostic("error", file, *f.loc, "main", f"main may not be {why}"))
                continue
        declared = {}
        if rec:
            missing = [f for f in funs if f.ret is None]
            if missing:
                for f in missing:
                    diags.append(Diagnostic("error", file, *f.loc, "annot",
                                            f"recursive function {f.name} needs a return type"))
                broken.update(scc)
                continue
            declared = {f.name: fun_type(f) for f in funs}
        for f in funs:
            c = Checker(env, allow_create2=allow_create2)
            c.gamma.update(types)
            c.gamma.update(declared)
            try:
                if f.name == "main":
                    main_type = c.check(f.body)
                    continue
                lam = fun_lambda(f)
                c._wf(lam.annot, f.loc)
                t = c.check(lam)
                if f.ret is not None:
                    c._wf(f.ret, f.loc)
                    c.expect(f.ret, t.cod, f"result of {f.name}", f.loc)
                types[f.name] = declared.get(f.name, t)
            except TypeErr as err:
                report(err, f.loc)
                if f.ret is None or not rec:
                    broken.add(f.name)
                if f.ret is not None:
                    types[f.name] = fun_type(f)
    return CheckResult(diags, types, main_type)


def check_source(text: str, file: str = "<input>", *, allow_create2: bool = False):
    """Parse and check; returns ``(program or None, CheckResult)``."""
    from .parser import parse

    try:
        prog = parse(text)
    except ParseError as err:
        d = Diagnostic("error", file, err.line, err.col, err.code, err.msg)
        return None, CheckResult([d], {}, None)
    return prog, check_program(prog, file, allow_create2=allow_create2)


# ---------------------------------------------------------------------------
# pools and audits


class PoolTypeError(TypeErr):
    def __init__(self, code: str, msg: str, tid: Optional[int] = None):
        super().__init__(code, msg)
        self.tid = tid


def resource_typing(store) -> dict[Endpoint, VType]:
    out = {}
    for cid, rec in store.channels.items():
        if True in rec.live:
            out[Endpoint(cid, True)] = ChPos(rec.pos)
        if False in rec.live:
            out[Endpoint(cid, False)] = ChNeg(rec.neg)
    return out


def check_pool(pool, store, env: SessionEnv, *, allow_create2: bool = False,
               memo: Optional[dict] = None, cache: Optional[dict] = None) -> VType:
    """Type a whole pool: thread 0 at any type, every other thread at unit.

    Also enforces that no endpoint occurs twice and that the two ends of a
    live channel carry matching sessions.  ``cache`` (thread id to term,
    endpoint types and result) skips threads whose term and channel types
    are unchanged since the previous call.
    """
    threads = pool.threads if hasattr(pool, "threads") else pool
    counts: Counter = Counter()
    for e in threads.values():
        counts.update(e.res)
    dup = sorted(ep for ep, n in counts.items() if n > 1)
    if dup:
        raise PoolTypeError("pool-regularity", f"endpoint {dup[0]} occurs more than once")
    restype = resource_typing(store)
    for ep in counts:
        if ep not in restype:
            raise PoolTypeError("pool-unknown", f"endpoint {ep} is not in the channel store")
    for cid, rec in store.channels.items():
        if len(rec.live) == 2 and not env.matches(rec.pos, rec.neg):
            raise PoolTypeError("pool-mismatch",
                                f"channel {cid}: chpos({rec.pos}) does not match chneg({rec.neg})")
    if 0 not in threads:
        raise PoolTypeError("pool-main", "thread 0 is missing")
    main_t = None
    for tid in sorted(threads):
        e = threads[tid]
        sig = tuple((ep, restype[ep]) for ep in e.res)
        hit = cache.get(tid) if cache is not None else None
        if hit is not None and hit[0] is e and hit[1] == sig:
            t = hit[2]
        else:
            c = Checker(env, allow_create2=allow_create2, restype=restype, memo=memo)
            try:
                t = c.check(e)
            except TypeErr as err:
                raise PoolTypeError(err.code, f"thread {tid}: {err.msg}", tid) from None
            if cache is not None:
                cache[tid] = (e, sig, t)
        if tid == 0:
            main_t = t
        elif not env.type_eq(t, UNIT):
            raise PoolTypeError("pool-thread", f"thread {tid} has type {t}, not unit", tid)
    return main_t


class AuditError(Exception):
    pass


def check_value_purity(v: Expr, t: VType) -> bool:
    """A closed value of a nonlinear type holds no channels."""
    if is_linear(t):
        raise ValueError(f"purity audit needs a nonlinear type, got {t}")
    if v.res:
        raise AuditError(f"value of nonlinear type {t} holds channels {list(map(str, v.res))}")
    return True


def canonical_form(v: Expr, t: VType, env: SessionEnv) -> bool:
    """Does the head constructor of the closed value ``v`` agree with ``t``?"""
    match t:
        case Base("int"):
            return isinstance(v, Lit) and type(v.value) is int
        case Base("bool"):
            return isinstance(v, Lit) and type(v.value) is bool
        case UnitT():
            return isinstance(v, Unit)
        case ProdI(l, r) | ProdL(l, r):
            return isinstance(v, Pair) and canonical_form(v.first, l, env) and \
                canonical_form(v.second, r, env)
        case ArrowI():
            return isinstance(v, Lam) and not v.linear
        case ArrowL():
            return isinstance(v, Lam) and v.linear
        case ChPos():
            return isinstance(v, Chan) and v.ep.positive
        case ChNeg():
            return isinstance(v, Chan) and not v.ep.positive
        case Service():
            return isinstance(v, ConstApp) and v.name == "service_create"
    return False
