"""Session-type algebra: duality, named definitions, unfolding and equality.

Definitions may take type parameters (``a``, bound as ``TVarLin``) and
session parameters (``sess A``, bound as ``SVar``).  A ``Named`` reference
is instantiated lazily when it is unfolded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    ArrowI, ArrowL, Base, Branch, ChNeg, ChPos, Named, Nil, NilBar, ProdI,
    ProdL, Rcv, Service, Session, Snd, SVar, TVar, TVarLin, UnitT, VType,
    mk_prod,
)


class SessionError(Exception):
    """Unknown definition, bad arity, or a definition that never unfolds."""


@dataclass(frozen=True)
class SessDef:
    name: str
    tparams: tuple[str, ...]
    sparams: tuple[str, ...]
    body: Session
    loc: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.tparams) + len(self.sparams)


class SessionEnv:
    """Table of session definitions keyed by name."""

    # bisimulation budget for equality of non-regular instantiations
    EQ_BUDGET = 2000

    def __init__(self, defs=()):
        self.defs: dict[str, SessDef] = {}
        for d in defs:
            self.defs[d.name] = d
        self._unfolded: dict[Named, Session] = {}
        self._matched: dict[tuple, bool] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.defs

    def __repr__(self) -> str:
        return f"SessionEnv({sorted(self.defs)})"

    @property
    def depth_bound(self) -> int:
        return len(self.defs) + 1

    # -- unfolding --------------------------------------------------------

    def unfold(self, s: Session) -> Session:
        """Replace a named reference by its instantiated body, one step."""
        if not isinstance(s, Named):
            raise SessionError(f"cannot unfold non-reference {s}")
        hit = self._unfolded.get(s)
        if hit is not None:
            return hit
        d = self.defs.get(s.name)
        if d is None:
            raise SessionError(f"undefined session {s.name}")
        if len(s.args) != d.arity:
            raise SessionError(
                f"session {s.name} expects {d.arity} argument(s), got {len(s.args)}"
            )
        nt = len(d.tparams)
        tmap = dict(zip(d.tparams, s.args[:nt]))
        smap = dict(zip(d.sparams, s.args[nt:]))
        body = subst_session(d.body, tmap, smap)
        out = self._unfolded[s] = dual(body) if s.dual else body
        return out

    def whnf(self, s: Session) -> Session:
        """Unfold until the head is a constructor (or a variable)."""
        for _ in range(self.depth_bound):
            if not isinstance(s, Named):
                return s
            s = self.unfold(s)
        if isinstance(s, Named):
            raise SessionError(f"session {s.name} is not contractive")
        return s

    def check_contractive(self) -> None:
        for d in self.defs.values():
            args = tuple(TVarLin(p) for p in d.tparams) + tuple(SVar(p) for p in d.sparams)
            self.whnf(Named(d.name, args))

    # -- equality ---------------------------------------------------------

    def sess_eq(self, a: Session, b: Session) -> bool:
        """Structural equality of sessions up to unfolding of names."""
        return _Eq(self).sess(a, b)

    def type_eq(self, a: VType, b: VType) -> bool:
        return _Eq(self).vtype(a, b)

    def matches(self, pos: Session, neg: Session) -> bool:
        """Whether ``chpos(pos)`` and ``chneg(neg)`` describe one channel."""
        key = (pos, neg)
        hit = self._matched.get(key)
        if hit is None:
            try:
                hit = self.sess_eq(pos, neg)
            except SessionError:
                hit = False
            self._matched[key] = hit
        return hit


class _Eq:
    def __init__(self, env: SessionEnv):
        self.env = env
        self.assumed: set = set()
        self.budget = env.EQ_BUDGET

    def sess(self, a: Session, b: Session) -> bool:
        if a == b:
            return True
        if isinstance(a, Named) or isinstance(b, Named):
            key = (a, b)
            if key in self.assumed:
                return True
            self.budget -= 1
            if self.budget <= 0:
                return False
            self.assumed.add(key)
            return self.sess(self.env.whnf(a), self.env.whnf(b))
        match a, b:
            case (Snd(t1, r1), Snd(t2, r2)) | (Rcv(t1, r1), Rcv(t2, r2)):
                return self.vtype(t1, t2) and self.sess(r1, r2)
            case (Branch(d1, arms1), Branch(d2, arms2)):
                return (
                    d1 == d2
                    and [t for t, _ in arms1] == [t for t, _ in arms2]
                    and all(self.sess(x, y) for (_, x), (_, y) in zip(arms1, arms2))
                )
        return False

    def vtype(self, a: VType, b: VType) -> bool:
        if a == b:
            return True
        match a, b:
            case (ProdI(l1, r1), ProdI(l2, r2)) | (ProdL(l1, r1), ProdL(l2, r2)):
                return self.vtype(l1, l2) and self.vtype(r1, r2)
            case (ArrowI(l1, r1), ArrowI(l2, r2)) | (ArrowL(l1, r1), ArrowL(l2, r2)):
                return self.vtype(l1, l2) and self.vtype(r1, r2)
            case (ChPos(s1), ChPos(s2)) | (ChNeg(s1), ChNeg(s2)) | (Service(s1), Service(s2)):
                return self.sess(s1, s2)
        return False


def dual(s: Session) -> Session:
    """Swap the roles of the two endpoints: snd <-> rcv, nil <-> nilbar."""
    match s:
        case Nil():
            return NilBar()
        case NilBar():
            return Nil()
        case Snd(t, r):
            return Rcv(t, dual(r))
        case Rcv(t, r):
            return Snd(t, dual(r))
        case Branch(d, arms):
            return Branch("rcv" if d == "snd" else "snd", tuple((k, dual(a)) for k, a in arms))
        case Named(n, args, flag):
            return Named(n, args, not flag)
        case SVar(n, flag):
            return SVar(n, not flag)
    raise TypeError(f"dual: not a session {s!r}")


def subst_session(s: Session, tmap: dict, smap: dict) -> Session:
    """Instantiate type variables (``tmap``) and session variables (``smap``)."""
    if not tmap and not smap:
        return s
    match s:
        case Nil() | NilBar():
            return s
        case Snd(t, r):
            return Snd(subst_vtype(t, tmap, smap), subst_session(r, tmap, smap))
        case Rcv(t, r):
            return Rcv(subst_vtype(t, tmap, smap), subst_session(r, tmap, smap))
        case Branch(d, arms):
            return Branch(d, tuple((k, subst_session(a, tmap, smap)) for k, a in arms))
        case Named(n, args, flag):
            return Named(n, tuple(_subst_arg(a, tmap, smap) for a in args), flag)
        case SVar(n, flag):
            if n in smap:
                r = smap[n]
                return dual(r) if flag else r
            return s
    raise TypeError(f"subst_session: not a session {s!r}")


def _subst_arg(a, tmap, smap):
    if isinstance(a, Session):
        return subst_session(a, tmap, smap)
    return subst_vtype(a, tmap, smap)


def subst_vtype(t: VType, tmap: dict, smap: dict) -> VType:
    if not tmap and not smap:
        return t
    match t:
        case TVar(n) | TVarLin(n):
            return tmap.get(n, t)
        case Base() | UnitT():
            return t
        case ProdI(l, r) | ProdL(l, r):
            # re-classify: a linear parameter may be instantiated nonlinearly
            return mk_prod(subst_vtype(l, tmap, smap), subst_vtype(r, tmap, smap))
        case ArrowI(l, r):
            return ArrowI(subst_vtype(l, tmap, smap), subst_vtype(r, tmap, smap))
        case ArrowL(l, r):
            return ArrowL(subst_vtype(l, tmap, smap), subst_vtype(r, tmap, smap))
        case ChPos(s):
            return ChPos(subst_session(s, tmap, smap))
        case ChNeg(s):
            return ChNeg(subst_session(s, tmap, smap))
        case Service(s):
            return Service(subst_session(s, tmap, smap))
    raise TypeError(f"subst_vtype: not a type {t!r}")


def unfold(s: Session, env: SessionEnv) -> Session:
    return env.unfold(s)


def matches(pos: Session, neg: Session, env: SessionEnv) -> bool:
    return env.matches(pos, neg)


def session_names(s) -> set[str]:
    """Names of definitions referenced anywhere inside a session or type."""
    out: set[str] = set()

    def walk(x):
        match x:
            case Named(n, args, _):
                out.add(n)
                for a in args:
                    walk(a)
            case Snd(t, r) | Rcv(t, r):
                walk(t)
                walk(r)
            case Branch(_, arms):
                for _, a in arms:
                    walk(a)
            case ProdI(l, r) | ProdL(l, r) | ArrowI(l, r) | ArrowL(l, r):
                walk(l)
                walk(r)
            case ChPos(s) | ChNeg(s) | Service(s):
                walk(s)

    walk(s)
    return out
