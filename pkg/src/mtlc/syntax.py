"""Abstract syntax of the calculus: expressions, viewtypes and session types.

Every node is an immutable dataclass.  Source locations ride along in a
``loc`` field that is ignored by equality, so trees parsed from different
layouts of the same program compare equal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

Loc = Optional[tuple[int, int]]


# ---------------------------------------------------------------------------
# channel endpoints


@dataclass(frozen=True, order=True)
class Endpoint:
    """One end of a channel.  ``ch_i`` and ``~ch_i`` share ``id``."""

    id: int
    positive: bool

    @property
    def dual(self) -> "Endpoint":
        return Endpoint(self.id, not self.positive)

    def __str__(self) -> str:
        return f"{'+' if self.positive else '-'}{self.id}"


# ---------------------------------------------------------------------------
# session types


class Session:
    __slots__ = ()


@dataclass(frozen=True)
class Nil(Session):
    def __str__(self) -> str:
        return "nil"


@dataclass(frozen=True)
class NilBar(Session):
    def __str__(self) -> str:
        return "nilbar"


@dataclass(frozen=True)
class Snd(Session):
    payload: "VType"
    rest: Session

    def __str__(self) -> str:
        return f"snd({self.payload})::{self.rest}"


@dataclass(frozen=True)
class Rcv(Session):
    payload: "VType"
    rest: Session

    def __str__(self) -> str:
        return f"rcv({self.payload})::{self.rest}"


@dataclass(frozen=True)
class Branch(Session):
    """A tagged choice.  ``direction == "snd"`` means the positive end sends
    the tag (internal choice on the server side); ``"rcv"`` means the
    positive end receives it.  Tags are numbered by position from 0."""

    direction: str
    arms: tuple[tuple[str, Session], ...]

    def arm(self, tag: str) -> Optional[Session]:
        for name, s in self.arms:
            if name == tag:
                return s
        return None

    def tag_index(self, tag: str) -> int:
        return [name for name, _ in self.arms].index(tag)

    def __str__(self) -> str:
        body = " | ".join(f"#{t} => {s}" for t, s in self.arms)
        return f"{self.direction}tag{{{body}}}"


@dataclass(frozen=True)
class Named(Session):
    """Reference to a session definition; ``dual`` marks a deferred dual."""

    name: str
    args: tuple = ()
    dual: bool = False

    def __str__(self) -> str:
        base = self.name
        if self.args:
            base += "(" + ", ".join(str(a) for a in self.args) + ")"
        return f"dual({base})" if self.dual else base


@dataclass(frozen=True)
class SVar(Session):
    """Session variable: sigma in c-type schemas, or a session parameter of a
    definition body."""

    name: str
    dual: bool = False

    def __str__(self) -> str:
        return f"dual({self.name})" if self.dual else self.name


# ---------------------------------------------------------------------------
# viewtypes


class VType:
    __slots__ = ()


@dataclass(frozen=True)
class TVar(VType):
    """Variable ranging over (nonlinear) types."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TVarLin(VType):
    """Variable ranging over viewtypes; also used for type parameters of
    session definitions."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Base(VType):
    name: str  # "int" | "bool"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class UnitT(VType):
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class ProdI(VType):
    left: VType
    right: VType

    def __str__(self) -> str:
        return _show_prod(self)


@dataclass(frozen=True)
class ProdL(VType):
    left: VType
    right: VType

    def __str__(self) -> str:
        return _show_prod(self)


@dataclass(frozen=True)
class ArrowI(VType):
    dom: VType
    cod: VType

    def __str__(self) -> str:
        return f"{_show_arrow_dom(self.dom)} -> {self.cod}"


@dataclass(frozen=True)
class ArrowL(VType):
    dom: VType
    cod: VType

    def __str__(self) -> str:
        return f"{_show_arrow_dom(self.dom)} -<lin> {self.cod}"


@dataclass(frozen=True)
class ChPos(VType):
    session: Session

    def __str__(self) -> str:
        return f"chpos({self.session})"


@dataclass(frozen=True)
class ChNeg(VType):
    session: Session

    def __str__(self) -> str:
        return f"chneg({self.session})"


@dataclass(frozen=True)
class Service(VType):
    session: Session

    def __str__(self) -> str:
        return f"service({self.session})"


INT = Base("int")
BOOL = Base("bool")
UNIT = UnitT()


def _show_prod(t) -> str:
    def side(x, right):
        if isinstance(x, (ArrowI, ArrowL)) or (right and isinstance(x, (ProdI, ProdL))):
            return f"({x})"
        return str(x)

    return f"{side(t.left, False)} * {side(t.right, True)}"


def _show_arrow_dom(t) -> str:
    return f"({t})" if isinstance(t, (ArrowI, ArrowL)) else str(t)


def is_linear(t: VType) -> bool:
    """True for true viewtypes, i.e. values that must be consumed exactly once."""
    return isinstance(t, (ProdL, ArrowL, ChPos, ChNeg, TVarLin))


def mk_prod(left: VType, right: VType) -> VType:
    """Pair type: ``*`` when both sides are types, otherwise the linear tuple."""
    if is_linear(left) or is_linear(right):
        return ProdL(left, right)
    return ProdI(left, right)


# ---------------------------------------------------------------------------
# expressions


class Expr:
    __slots__ = ()

    @cached_property
    def fv(self) -> frozenset[str]:
        return _free_vars(self)

    @cached_property
    def res(self) -> tuple[Endpoint, ...]:
        return tuple(sorted(_resources(self)))

    @cached_property
    def is_val(self) -> bool:
        return _is_value(self)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FixVar(Expr):
    name: str
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Chan(Expr):
    """Channel resource constant (``ch_i`` or ``~ch_i``)."""

    ep: Endpoint
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Lit(Expr):
    """Nullary constructor constant: an integer or boolean literal."""

    value: Union[int, bool]
    loc: Loc = field(default=None, compare=False, repr=False)

    # True == 1 in Python; literals of different base types must differ.
    def __eq__(self, other):
        return (
            isinstance(other, Lit)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class ConstApp(Expr):
    name: str
    args: tuple[Expr, ...]
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unit(Expr):
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Pair(Expr):
    first: Expr
    second: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Fst(Expr):
    arg: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Snd_(Expr):
    arg: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LetPair(Expr):
    x1: str
    x2: str
    bound: Expr
    body: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam(Expr):
    """``lam`` (``linear=False``) or ``llam`` (``linear=True``).

    ``annot`` may be omitted only where the argument type is known, which
    is the case for the lambda introduced by ``let val x = e in ... end``.
    """

    param: str
    annot: Optional[VType]
    body: Expr
    linear: bool = False
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Fix(Expr):
    name: str
    annot: Optional[VType]
    body: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Select(Expr):
    """Send a branch tag on a channel."""

    tag: str
    chan: Expr
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Offer(Expr):
    """Receive a branch tag on ``chan`` and continue with the matching arm,
    rebinding the channel to ``var``."""

    chan: Expr
    var: str
    arms: tuple[tuple[str, Expr], ...]
    loc: Loc = field(default=None, compare=False, repr=False)

    def arm(self, tag: str) -> Optional[Expr]:
        for name, e in self.arms:
            if name == tag:
                return e
        return None


# Constants that build values rather than compute (the ``cc`` of the grammar).
CONSTRUCTORS = frozenset({"service_create"})


def children(e: Expr) -> tuple[Expr, ...]:
    match e:
        case ConstApp(_, args):
            return args
        case Pair(a, b) | App(a, b):
            return (a, b)
        case Fst(a) | Snd_(a) | Select(_, a):
            return (a,)
        case LetPair(_, _, a, b):
            return (a, b)
        case If(a, b, c):
            return (a, b, c)
        case Lam(_, _, b, _) | Fix(_, _, b):
            return (b,)
        case Offer(c, _, arms):
            return (c,) + tuple(a for _, a in arms)
    return ()


def _free_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(x) | FixVar(x):
            return frozenset((x,))
        case LetPair(x1, x2, a, b):
            return a.fv | (b.fv - {x1, x2})
        case Lam(x, _, b, _) | Fix(x, _, b):
            return b.fv - {x}
        case Offer(c, x, arms):
            out = c.fv
            for _, a in arms:
                out = out | (a.fv - {x})
            return out
    out = frozenset()
    for c in children(e):
        out = out | c.fv
    return out


def _resources(e: Expr) -> list[Endpoint]:
    match e:
        case Chan(ep):
            return [ep]
        case If(c, a, _):
            return list(c.res) + list(a.res)
        case Offer(c, _, arms):
            return list(c.res) + (list(arms[0][1].res) if arms else [])
    out: list[Endpoint] = []
    for c in children(e):
        out.extend(c.res)
    return out


def resources_of(e: Expr) -> Counter:
    """The multiset of channel constants in ``e``."""
    return Counter(e.res)


def channels_of(e: Expr) -> frozenset[Endpoint]:
    return frozenset(e.res)


def is_value(e: Expr) -> bool:
    """Membership in the value grammar; fix-variables are not values."""
    return e.is_val


def _is_value(e: Expr) -> bool:
    match e:
        case Var() | Chan() | Lit() | Unit() | Lam():
            return True
        case Pair(a, b):
            return a.is_val and b.is_val
        case ConstApp(name, args):
            return name in CONSTRUCTORS and all(a.is_val for a in args)
    return False


# ---------------------------------------------------------------------------
# substitution

_fresh_counter = 0


def _fresh(x: str, avoid: frozenset[str]) -> str:
    global _fresh_counter
    while True:
        _fresh_counter += 1
        cand = f"{x.split(chr(39))[0]}'{_fresh_counter}"
        if cand not in avoid:
            return cand


def subst(e: Expr, theta: dict[str, Expr]) -> Expr:
    """Capture-avoiding simultaneous substitution of ``theta`` into ``e``.

    Subterms without free occurrences of the substituted names are shared,
    not copied.
    """
    if not theta or e.fv.isdisjoint(theta):
        return e
    if all(not v.fv for v in theta.values()):
        return _subst_closed(e, theta)
    match e:
        case Var(x) | FixVar(x):
            return theta[x]
        case ConstApp(name, args, loc):
            return ConstApp(name, tuple(subst(a, theta) for a in args), loc)
        case Pair(a, b, loc):
            return Pair(subst(a, theta), subst(b, theta), loc)
        case Fst(a, loc):
            return Fst(subst(a, theta), loc)
        case Snd_(a, loc):
            return Snd_(subst(a, theta), loc)
        case App(a, b, loc):
            return App(subst(a, theta), subst(b, theta), loc)
        case If(a, b, c, loc):
            return If(subst(a, theta), subst(b, theta), subst(c, theta), loc)
        case Select(tag, a, loc):
            return Select(tag, subst(a, theta), loc)
        case LetPair(x1, x2, a, b, loc):
            (x1, x2), (b2,) = _under_binders((x1, x2), (b,), theta, Var)
            return LetPair(x1, x2, subst(a, theta), b2, loc)
        case Lam(x, annot, b, lin, loc):
            (x,), (b2,) = _under_binders((x,), (b,), theta, Var)
            return Lam(x, annot, b2, lin, loc)
        case Fix(f, annot, b, loc):
            (f,), (b2,) = _under_binders((f,), (b,), theta, FixVar)
            return Fix(f, annot, b2, loc)
        case Offer(c, x, arms, loc):
            (x,), bodies = _under_binders((x,), tuple(a for _, a in arms), theta, Var)
            new_arms = tuple((tag, b) for (tag, _), b in zip(arms, bodies))
            return Offer(subst(c, theta), x, new_arms, loc)
    raise TypeError(f"subst: unexpected node {e!r}")


def _subst_closed(e: Expr, theta: dict[str, Expr]) -> Expr:
    """``subst`` for closed replacements, where no binder can capture."""
    if e.fv.isdisjoint(theta):
        return e
    match e:
        case Var(x) | FixVar(x):
            return theta[x]
        case ConstApp(name, args, loc):
            return ConstApp(name, tuple(_subst_closed(a, theta) for a in args), loc)
        case Pair(a, b, loc):
            return Pair(_subst_closed(a, theta), _subst_closed(b, theta), loc)
        case Fst(a, loc):
            return Fst(_subst_closed(a, theta), loc)
        case Snd_(a, loc):
            return Snd_(_subst_closed(a, theta), loc)
        case App(a, b, loc):
            return App(_subst_closed(a, theta), _subst_closed(b, theta), loc)
        case If(a, b, c, loc):
            return If(_subst_closed(a, theta), _subst_closed(b, theta),
                      _subst_closed(c, theta), loc)
        case Select(tag, a, loc):
            return Select(tag, _subst_closed(a, theta), loc)
        case LetPair(x1, x2, a, b, loc):
            return LetPair(x1, x2, _subst_closed(a, theta),
                           _subst_closed(b, _without(theta, (x1, x2))), loc)
        case Lam(x, annot, b, lin, loc):
            return Lam(x, annot, _subst_closed(b, _without(theta, (x,))), lin, loc)
        case Fix(f, annot, b, loc):
            return Fix(f, annot, _subst_closed(b, _without(theta, (f,))), loc)
        case Offer(c, x, arms, loc):
            inner = _without(theta, (x,))
            return Offer(_subst_closed(c, theta), x,
                         tuple((tag, _subst_closed(b, inner)) for tag, b in arms), loc)
    raise TypeError(f"subst: unexpected node {e!r}")


def _without(theta: dict, names) -> dict:
    if any(n in theta for n in names):
        return {k: v for k, v in theta.items() if k not in names}
    return theta


def _under_binders(names, bodies, theta, var_kind):
    inner = {k: v for k, v in theta.items() if k not in names}
    used = frozenset().union(*(b.fv for b in bodies))
    if not inner or used.isdisjoint(inner):
        return tuple(names), bodies
    captured = frozenset().union(*(inner[k].fv for k in used & inner.keys()))
    new_names = []
    ren: dict[str, Expr] = {}
    for n in names:
        target = _fresh(n, captured | used) if n in captured else n
        if target != n:
            ren[n] = var_kind(target)
        new_names.append(target)
    theta2 = {**inner, **ren}
    return tuple(new_names), tuple(subst(b, theta2) for b in bodies)
