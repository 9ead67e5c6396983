"""Surface language: tokenizer, recursive-descent parser, printer, elaboration.

A program is a list of session definitions followed by function
definitions, one of which is ``main``.  ``pretty`` prints a program back in
a form that ``parse`` maps to an identical tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .session import SessDef, SessionEnv, SessionError, dual, session_names
from .syntax import (
    BOOL, INT, UNIT, App, ArrowI, ArrowL, Branch, Chan, ChNeg, ChPos, ConstApp,
    Endpoint, Expr, Fix, FixVar, Fst, If, Lam, LetPair, Lit, Named, Nil,
    NilBar, Offer, Pair, ProdI, ProdL, Rcv, Select, Service, Session, Snd,
    Snd_, SVar, TVarLin, Unit, UnitT, Var, VType, mk_prod, subst,
)

# channel and thread primitives, written ``name(args)``
PRIMITIVES = frozenset({
    "chanpos_send", "chanpos_recv", "channeg_send", "channeg_recv",
    "chanpos_close", "channeg_close", "chneg_create", "chneg_create2",
    "chposneg_link", "thread_create", "service_create", "service_request",
    "randbit",
})

BINOPS = {
    "||": 1, "&&": 2,
    "=": 3, "<>": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "mod": 5,
}

KEYWORDS = frozenset({
    "let", "val", "in", "end", "if", "then", "else", "lam", "llam", "fix",
    "fun", "sesstype", "fst", "snd", "rcv", "select", "offer", "as", "of",
    "true", "false", "not", "mod", "nil", "nilbar", "sndtag", "rcvtag",
    "chpos", "chneg", "service", "int", "bool", "unit", "dual", "sess",
})


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int, code: str = "syntax"):
        super().__init__(msg)
        self.msg, self.line, self.col, self.code = msg, line, col, code


# ---------------------------------------------------------------------------
# tokens


@dataclass(frozen=True)
class Tok:
    kind: str  # int | ident | kw | chan | tag | sym | eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|//[^\n]*)
  | (?P<nl>\n)
  | (?P<chan>@[+-][0-9]+)
  | (?P<tag>\#[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>-<lin>|->|=>|::|<=|>=|<>|&&|\|\||[-+*/<>=(),:;{}|])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, s, line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple[tuple[str, VType], ...]
    ret: Optional[VType]
    body: Expr
    loc: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Program:
    sessdefs: tuple[SessDef, ...]
    funs: tuple[FunDef, ...]

    @property
    def env(self) -> SessionEnv:
        return SessionEnv(self.sessdefs)

    def fun(self, name: str) -> Optional[FunDef]:
        for f in self.funs:
            if f.name == name:
                return f
        return None

    @property
    def main(self) -> Expr:
        f = self.fun("main")
        if f is None:
            raise ParseError("program has no main function", 1, 1, "unbound")
        return f.body


# ---------------------------------------------------------------------------
# parser


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.sess_kinds: dict[str, tuple[bool, ...]] = self._scan_headers()
        self.tparams: tuple[str, ...] = ()
        self.sparams: tuple[str, ...] = ()
        self.scope: list[tuple[str, bool]] = []  # (name, is_fix)

    # -- token helpers ----------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.text == text

    def advance(self) -> Tok:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def expect_kind(self, kind: str) -> Tok:
        if self.tok.kind != kind:
            self.fail(f"expected {kind}")
        return self.advance()

    def fail(self, msg: str, code: str = "syntax", tok: Tok | None = None):
        t = tok or self.tok
        if t.kind != "eof":
            msg = f"{msg}, found {t.text!r}"
        elif "end of input" not in msg:
            msg = f"{msg} at end of input"
        raise ParseError(msg, t.line, t.col, code)

    def loc(self) -> tuple[int, int]:
        return (self.tok.line, self.tok.col)

    def _scan_headers(self) -> dict[str, tuple[bool, ...]]:
        kinds = {}
        toks = self.toks
        for j, t in enumerate(toks):
            if t.kind == "kw" and t.text == "sesstype" and toks[j + 1].kind == "ident":
                params: list[bool] = []
                k = j + 2
                if toks[k].text == "(":
                    k += 1
                    while toks[k].kind != "eof" and toks[k].text != ")":
                        if toks[k].text == "sess":
                            params.append(True)
                            k += 1
                        elif toks[k].kind == "ident":
                            params.append(False)
                        k += 1
                kinds[toks[j + 1].text] = tuple(params)
        return kinds

    # -- program ----------------------------------------------------------

    def program(self) -> Program:
        sessdefs, funs = [], []
        seen_sess, seen_fun = set(), set()
        while self.tok.kind != "eof":
            if self.at("sesstype"):
                d = self.sessdef()
                if d.name in seen_sess:
                    raise ParseError(f"session {d.name} defined twice", *d.loc, "dup-def")
                seen_sess.add(d.name)
                sessdefs.append(d)
            elif self.at("fun"):
                f = self.fundef()
                if f.name in seen_fun:
                    raise ParseError(f"function {f.name} defined twice", *f.loc, "dup-def")
                seen_fun.add(f.name)
                funs.append(f)
            else:
                self.fail("expected 'sesstype' or 'fun'")
        prog = Program(tuple(sessdefs), tuple(funs))
        try:
            prog.env.check_contractive()
        except SessionError as err:
            raise ParseError(str(err), 1, 1, "session-nc") from None
        return prog

    def sessdef(self) -> SessDef:
        loc = self.loc()
        self.expect("sesstype")
        name = self.expect_kind("ident").text
        tps, sps = [], []
        if self.at("("):
            self.advance()
            while not self.at(")"):
                if self.at("sess"):
                    self.advance()
                    sps.append(self.expect_kind("ident").text)
                else:
                    tps.append(self.expect_kind("ident").text)
                if not self.at(")"):
                    self.expect(",")
            self.advance()
        if tps and sps and self.sess_kinds[name] != tuple([False] * len(tps) + [True] * len(sps)):
            self.fail("type parameters must precede session parameters")
        self.expect("=")
        self.tparams, self.sparams = tuple(tps), tuple(sps)
        body = self.sess()
        self.tparams, self.sparams = (), ()
        return SessDef(name, tuple(tps), tuple(sps), body, loc)

    def fundef(self) -> FunDef:
        loc = self.loc()
        self.expect("fun")
        name = self.expect_kind("ident").text
        self.expect("(")
        params = []
        while not self.at(")"):
            p = self.expect_kind("ident").text
            self.expect(":")
            params.append((p, self.vtype()))
            if not self.at(")"):
                self.expect(",")
        self.advance()
        ret = None
        if self.at(":"):
            self.advance()
            ret = self.vtype()
        self.expect("=")
        self.scope = [(p, False) for p, _ in params]
        body = self.expr()
        self.scope = []
        return FunDef(name, tuple(params), ret, body, loc)

    # -- sessions and types -----------------------------------------------

    def sess(self) -> Session:
        t = self.tok
        match t.text if t.kind in ("kw", "sym") else None:
            case "nil":
                self.advance()
                return Nil()
            case "nilbar":
                self.advance()
                return NilBar()
            case "snd" | "rcv":
                self.advance()
                self.expect("(")
                payload = self.vtype()
                self.expect(")")
                self.expect("::")
                rest = self.sess()
                return Snd(payload, rest) if t.text == "snd" else Rcv(payload, rest)
            case "sndtag" | "rcvtag":
                self.advance()
                self.expect("{")
                arms = []
                while True:
                    tag = self.expect_kind("tag").text[1:]
                    if any(tag == k for k, _ in arms):
                        self.fail(f"duplicate tag #{tag}")
                    self.expect("=>")
                    arms.append((tag, self.sess()))
                    if self.at("}"):
                        break
                    self.expect("|")
                self.advance()
                return Branch(t.text[:3], tuple(arms))
            case "dual":
                self.advance()
                self.expect("(")
                s = self.sess()
                self.expect(")")
                return dual(s)
            case "(":
                self.advance()
                s = self.sess()
                self.expect(")")
                return s
        if t.kind != "ident":
            self.fail("expected a session type")
        self.advance()
        if t.text in self.sparams:
            return SVar(t.text)
        kinds = self.sess_kinds.get(t.text)
        if kinds is None:
            self.fail(f"undefined session {t.text}", "session-undef", tok=t)
        args = []
        if kinds:
            self.expect("(")
            for j, is_sess in enumerate(kinds):
                if j:
                    self.expect(",")
                args.append(self.sess() if is_sess else self.vtype())
            self.expect(")")
        return Named(t.text, tuple(args))

    def vtype(self) -> VType:
        left = self.vtype_prod()
        if self.at("->") or self.at("-<lin>"):
            lin = self.advance().text == "-<lin>"
            right = self.vtype()
            return ArrowL(left, right) if lin else ArrowI(left, right)
        return left

    def vtype_prod(self) -> VType:
        t = self.vtype_atom()
        while self.at("*"):
            self.advance()
            t = mk_prod(t, self.vtype_atom())
        return t

    def vtype_atom(self) -> VType:
        t = self.tok
        if t.kind == "kw":
            match t.text:
                case "int":
                    self.advance()
                    return INT
                case "bool":
                    self.advance()
                    return BOOL
                case "unit":
                    self.advance()
                    return UNIT
                case "chpos" | "chneg" | "service":
                    self.advance()
                    self.expect("(")
                    s = self.sess()
                    self.expect(")")
                    return {"chpos": ChPos, "chneg": ChNeg, "service": Service}[t.text](s)
        if self.at("("):
            self.advance()
            ty = self.vtype()
            self.expect(")")
            return ty
        if t.kind == "ident" and t.text in self.tparams:
            self.advance()
            return TVarLin(t.text)
        self.fail("expected a type")

    # -- expressions ------------------------------------------------------

    def bind(self, name: str, is_fix: bool = False):
        self.scope.append((name, is_fix))

    def unbind(self, n: int = 1):
        del self.scope[-n:]

    def resolve(self, name: str, loc) -> Expr:
        for n, is_fix in reversed(self.scope):
            if n == name:
                return FixVar(name, loc) if is_fix else Var(name, loc)
        return Var(name, loc)

    def seq(self) -> Expr:
        """``e1; e2`` is ``let val () = e1 in e2 end``."""
        loc = self.loc()
        first = self.expr()
        if self.at(";"):
            self.advance()
            self.bind("_")
            rest = self.seq()
            self.unbind()
            return App(Lam("_", UNIT, rest, True, loc), first, loc)
        return first

    def expr(self) -> Expr:
        loc = self.loc()
        if self.at("lam") or self.at("llam"):
            lin = self.advance().text == "llam"
            self.expect("(")
            if self.at(")"):
                x, annot = "_", UNIT
            else:
                x = self.expect_kind("ident").text
                self.expect(":")
                annot = self.vtype()
            self.expect(")")
            self.expect("=>")
            self.bind(x)
            body = self.expr()
            self.unbind()
            return Lam(x, annot, body, lin, loc)
        if self.at("fix"):
            self.advance()
            f = self.expect_kind("ident").text
            self.expect(":")
            annot = self.vtype()
            self.expect("=>")
            self.bind(f, is_fix=True)
            body = self.expr()
            self.unbind()
            return Fix(f, annot, body, loc)
        if self.at("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return If(c, a, b, loc)
        return self.binary(1)

    def binary(self, level: int) -> Expr:
        if level > 5:
            return self.unary()
        loc = self.loc()
        left = self.binary(level + 1)
        while self.tok.kind in ("sym", "kw") and BINOPS.get(self.tok.text) == level:
            op = self.advance().text
            right = self.binary(level + 1)
            left = ConstApp(op, (left, right), loc)
            if level == 3:  # comparisons do not chain
                break
        return left

    def unary(self) -> Expr:
        loc = self.loc()
        if self.at("not"):
            self.advance()
            return ConstApp("not", (self.unary(),), loc)
        if self.at("-"):
            self.advance()
            if self.tok.kind == "int":
                return Lit(-int(self.advance().text), loc)
            return ConstApp("-", (Lit(0, loc), self.unary()), loc)
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("("):
            loc = self.loc()
            args = self.call_args()
            e = App(e, _tuple(args, loc), loc)
        return e

    def call_args(self) -> list[Expr]:
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.expr())
            if not self.at(")"):
                self.expect(",")
        self.advance()
        return args

    def primary(self) -> Expr:
        t = self.tok
        loc = (t.line, t.col)
        match t.kind:
            case "int":
                self.advance()
                return Lit(int(t.text), loc)
            case "chan":
                self.advance()
                return Chan(Endpoint(int(t.text[2:]), t.text[1] == "+"), loc)
            case "ident":
                self.advance()
                if t.text in PRIMITIVES:
                    if not self.at("("):
                        self.fail(f"primitive {t.text} must be applied")
                    return ConstApp(t.text, tuple(self.call_args()), loc)
                return self.resolve(t.text, loc)
        if t.kind == "eof":
            self.fail("unexpected end of input")
        match t.text:
            case "true" | "false":
                self.advance()
                return Lit(t.text == "true", loc)
            case "(":
                self.advance()
                if self.at(")"):
                    self.advance()
                    return Unit(loc)
                items = [self.seq()]
                while self.at(","):
                    self.advance()
                    items.append(self.expr())
                self.expect(")")
                return _tuple(items, loc)
            case "fst" | "snd":
                self.advance()
                self.expect("(")
                a = self.expr()
                self.expect(")")
                return Fst(a, loc) if t.text == "fst" else Snd_(a, loc)
            case "select":
                self.advance()
                self.expect("(")
                c = self.expr()
                self.expect(",")
                tag = self.expect_kind("tag").text[1:]
                self.expect(")")
                return Select(tag, c, loc)
            case "offer":
                self.advance()
                c = self.expr()
                self.expect("as")
                x = self.expect_kind("ident").text
                self.expect("of")
                arms = []
                self.bind(x)
                while True:
                    tag = self.expect_kind("tag").text[1:]
                    self.expect("=>")
                    arms.append((tag, self.seq()))
                    if not self.at("|"):
                        break
                    self.advance()
                self.unbind()
                self.expect("end")
                return Offer(c, x, tuple(arms), loc)
            case "let":
                return self.let()
        self.fail("expected an expression")

    def let(self) -> Expr:
        self.expect("let")
        decls = []
        while self.at("val"):
            loc = self.loc()
            self.advance()
            if self.at("("):
                self.advance()
                if self.at(")"):
                    self.advance()
                    pat = ()
                else:
                    a = self.expect_kind("ident").text
                    self.expect(",")
                    b = self.expect_kind("ident").text
                    self.expect(")")
                    pat = (a, b)
            else:
                pat = self.expect_kind("ident").text
            self.expect("=")
            bound = self.expr()
            decls.append((pat, bound, loc))
            match pat:
                case ():
                    self.bind("_")
                case (a, b):
                    self.bind(a)
                    self.bind(b)
                case x:
                    self.bind(x)
        if not decls:
            self.fail("expected 'val'")
        self.expect("in")
        body = self.seq()
        self.expect("end")
        for pat, bound, loc in reversed(decls):
            match pat:
                case ():
                    self.unbind()
                    body = App(Lam("_", UNIT, body, True, loc), bound, loc)
                case (a, b):
                    self.unbind(2)
                    body = LetPair(a, b, bound, body, loc)
                case x:
                    self.unbind()
                    body = App(Lam(x, None, body, True, loc), bound, loc)
        return body


def _tuple(items: list[Expr], loc) -> Expr:
    if not items:
        return Unit(loc)
    out = items[-1]
    for it in reversed(items[:-1]):
        out = Pair(it, out, loc)
    return out


def _parse_with(text: str, rule: str):
    p = Parser(text)
    out = getattr(p, rule)()
    if p.tok.kind != "eof":
        p.fail("trailing input")
    return out


def parse(text: str) -> Program:
    """Parse a whole program."""
    return _parse_with(text, "program")


def parse_expr(text: str) -> Expr:
    return _parse_with(text, "seq")


def parse_vtype(text: str, sessdefs_src: str = "") -> VType:
    p = Parser(sessdefs_src + "\n" + text)
    # skip the definitions, then read one type
    while p.at("sesstype"):
        p.sessdef()
    out = p.vtype()
    if p.tok.kind != "eof":
        p.fail("trailing input")
    return out


def parse_session(text: str, sessdefs_src: str = "") -> Session:
    p = Parser(sessdefs_src + "\n" + text)
    while p.at("sesstype"):
        p.sessdef()
    out = p.sess()
    if p.tok.kind != "eof":
        p.fail("trailing input")
    return out


# ---------------------------------------------------------------------------
# printer


def pretty(prog: Program) -> str:
    parts = [pretty_sessdef(d) for d in prog.sessdefs]
    parts += [pretty_fundef(f) for f in prog.funs]
    return "\n\n".join(parts) + "\n"


def pretty_sessdef(d: SessDef) -> str:
    params = list(d.tparams) + [f"sess {s}" for s in d.sparams]
    head = f"sesstype {d.name}" + (f"({', '.join(params)})" if params else "")
    return f"{head} = {d.body}"


def pretty_fundef(f: FunDef) -> str:
    params = ", ".join(f"{x}: {t}" for x, t in f.params)
    ret = f": {f.ret}" if f.ret is not None else ""
    return f"fun {f.name}({params}){ret} =\n  {show(f.body, 1)}"


_INFIX = set(BINOPS)


def show(e: Expr, indent: int = 0) -> str:
    """Render an expression in surface syntax."""
    pad = "\n" + "  " * (indent + 1)
    match e:
        case Var(x) | FixVar(x):
            return x
        case Chan(ep):
            return f"@{ep}"
        case Lit(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            return f"({v})" if v < 0 else str(v)
        case Unit():
            return "()"
        case Pair(_, _):
            return "(" + ", ".join(show(x, indent) for x in _flatten(e)) + ")"
        case Fst(a):
            return f"fst({show(a, indent)})"
        case Snd_(a):
            return f"snd({show(a, indent)})"
        case ConstApp(op, (a, b)) if op in _INFIX:
            return f"({_atom(a, indent)} {op} {_atom(b, indent)})"
        case ConstApp("not", (a,)):
            return f"not({show(a, indent)})"
        case ConstApp(name, args):
            return f"{name}({', '.join(show(a, indent) for a in args)})"
        case App(Lam(x, annot, body, True), arg) if annot is None or (x == "_" and annot == UNIT):
            return _show_let(e, indent)
        case App(fn, arg):
            inner = "" if isinstance(arg, Unit) else ", ".join(show(x, indent) for x in _flatten(arg))
            return f"{_atom(fn, indent)}({inner})"
        case LetPair():
            return _show_let(e, indent)
        case If(c, a, b):
            return f"if {show(c, indent)} then {show(a, indent)} else {show(b, indent)}"
        case Lam("_", UnitT(), body, lin):
            return f"{'llam' if lin else 'lam'} () => {show(body, indent)}"
        case Lam(x, annot, body, lin):
            return f"{'llam' if lin else 'lam'} ({x}: {annot}) => {show(body, indent)}"
        case Fix(f, annot, body):
            return f"fix {f}: {annot} => {show(body, indent)}"
        case Select(tag, c):
            return f"select({show(c, indent)}, #{tag})"
        case Offer(c, x, arms):
            body = (pad + "| ").join(f"#{t} => {show(a, indent + 1)}" for t, a in arms)
            return f"offer {show(c, indent)} as {x} of{pad}{body}{pad[:-2]}end"
    raise TypeError(f"show: unexpected node {e!r}")


def _show_let(e: Expr, indent: int) -> str:
    decls = []
    while True:
        match e:
            case App(Lam("_", UnitT(), body, True), arg):
                decls.append(f"val () = {show(arg, indent + 1)}")
            case App(Lam(x, None, body, True), arg):
                decls.append(f"val {x} = {show(arg, indent + 1)}")
            case LetPair(a, b, bound, body):
                decls.append(f"val ({a}, {b}) = {show(bound, indent + 1)}")
            case _:
                break
        e = body
    pad = "\n" + "  " * (indent + 1)
    inner = pad.join(decls)
    return f"let{pad}{inner}{pad[:-2]}in{pad}{show(e, indent + 1)}{pad[:-2]}end"


def _atom(e: Expr, indent: int) -> str:
    """Render ``e`` so that it can stand as an operand or callee."""
    s = show(e, indent)
    match e:
        case Var() | FixVar() | Chan() | Lit() | Unit() | Pair() | Fst() | Snd_() | Select():
            return s
        case ConstApp():
            return s
        case App() if not s.startswith("let"):
            return s
    return f"({s})"


def _flatten(e: Expr) -> list[Expr]:
    out = []
    while isinstance(e, Pair):
        out.append(e.first)
        e = e.second
    out.append(e)
    return out


# ---------------------------------------------------------------------------
# elaboration


class ElabError(Exception):
    def __init__(self, msg: str, loc, code: str):
        super().__init__(msg)
        self.msg, self.loc, self.code = msg, loc, code


ARGS = "%args"


def fun_lambda(f: FunDef) -> Lam:
    """A function as a single-argument intuitionistic lambda.

    Several parameters are packed into a right-nested pair; no parameters
    means a ``unit`` argument.
    """
    match f.params:
        case ():
            return Lam("_", UNIT, f.body, False, f.loc)
        case ((x, t),):
            return Lam(x, t, f.body, False, f.loc)
    names = [x for x, _ in f.params]
    types = [t for _, t in f.params]
    dom = types[-1]
    for t in reversed(types[:-1]):
        dom = mk_prod(t, dom)
    body = f.body
    rest = [f"{ARGS}{k}" for k in range(len(names) - 1)]
    # innermost pattern first: (x_{n-2}, x_{n-1}) = rest_{n-2}
    for k in range(len(names) - 2, -1, -1):
        second = names[k + 1] if k == len(names) - 2 else rest[k + 1]
        body = LetPair(names[k], second, Var(rest[k], f.loc), body, f.loc)
    return Lam(rest[0], dom, body, False, f.loc)


def fun_type(f: FunDef) -> Optional[VType]:
    if f.ret is None:
        return None
    return ArrowI(fun_lambda(f).annot, f.ret)


def call_graph(prog: Program) -> nx.DiGraph:
    names = {f.name for f in prog.funs}
    g = nx.DiGraph()
    for f in prog.funs:
        g.add_node(f.name)
        for callee in fun_lambda(f).fv & names:
            g.add_edge(f.name, callee)
    return g


def fun_sccs(prog: Program) -> list[list[str]]:
    """Strongly connected components, callees before callers."""
    g = call_graph(prog)
    cond = nx.condensation(g)
    order = list(reversed(list(nx.topological_sort(cond))))
    return [sorted(cond.nodes[c]["members"], key=_fun_order(prog)) for c in order]


def _fun_order(prog: Program):
    index = {f.name: k for k, f in enumerate(prog.funs)}
    return lambda n: index[n]


def is_recursive(prog: Program, scc: list[str]) -> bool:
    if len(scc) > 1:
        return True
    f = scc[0]
    return f in fun_lambda(prog.fun(f)).fv


def elaborate(prog: Program) -> dict[str, Expr]:
    """Closed terms for every function, with ``main`` as its body.

    A recursive function becomes ``fix``; a group of mutually recursive
    functions becomes one ``fix`` over a tuple of lambdas.
    """
    done: dict[str, Expr] = {}
    for scc in fun_sccs(prog):
        if "main" in scc and (len(scc) > 1 or is_recursive(prog, scc)):
            raise ElabError("main may not be recursive", prog.fun("main").loc, "main")
        if scc == ["main"]:
            main = prog.fun("main")
            if main.params:
                raise ElabError("main takes no parameters", main.loc, "main")
            done["main"] = subst(main.body, dict(done))
            continue
        lams = {n: fun_lambda(prog.fun(n)) for n in scc}
        if not is_recursive(prog, scc):
            (n,) = scc
            done[n] = subst(lams[n], dict(done))
            continue
        for n in scc:
            if prog.fun(n).ret is None:
                raise ElabError(f"recursive function {n} needs a return type",
                                prog.fun(n).loc, "annot")
        types = {n: fun_type(prog.fun(n)) for n in scc}
        if len(scc) == 1:
            (n,) = scc
            body = subst(lams[n], {**done, n: FixVar(n)})
            done[n] = Fix(n, types[n], body, prog.fun(n).loc)
            continue
        g = "%" + "+".join(scc)
        projs = _projections(FixVar(g), len(scc))
        theta = {**done, **dict(zip(scc, projs))}
        bodies = [subst(lams[n], theta) for n in scc]
        ty = types[scc[-1]]
        tup = bodies[-1]
        for n, b in zip(reversed(scc[:-1]), reversed(bodies[:-1])):
            ty = ProdI(types[n], ty)
            tup = Pair(b, tup)
        fix = Fix(g, ty, tup, prog.fun(scc[0]).loc)
        for n, p in zip(scc, _projections(fix, len(scc))):
            done[n] = p
    if "main" not in done:
        raise ElabError("program has no main function", (1, 1), "main")
    return done


def _projections(e: Expr, n: int) -> list[Expr]:
    out = []
    cur = e
    for k in range(n - 1):
        out.append(Fst(cur))
        cur = Snd_(cur)
    out.append(cur)
    return out


def referenced_sessions(prog: Program) -> set[str]:
    names: set[str] = set()
    for d in prog.sessdefs:
        names |= session_names(d.body)
    return names
