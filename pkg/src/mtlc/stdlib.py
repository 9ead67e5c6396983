"""Connective encodings, tag tables, the corpus and program generators.

Corpus programs ship as ``.mtl`` files inside the package.  ``sieve.mtl``
and ``queue.mtl`` end in an entry point that the generators below replace,
so a run can ask for any number of primes or any queue script.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .session import SessionEnv, SessionError
from .syntax import Branch, ChNeg, Expr, Lit, Named, Pair, Rcv, Session, Snd, SVar, TVarLin

# ---------------------------------------------------------------------------
# connectives as sessions


def times(a: Session, b: Session) -> Session:
    """Hand out a channel of ``a``, then continue as ``b``."""
    return Snd(ChNeg(a), b)


def limplies(a: Session, b: Session) -> Session:
    """Take in a channel of ``a``, then continue as ``b``."""
    return Rcv(ChNeg(a), b)


def adisj(a: Session, b: Session) -> Session:
    """Internal choice: the positive end picks ``#l`` or ``#r``."""
    return Branch("snd", (("l", a), ("r", b)))


def aconj(a: Session, b: Session) -> Session:
    """External choice: the negative end picks ``#l`` or ``#r``."""
    return Branch("rcv", (("l", a), ("r", b)))


@dataclass(frozen=True)
class TagTable:
    """Tags of a branching definition, numbered from 0 in declaration order."""
    name: str
    direction: str
    tags: tuple[tuple[str, int, Session], ...]

    def index(self, tag: str) -> int:
        for t, i, _ in self.tags:
            if t == tag:
                return i
        raise KeyError(tag)

    def continuation(self, tag: str) -> Session:
        for t, _, s in self.tags:
            if t == tag:
                return s
        raise KeyError(tag)


def tag_table(env: SessionEnv, name: str, args: tuple = ()) -> TagTable:
    """Tag table of the definition ``name`` instantiated at ``args``."""
    d = env.defs.get(name)
    if d is None:
        raise SessionError(f"undefined session {name}")
    if not args:
        args = tuple(TVarLin(p) for p in d.tparams) + tuple(SVar(p) for p in d.sparams)
    body = env.whnf(Named(name, tuple(args)))
    if not isinstance(body, Branch):
        raise SessionError(f"session {name} does not start with a branch")
    return TagTable(name, body.direction, tuple((t, i, s) for i, (t, s) in enumerate(body.arms)))


# ---------------------------------------------------------------------------
# corpus

ENTRY_MARKER = "// -- entry point"


def corpus_root():
    return resources.files("mtlc") / "corpus"


def corpus_names() -> list[str]:
    """Well-typed corpus programs, by stem."""
    return sorted(p.name[:-4] for p in corpus_root().iterdir() if p.name.endswith(".mtl"))


def reject_names() -> list[str]:
    return sorted(reject_manifest())


def reject_manifest() -> dict[str, str]:
    """Mutant stem to the diagnostic code it must be rejected with."""
    text = (corpus_root() / "reject" / "manifest.json").read_text()
    return {k[:-4] if k.endswith(".mtl") else k: v for k, v in json.loads(text).items()}


# programs whose run reaches a final value under every schedule
RUNNABLE = (
    "adisj", "aconj", "arith", "bang", "limplies", "link_demo", "pingpong",
    "queue", "randbit", "service_echo", "sieve", "threads", "times",
)

# programs that need the two-channel creation primitive
NEEDS_CREATE2 = ("create2_deadlock",)


def resolve(name: str) -> tuple[str, str]:
    """Source text and display path for a file path or a corpus name.

    ``sieve``, ``corpus/sieve``, ``corpus/sieve.mtl`` and
    ``corpus/reject/dup_channel`` all name packaged programs; a path to an
    existing file wins over a corpus name.
    """
    p = Path(name)
    if p.is_file():
        return p.read_text(), str(p)
    stem = name[len("corpus/"):] if name.startswith("corpus/") else name
    if stem.endswith(".mtl"):
        stem = stem[:-4]
    node = corpus_root().joinpath(*stem.split("/"))
    f = node.parent / (node.name + ".mtl")
    if f.is_file():
        return f.read_text(), f"corpus/{stem}.mtl"
    raise FileNotFoundError(f"no such file or corpus program: {name}")


def corpus_source(name: str) -> str:
    return resolve(name)[0]


def library_part(source: str) -> str:
    """The source up to its entry point."""
    cut = source.find(ENTRY_MARKER)
    return source if cut < 0 else source[:cut]


# ---------------------------------------------------------------------------
# value decoding


def tuple_values(v: Expr) -> list:
    """Flatten a right-nested pair of literals into a Python list."""
    out = []
    while isinstance(v, Pair):
        out.append(_lit(v.first))
        v = v.second
    out.append(_lit(v))
    return out


def _lit(v: Expr):
    if not isinstance(v, Lit):
        raise ValueError(f"not a literal: {v}")
    return v.value


# ---------------------------------------------------------------------------
# sieve


def sieve_program(n: int) -> str:
    """The sieve with an entry point that pulls the first ``n`` primes."""
    if n < 1:
        raise ValueError("need at least one prime")
    names = [f"p{i}" for i in range(1, n + 1)]
    pulls = "\n".join(f"    val (c, {x}) = channeg_send(select(c, #cons))" for x in names)
    result = names[0] if n == 1 else "(" + ", ".join(names) + ")"
    main = (
        f"fun main() =\n  let\n    val c = sieve()\n{pulls}\n  in\n"
        f"    channeg_close(select(c, #nil)); {result}\n  end\n"
    )
    return library_part(corpus_source("sieve")) + f"{ENTRY_MARKER}\n" + main


def sieve_result(v: Expr) -> list[int]:
    return tuple_values(v)


# ---------------------------------------------------------------------------
# queue

BASE = 1024
MAX_ELEMENT = BASE - 3


def encode_script(ops: Iterable[tuple]) -> int:
    """``("enq", v)`` and ``("deq",)`` operations as the client's script."""
    digits = []
    for op in ops:
        match op:
            case ("deq",):
                digits.append(1)
            case ("enq", int(v)) if 0 <= v <= MAX_ELEMENT:
                digits.append(v + 2)
            case _:
                raise ValueError(f"bad queue operation {op!r}")
    script = 0
    for d in reversed(digits):
        script = script * BASE + d
    return script


def queue_program(ops: Iterable[tuple]) -> str:
    """The queue with an entry point that replays ``ops``."""
    script = encode_script(ops)
    main = f"fun main(): int = client(queue_create(), {script}, 1)\n"
    return library_part(corpus_source("queue")) + f"{ENTRY_MARKER}\n" + main


def queue_result(v: Expr) -> list[Optional[int]]:
    """Dequeue answers in order; ``None`` stands for the empty queue."""
    acc = _lit(v)
    digits = []
    while acc > 1:
        acc, d = divmod(acc, BASE)
        digits.append(d)
    if acc != 1:
        raise ValueError("queue result lacks its sentinel")
    return [None if d == 0 else d - 1 for d in reversed(digits)]


def random_script(rng, length: int, max_value: int = 99) -> list[tuple]:
    """Enqueues and dequeues with equal odds."""
    return [("deq",) if rng.random() < 0.5 else ("enq", rng.randint(0, max_value))
            for _ in range(length)]
