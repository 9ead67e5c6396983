"""Channel-set collections, DF-reduction and the per-step preservation monitor.

A collection holds one set of channel endpoints per thread.  Reducing via a
channel merges the two sets holding its endpoints and deletes the pair.
Viewing sets as nodes and channels as edges, a regular collection reduces
to all-empty sets exactly when that multigraph is a forest, so one greedy
pass decides reducibility.  ``oracle_df_reducible`` follows the recursive
definition literally and is kept for cross-checking.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional

import networkx as nx

from .syntax import Endpoint

ChannelSet = frozenset
Collection = tuple  # tuple[frozenset[Endpoint], ...]


def collection(sets: Iterable[Iterable[Endpoint]]) -> Collection:
    return tuple(frozenset(s) for s in sets)


def ep(text: str) -> Endpoint:
    """``"+3"`` or ``"-3"`` to an endpoint."""
    return Endpoint(int(text[1:]), text[0] == "+")


def show_set(s) -> str:
    return "{" + " ".join(str(e) for e in sorted(s)) + "}"


def show_collection(m) -> str:
    return " ".join(show_set(s) for s in m)


def canonical(m) -> tuple:
    """Order-insensitive key for a multiset of sets."""
    return tuple(sorted(tuple(sorted(s)) for s in m))


def ids_of(m) -> set[int]:
    return {e.id for s in m for e in s}


# ---------------------------------------------------------------------------
# regularity and reduction


def regularity_problem(m) -> Optional[str]:
    seen: dict[Endpoint, int] = {}
    for i, s in enumerate(m):
        for e in s:
            if e in seen:
                return f"endpoint {e} occurs in sets {seen[e]} and {i}"
            seen[e] = i
    unpaired = [e for e in seen if e.dual not in seen]
    if unpaired:
        return f"unpaired endpoint {min(unpaired)}"
    return None


def is_regular(m) -> bool:
    """Pairwise disjoint, and every endpoint's dual is present too."""
    return regularity_problem(m) is None


class ReductionError(ValueError):
    pass


def _locate(m, cid: int) -> tuple[int, int]:
    i = j = None
    for k, s in enumerate(m):
        if Endpoint(cid, True) in s:
            i = k
        if Endpoint(cid, False) in s:
            j = k
    if i is None or j is None:
        raise ReductionError(f"channel {cid} is not in the collection")
    if i == j:
        raise ReductionError(f"set {i} is self-looping on channel {cid}")
    return i, j


def df_reduce(m, cid: int) -> Collection:
    """Merge the sets holding ``+cid`` and ``-cid``, dropping both endpoints."""
    i, j = _locate(m, cid)
    merged = (m[i] | m[j]) - {Endpoint(cid, True), Endpoint(cid, False)}
    lo, hi = min(i, j), max(i, j)
    out = list(m)
    out[lo] = frozenset(merged)
    del out[hi]
    return tuple(out)


def drop_empty(m) -> Collection:
    """The collection without its empty sets."""
    return tuple(s for s in m if s)


def self_looping(m) -> list[int]:
    return [i for i, s in enumerate(m) if any(e.positive and e.dual in s for e in s)]


@dataclass(frozen=True)
class DFVerdict:
    reducible: bool
    trace: tuple[tuple[int, int, int], ...]  # (channel id, set index, set index)
    normal_form: Collection
    witness: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.reducible


def is_df_reducible(m, *, regular: bool = False) -> DFVerdict:
    """Decide reducibility with one maximal greedy reduction sequence.

    Set indices in the trace refer to the input; a merged set keeps the
    smaller index of its two parts.
    """
    problem = None if regular else regularity_problem(m)
    if problem is not None:
        raise ReductionError(f"collection is not regular: {problem}")
    sets: list[Optional[frozenset]] = list(m)
    where = {e: i for i, s in enumerate(m) for e in s}
    trace = []
    for cid in sorted(ids_of(m)):
        pos, neg = Endpoint(cid, True), Endpoint(cid, False)
        i, j = where[pos], where[neg]
        if i == j:
            continue
        lo, hi = min(i, j), max(i, j)
        merged = (sets[lo] | sets[hi]) - {pos, neg}
        sets[lo], sets[hi] = frozenset(merged), None
        for e in merged:
            where[e] = lo
        trace.append((cid, i, j))
    normal = tuple(s for s in sets if s is not None)
    if all(not s for s in normal):
        return DFVerdict(True, tuple(trace), normal)
    loops = self_looping(m)
    if loops:
        witness = {"kind": "self-loop", "set": loops[0], "channels": sorted(m[loops[0]])}
    else:
        witness = {"kind": "normal-form", "sets": [sorted(s) for s in normal if s]}
    witness["cycle"] = channel_cycle(m)
    return DFVerdict(False, tuple(trace), normal, witness)


def channel_cycle(m) -> list[tuple[int, int]]:
    """A cycle of (set index, channel id) steps in the graph whose nodes are
    the sets and whose edges are the channels; empty for a forest."""
    g = nx.MultiGraph()
    g.add_nodes_from(range(len(m)))
    where = {e: i for i, s in enumerate(m) for e in s}
    for cid in sorted(ids_of(m)):
        g.add_edge(where[Endpoint(cid, True)], where[Endpoint(cid, False)], key=cid)
    try:
        return [(u, k) for u, _, k in nx.find_cycle(g)]
    except nx.NetworkXNoCycle:
        return []


class BoundExceeded(ValueError):
    pass


def oracle_df_reducible(m, bound: int = 12) -> bool:
    """The recursive definition, exploring every successor."""
    size = sum(len(s) for s in m)
    if size > bound:
        raise BoundExceeded(f"{size} endpoints exceed the oracle bound {bound}")
    if not is_regular(m):
        raise ReductionError("collection is not regular")
    return _oracle(canonical(m))


@lru_cache(maxsize=None)
def _oracle(key: tuple) -> bool:
    m = tuple(frozenset(s) for s in key)
    if all(not s for s in m):
        return True
    succs = []
    for cid in sorted(ids_of(m)):
        try:
            succs.append(df_reduce(m, cid))
        except ReductionError:
            pass
    if not succs:  # DF-normal but not all empty
        return False
    return all(_oracle(canonical(s)) for s in succs)


def is_df_normal(m) -> bool:
    for cid in ids_of(m):
        try:
            _locate(m, cid)
            return False
        except ReductionError:
            pass
    return True


# ---------------------------------------------------------------------------
# pools


def rch_map(threads: dict) -> dict[int, frozenset]:
    """Per-thread channel sets, keyed by thread id."""
    return {tid: frozenset(e.res) for tid, e in threads.items()}


def rch(pool) -> Collection:
    """One channel set per thread, ordered by thread id."""
    threads = pool.threads if hasattr(pool, "threads") else pool
    m = rch_map(threads)
    return tuple(m[t] for t in sorted(m))


@dataclass(frozen=True)
class MonitorResult:
    ok: bool
    check: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


OK = MonitorResult(True)


def monitor_step(prev: dict, event, next_: dict, *, terminal_exempt: bool = False) -> MonitorResult:
    """Check one pool transition against the preservation argument.

    ``prev`` and ``next_`` map thread ids to channel sets.  ``event`` needs
    ``rule``, ``tids``, ``chan`` and ``path`` (channel ids crossed by a
    communication, which for a direct exchange is just ``(chan,)``).
    """
    pm, nm = tuple(prev.values()), tuple(next_.values())
    problem = regularity_problem(nm)
    if problem is not None:
        return MonitorResult(False, "regular", problem)
    if not terminal_exempt:
        verdict = is_df_reducible(nm, regular=True)
        if not verdict:
            return MonitorResult(False, "reducible",
                                 f"{show_collection(nm)} is not DF-reducible; {describe_witness(verdict)}")
    rule = event.rule
    try:
        _shape(rule, event, prev, next_)
    except _Shape as err:
        return MonitorResult(False, f"shape:{rule}", str(err))
    except ReductionError as err:
        return MonitorResult(False, f"shape:{rule}", str(err))
    return OK


class _Shape(Exception):
    pass


def _others_equal(prev, next_, tids) -> None:
    a = {t: s for t, s in prev.items() if t not in tids}
    b = {t: s for t, s in next_.items() if t not in tids}
    if a != b:
        raise _Shape("uninvolved threads changed their channel sets")


def _same_multiset(a, b, what: str) -> None:
    if Counter(canonical(a)) != Counter(canonical(b)):
        raise _Shape(f"{what}: {show_collection(a)} vs {show_collection(b)}")


def _shape(rule: str, event, prev, next_) -> None:
    tids = set(event.tids)
    match rule:
        case "PR0":
            (t,) = event.tids
            _others_equal(prev, next_, ())
        case "PR1":
            t, k = event.tids
            _others_equal(prev, next_, (t, k))
            if next_[t] & next_[k] or next_[t] | next_[k] != prev[t]:
                raise _Shape("thread creation must split the creator's set")
        case "PR2":
            (t,) = event.tids
            if prev[t] or t in next_:
                raise _Shape("only an empty finished thread may be removed")
            _others_equal(prev, next_, (t,))
        case "PR3":
            _others_equal(prev, next_, tids)
            back = df_reduce(tuple(next_.values()), event.chan)
            _same_multiset(back, tuple(prev.values()), "new channel does not reduce back")
        case "CREATE2":
            _others_equal(prev, next_, tids)
            back = tuple(next_.values())
            for cid in event.path:
                back = df_reduce(back, cid)
            _same_multiset(back, tuple(prev.values()), "new channels do not reduce back")
        case "PR4-clos" | "LINK-clos":
            _others_equal(prev, next_, tids)
            gone = {Endpoint(event.chan, True), Endpoint(event.chan, False)}
            for t in tids:
                if next_.get(t, frozenset()) != prev[t] - gone:
                    raise _Shape(f"closing must only remove channel {event.chan}")
        case _:  # communication, possibly through linkers
            _others_equal(prev, next_, tids)
            a, b = tuple(prev.values()), tuple(next_.values())
            for cid in event.path:
                a, b = df_reduce(a, cid), df_reduce(b, cid)
            _same_multiset(a, b, "communication changed the merged sets")


# ---------------------------------------------------------------------------
# df-check file format


class DFParseError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


_EP = re.compile(r"^[+-][0-9]+$")


def parse_collection(text: str) -> Collection:
    """One set per line, endpoints ``+id``/``-id``; braces optional;
    a blank line is an empty set."""
    lines = text.splitlines()
    if not lines:
        raise DFParseError("empty collection", 1)
    sets = []
    for n, raw in enumerate(lines, 1):
        body = raw.strip()
        if body.startswith("{") or body.endswith("}"):
            if not (body.startswith("{") and body.endswith("}")):
                raise DFParseError(f"unbalanced braces in {raw!r}", n)
            body = body[1:-1]
        items = body.replace(",", " ").split()
        s = set()
        for it in items:
            if not _EP.match(it):
                raise DFParseError(f"bad endpoint {it!r}", n)
            e = ep(it)
            if e in s:
                raise DFParseError(f"endpoint {it} repeated in one set", n)
            s.add(e)
        sets.append(frozenset(s))
    return tuple(sets)


def describe_witness(v: DFVerdict) -> str:
    w = v.witness
    if w["kind"] == "self-loop":
        return f"witness: self-looping set {w['set']} {show_set(w['channels'])}"
    return "witness: normal form " + " ".join(show_set(s) for s in w["sets"])


def describe_cycle(v: DFVerdict) -> str:
    steps = v.witness.get("cycle", [])
    sets = " ".join(str(i) for i, _ in steps)
    chans = " ".join(str(c) for _, c in steps)
    return f"cycle: {len(steps)} set(s) {sets} via channel(s) {chans}"


def render_verdict(m) -> tuple[int, list[str]]:
    """Exit status and output lines for the ``df-check`` command."""
    problem = regularity_problem(m)
    if problem is not None:
        return 1, ["non-reducible", f"not regular: {problem}"]
    v = is_df_reducible(m)
    lines = ["reducible" if v.reducible else "non-reducible"]
    for cid, i, j in v.trace:
        lines.append(f"reduce {cid}: sets {i} and {j}")
    if not v.reducible:
        lines.append(describe_witness(v))
        lines.append(describe_cycle(v))
    return (0 if v.reducible else 1), lines
