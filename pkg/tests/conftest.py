from __future__ import annotations

import pytest
from hypothesis import settings

from mtlc import runtime, stdlib
from mtlc.dfcheck import collection
from mtlc.parser import elaborate
from mtlc.syntax import Endpoint
from mtlc.typecheck import check_source

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def compile_source(text: str, *, allow_create2: bool = False):
    """Parse and check ``text``; return ``(main expression, session env)``."""
    prog, res = check_source(text, "<test>", allow_create2=allow_create2)
    assert res.ok, [str(d) for d in res.diagnostics]
    return elaborate(prog)["main"], prog.env


def run_source(text: str, *, seed: int = 0, policy: str = "random", monitors=None,
               allow_create2: bool = False, trace: int = 0, steps: int = 1_000_000):
    main, env = compile_source(text, allow_create2=allow_create2)
    cfg = runtime.SchedulerConfig(seed=seed, steps=steps, policy=policy)
    return runtime.run(main, env, cfg, monitors or runtime.Monitors(),
                       allow_create2=allow_create2, trace=trace)


def coll(*sets):
    """``coll("+1 -2", "")`` builds a collection from endpoint strings."""
    return collection([{Endpoint(int(w[1:]), w[0] == "+") for w in s.split()} for s in sets])


def to_pairs(m):
    """A package collection in the oracle's ``(id, sign)`` representation."""
    return tuple(frozenset((e.id, "+" if e.positive else "-") for e in s) for s in m)


@pytest.fixture(scope="session")
def corpus_compiled():
    out = {}
    for name in stdlib.RUNNABLE:
        out[name] = compile_source(stdlib.corpus_source(name))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
