"""Command-line entry point: ``check``, ``run``, ``df-check`` and ``demo``.

Exit status: 0 success or final value, 1 rejected program or non-reducible
collection, 2 deadlock, 3 step limit, 4 monitor violation, 5 unreadable or
malformed input.
"""

from __future__ import annotations

import argparse
import random
import sys
from typing import Optional, Sequence

from .dfcheck import DFParseError, parse_collection, render_verdict
from .parser import elaborate, show
from .runtime import (
    EXIT_CODES, Deadlock, FinalValue, MonitorViolation, Monitors, SchedulerConfig,
    StepLimit, run,
)
from .stdlib import (
    queue_program, queue_result, random_script, resolve, sieve_program, sieve_result,
)
from .typecheck import check_source

EXIT_REJECTED = 1
EXIT_INPUT = 5


class InputError(Exception):
    pass


def _read(path: str) -> tuple[str, str]:
    try:
        return resolve(path)
    except (OSError, UnicodeDecodeError) as err:
        raise InputError(str(err)) from None


def _checked(text: str, file: str, allow_create2: bool, out):
    prog, res = check_source(text, file, allow_create2=allow_create2)
    for d in res.diagnostics:
        print(d, file=out)
    return prog if res.ok else None


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    text, file = _read(args.path)
    prog, res = check_source(text, file, allow_create2=args.allow_create2)
    for d in res.diagnostics:
        print(d)
    if not res.ok:
        return EXIT_REJECTED
    print(f"ok {file}: main : {res.main_type}")
    return 0


def _monitors(args, default: bool) -> Monitors:
    on = args.monitor_all or (default and not args.no_monitor)
    return Monitors(
        types=on or args.monitor_types,
        df=on or args.monitor_df,
        canonical=on or args.monitor_canonical,
    )


def _execute(text: str, file: str, args, monitors: Monitors):
    prog = _checked(text, file, args.allow_create2, sys.stdout)
    if prog is None:
        return None
    main = elaborate(prog)["main"]
    cfg = SchedulerConfig(seed=args.seed, steps=args.steps, policy=args.policy)
    level = 2 if args.trace_sets else (1 if args.trace else 0)
    result = run(main, prog.env, cfg, monitors, allow_create2=args.allow_create2, trace=level)
    if level:
        for ev in result.trace:
            print(ev)
    return result


def _report(result) -> int:
    for v in result.violations:
        print(f"violation monitor={v.monitor} step={v.step} {v.detail}")
    o = result.outcome
    match o:
        case FinalValue(value, residual):
            print(f"value: {show(value)}" + (" (other threads remain)" if residual else ""))
        case Deadlock(w):
            for tid, what in sorted(w["threads"].items()):
                print(f"thread {tid}: {what}")
            print("waits: " + " ".join(f"{u}->{v}@{c}" for u, v, c in w["edges"]))
            print("cycle: " + " ".join(f"{u}->{v}" for u, v in w["cycle"]))
        case StepLimit():
            print(f"step limit reached after {result.steps} steps")
        case MonitorViolation():
            pass
    print(f"outcome={o.kind} steps={result.steps}")
    return EXIT_CODES[o.kind]


def cmd_run(args) -> int:
    text, file = _read(args.path)
    result = _execute(text, file, args, _monitors(args, default=False))
    return EXIT_REJECTED if result is None else _report(result)


def cmd_df_check(args) -> int:
    text, _ = _read(args.path)
    try:
        m = parse_collection(text)
    except DFParseError as err:
        print(f"error {args.path}:{err.line} {err}", file=sys.stderr)
        return EXIT_INPUT
    status, lines = render_verdict(m)
    for line in lines:
        print(line)
    return status


def cmd_demo(args) -> int:
    monitors = _monitors(args, default=True)
    match args.program:
        case "sieve":
            n = int(args.arg) if args.arg is not None else 10
            if n < 1:
                raise InputError("the sieve demo needs at least one prime")
            result = _execute(sieve_program(n), f"sieve({n})", args, monitors)
            decode, label = sieve_result, "primes"
        case "queue":
            n = int(args.arg) if args.arg is not None else 200
            ops = random_script(random.Random(args.script_seed), n)
            result = _execute(queue_program(ops), f"queue({n})", args, monitors)
            decode, label = queue_result, "dequeued"
            print("script: " + " ".join("deq" if op == ("deq",) else f"enq:{op[1]}" for op in ops))
        case name:
            text, file = _read(name)
            result = _execute(text, file, args, monitors)
            decode, label = None, None
    if result is None:
        return EXIT_REJECTED
    if decode is not None and isinstance(result.outcome, FinalValue):
        items = decode(result.outcome.value)
        print(f"{label}: " + " ".join("none" if x is None else str(x) for x in items))
    return _report(result)


# ---------------------------------------------------------------------------
# argument parsing


def _run_flags(p: argparse.ArgumentParser, *, demo: bool) -> None:
    p.add_argument("--seed", type=int, default=0, help="scheduler seed (default 0)")
    p.add_argument("--policy", choices=("random", "rr", "adversarial"), default="random")
    p.add_argument("--steps", type=int, default=1_000_000, help="step limit")
    p.add_argument("--trace", action="store_true", help="print one line per step")
    p.add_argument("--trace-sets", action="store_true",
                   help="like --trace, also listing each thread's channels")
    p.add_argument("--monitor-types", action="store_true", help="re-type the pool after each step")
    p.add_argument("--monitor-df", action="store_true", help="check DF-reducibility after each step")
    p.add_argument("--monitor-canonical", action="store_true", help="audit finished values")
    p.add_argument("--monitor-all", action="store_true", help="all monitors")
    p.add_argument("--allow-create2", action="store_true",
                   help="enable the two-channel creation primitive")
    if demo:
        p.add_argument("--no-monitor", action="store_true", help="turn the default monitors off")
        p.add_argument("--script-seed", type=int, default=0, help="seed of the queue script")
    else:
        p.set_defaults(no_monitor=False)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtlc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="typecheck a program")
    p.add_argument("path")
    p.add_argument("--allow-create2", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="typecheck and run a program")
    p.add_argument("path")
    _run_flags(p, demo=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("df-check", help="decide DF-reducibility of a collection file")
    p.add_argument("path")
    p.set_defaults(func=cmd_df_check)

    p = sub.add_parser("demo", help="run sieve N, queue N, or a corpus program, monitored")
    p.add_argument("program")
    p.add_argument("arg", nargs="?")
    _run_flags(p, demo=True)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
