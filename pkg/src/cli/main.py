"""
main.py
=======
specdb command line.

Subcommands:
  repl         interactive session on a database
  run          execute a command script; stops at the first failure
  check        parse and type-check a specification
  dump-normal  print the normalized clause matrix of each predicate
  oracle       `oracle check` one transaction, or run the `oracle suite`
  sizes        normal-form size table for every predicate

Exit codes: 0 success, 1 user error, 2 transaction failure (or oracle violation).

Usage:
    python src/cli/main.py run --spec specs/gradebook_session.spec \\
        --db data/db/gradebook.specdb --script sessions/gradebook.cmds
"""

import argparse
import os
import sys
from datetime import datetime
from typing import List, Optional

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from pydantic import ValidationError  # noqa: E402

from src.cli.repl import run_repl  # noqa: E402
from src.cli.script_runner import EXIT_OK, EXIT_TXN_FAILED, EXIT_USER_ERROR, run_script  # noqa: E402
from src.cli.session import Session  # noqa: E402
from src.config.settings import REPORTS_DIR, Settings, load_settings, setup_logging  # noqa: E402
from src.executor.executor import run_predicate  # noqa: E402
from src.kernel.errors import SessionError, SpecDBError  # noqa: E402
from src.kernel.type_checker import summarize  # noqa: E402
from src.normalization.normalizer import normalize_predicate  # noqa: E402
from src.oracle.corpus import SEED  # noqa: E402
from src.oracle.oracle import OracleConfig, oracle_check, write_reproducer  # noqa: E402
from src.oracle.suite import run_suite  # noqa: E402
from src.parsing.command_parser import Arg  # noqa: E402
from src.parsing.renderer import render_normal  # noqa: E402
from src.parsing.spec_parser import load_spec  # noqa: E402
from src.reporting.normal_form_sizes import run_normal_form_sizes  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdb", description="Execute declarative specifications as database transactions")
    parser.add_argument("--trace", action="store_true", default=None, help="print the search trace")
    parser.add_argument("--strategy", help="default | random:<seed> | exhaustive")
    parser.add_argument("--max-choices", type=int, help="choice budget per transaction")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")
    sub = parser.add_subparsers(dest="command", required=True)

    repl = sub.add_parser("repl", help="interactive session")
    repl.add_argument("--spec", required=True)
    repl.add_argument("--db", default=None)
    repl.add_argument("--journal", default=None)

    run = sub.add_parser("run", help="execute a command script")
    run.add_argument("--spec", required=True)
    run.add_argument("--db", required=True)
    run.add_argument("--script", required=True)
    run.add_argument("--journal", default=None)

    check = sub.add_parser("check", help="parse and type-check")
    check.add_argument("--spec", required=True)

    dump = sub.add_parser("dump-normal", help="print normalized predicates")
    dump.add_argument("--spec", required=True)
    dump.add_argument("--pred", default=None)

    sizes = sub.add_parser("sizes", help="normal-form size report")
    sizes.add_argument("--spec", required=True)

    oracle = sub.add_parser("oracle", help="reference-semantics checks")
    oracle_sub = oracle.add_subparsers(dest="oracle_command", required=True)
    ocheck = oracle_sub.add_parser("check", help="judge one transaction against the brute-force oracle")
    ocheck.add_argument("--spec", required=True)
    ocheck.add_argument("--db", required=True)
    ocheck.add_argument("--pred", required=True)
    ocheck.add_argument("--args", nargs="*", default=[], help="atom labels, in parameter order")
    osuite = oracle_sub.add_parser("suite", help="run the seeded oracle suite")
    osuite.add_argument("--count", type=int, default=200)
    osuite.add_argument("--seed", type=int, default=SEED)
    return parser


# ══════════════════════════════════════════════════════════════════════
# SUBCOMMANDS
# ══════════════════════════════════════════════════════════════════════

def cmd_check(args, settings: Settings) -> int:
    spec = load_spec(args.spec)
    summary = summarize(spec)
    print(f"✓ {spec.file}: {len(summary['signatures'])} signatures, {len(summary['predicates'])} predicates, "
          f"{len(summary['facts'])} facts (+{len(summary['derived_facts'])} derived)")
    print(f"  State signature: {summary['state_sig'] or '(none)'}")
    for name, fields in summary["signatures"].items():
        body = ", ".join(f"{f}: {cols}" for f, cols in fields.items())
        print(f"  sig {name}" + (f" {{ {body} }}" if body else ""))
    for name, params in summary["predicates"].items():
        print(f"  pred {name}({params})")
    return EXIT_OK


def cmd_dump_normal(args, settings: Settings) -> int:
    spec = load_spec(args.spec)
    if args.pred and spec.predicate(args.pred) is None:
        raise SessionError(f"unknown predicate '{args.pred}'")
    predicates = [spec.predicate(args.pred)] if args.pred else list(spec.predicates)
    for p in predicates:
        print(render_normal(normalize_predicate(p, spec.all_facts())))
    return EXIT_OK


def cmd_sizes(args, settings: Settings) -> int:
    run_normal_form_sizes(load_spec(args.spec))
    return EXIT_OK


def cmd_run(args, settings: Settings) -> int:
    spec = load_spec(args.spec)
    with Session(spec, args.db, settings, journal=args.journal) as session:
        summary = run_script(session, args.script)
    return summary.exit_code


def cmd_repl(args, settings: Settings) -> int:
    spec = load_spec(args.spec)
    db = args.db or os.path.join(PROJECT_ROOT, "data", "db", os.path.splitext(os.path.basename(args.spec))[0] + ".specdb")
    with Session(spec, db, settings, journal=args.journal) as session:
        run_repl(session)
    return EXIT_OK


def cmd_oracle(args, settings: Settings) -> int:
    if args.oracle_command == "suite":
        report = run_suite(args.count, args.seed, settings=settings)
        return EXIT_OK if report["summary"]["overall_status"] == "HEALTHY" else EXIT_TXN_FAILED

    spec = load_spec(args.spec)
    session = Session.read_only(spec, args.db, settings)
    np = session.normalized(args.pred)
    env = session.bind_args(np, [Arg(label, quoted=True) for label in args.args])
    result = run_predicate(np, env, session.instance, settings)
    report = oracle_check(spec, args.pred, session.instance, env, result,
                          OracleConfig.from_settings(settings))
    icon = "✅" if report.ok else "❌"
    print(f"{icon} {args.pred}({', '.join(args.args)}): {report.verdict.value}"
          + (f" ({report.detail})" if report.detail else ""))
    if report.ok:
        return EXIT_OK
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    directory = os.path.join(REPORTS_DIR, "reproducers", f"{args.pred}-{stamp}")
    write_reproducer(directory, spec, session.instance, args.pred, env, report)
    print(f"💾 Reproducer → {directory}")
    return EXIT_TXN_FAILED


COMMANDS = {
    "check": cmd_check,
    "dump-normal": cmd_dump_normal,
    "sizes": cmd_sizes,
    "run": cmd_run,
    "repl": cmd_repl,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(
            trace=args.trace, strategy=args.strategy, max_choices=args.max_choices,
            log_level=args.log_level,
        )
    except ValidationError as e:
        print(f"✗ invalid configuration:\n{e}", file=sys.stderr)
        return EXIT_USER_ERROR
    logger = setup_logging("cli", settings.log_level)
    try:
        return COMMANDS[args.command](args, settings)
    except SpecDBError as e:
        logger.error(f"✗ {e}")
        return EXIT_USER_ERROR
    except OSError as e:
        logger.error(f"✗ {e.filename or ''}: {e.strerror or e}")
        return EXIT_USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
