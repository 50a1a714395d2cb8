"""
copg-toolkit - Command Line
===========================
Front door to the library: grammar checks, matrices, parsing, conversions,
automaton runs, bounded enumeration and the parallel-parse benchmark.

Usage:
    python cli.py check samples/gae.copg
    python cli.py opm samples/gaae.copg --format json -o gaae.opm.json
    python cli.py parse --opm samples/fig2.opm.json "n+n×n+n"
    python cli.py parse --grammar samples/gaae.copg --labeled "n+n×n"
    python cli.py to-opa samples/gae.copg -o gae.opa.json
    python cli.py to-grammar gae.opa.json
    python cli.py run --opa samples/fig3.opa.json --trace "n+n×⦇n+n⦈"
    python cli.py enumerate --grammar samples/gae.copg --max-len 5
    python cli.py bench --opm samples/fig4.opm.json --parallel 4 --input sum.txt

Exit codes:
    0  success
    1  the input is rejected: parse failure, non-acceptance, failed check
    2  a file or document is malformed
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

import settings
from conversions import ConversionError, grammar_to_opa, opa_to_grammar, state_count_report
from grammar import (GrammarError, GrammarSyntaxError, compute_opm, enumerate_language, format_grammar, is_bd,
                     load_grammar, validate)
from opa import OpaFormatError, format_trace, load_opa
from opm_core import Opm, OpmError, OpmFormatError, load_opm, split_terminals
from parallel_parse import parallel_parse
from structure_parser import ParseError, parse_labeled, parse_opm, to_sexpr, tree_to_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_FORMAT = 2


class UsageError(ValueError):
    """Invalid flag combination."""


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Wrote {output}")
    else:
        sys.stdout.write(text)


def _dump(data) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2) + "\n"


def _grammar_matrix(path: str) -> Opm:
    report = compute_opm(load_grammar(path))
    if not report.is_copg:
        raise GrammarError("grammar has conflicting precedence relations: "
                           + "; ".join(c.describe() for c in report.conflicts))
    return report.opm


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_check(args: argparse.Namespace) -> int:
    g = load_grammar(args.grammar)
    violations = validate(g)
    report = compute_opm(g)
    cycle = report.opm.eq_cycle()
    bd = is_bd(g)
    ok = not violations and report.is_copg

    if args.format == "json":
        _emit(_dump({
            "valid": not violations,
            "violations": [v.describe() for v in violations],
            "opm": report.opm.to_json(),
            "conflicts": [c.describe() for c in report.conflicts],
            "eq_cycle": cycle,
            "backward_deterministic": bd.is_bd,
            "bd_collisions": [[str(r1), str(r2)] for r1, r2 in bd.collisions],
        }), args.output)
        return EXIT_OK if ok else EXIT_REJECTED

    lines = [f"grammar: {args.grammar}",
             f"rules: {len(g.rules)}, nonterminals: {len(g.nonterminals)}, terminals: {len(g.terminals)}"]
    if violations:
        lines.append("validation: FAILED")
        lines += [f"  {v.describe()}" for v in violations]
    else:
        lines.append("validation: ok")
    lines.append("matrix:")
    lines += ["  " + row for row in report.opm.format_table().splitlines()]
    if report.conflicts:
        lines.append("conflicts:")
        lines += [f"  {c.describe()}" for c in report.conflicts]
    else:
        lines.append("conflicts: none")
    lines.append("⩵-cycle: " + (" ⩵ ".join(cycle) if cycle else "none"))
    if bd.is_bd:
        lines.append("backward deterministic: yes")
    else:
        lines.append("backward deterministic: no")
        lines += [f"  {r1}  /  {r2}" for r1, r2 in bd.collisions]
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK if ok else EXIT_REJECTED


def cmd_opm(args: argparse.Namespace) -> int:
    report = compute_opm(load_grammar(args.grammar))
    if args.format == "json":
        _emit(_dump(report.opm.to_json()), args.output)
    else:
        _emit(report.opm.format_table() + "\n", args.output)
    for c in report.conflicts:
        logger.warning(f"conflict {c.describe()}")
    return EXIT_OK if report.is_copg else EXIT_REJECTED


def cmd_parse(args: argparse.Namespace) -> int:
    if bool(args.grammar) == bool(args.opm):
        raise UsageError("parse needs exactly one of --grammar or --opm")
    if args.labeled and not args.grammar:
        raise UsageError("--labeled needs --grammar")
    if args.labeled and args.parallel:
        raise UsageError("--labeled and --parallel cannot be combined")
    w = split_terminals(args.input)

    if args.labeled:
        tree = parse_labeled(load_grammar(args.grammar), w)
    else:
        m = load_opm(args.opm) if args.opm else _grammar_matrix(args.grammar)
        if args.parallel:
            tree, stats = parallel_parse(m, w, args.parallel, processes=args.processes)
            sys.stderr.write(stats.to_csv())
        else:
            tree = parse_opm(m, w)

    if args.format == "sexpr":
        _emit(to_sexpr(tree) + "\n", args.output)
    else:
        _emit(_dump(tree_to_json(tree)), args.output)
    return EXIT_OK


def cmd_to_opa(args: argparse.Namespace) -> int:
    g = load_grammar(args.grammar)
    a = grammar_to_opa(g)
    report = state_count_report(g, a)
    logger.info(f"{report.states} states; bound {report.bound}, |ℙ| = {report.prefixes}")
    _emit(_dump(a.to_json()), args.output)
    return EXIT_OK


def cmd_to_grammar(args: argparse.Namespace) -> int:
    g = opa_to_grammar(load_opa(args.opa))
    _emit(format_grammar(g), args.output)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    a = load_opa(args.opa)
    result = a.accepts(split_terminals(args.input), trace=args.trace)
    text = "accepted\n" if result.accepted else "rejected\n"
    if args.trace and result.accepted:
        text += format_trace(result.trace)
    _emit(text, args.output)
    return EXIT_OK if result.accepted else EXIT_REJECTED


def cmd_enumerate(args: argparse.Namespace) -> int:
    words = enumerate_language(load_grammar(args.grammar), args.max_len)
    ordered = sorted(words, key=lambda s: (len(split_terminals(s)), s))
    _emit("".join((w if w else "ε") + "\n" for w in ordered), args.output)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    m = load_opm(args.opm)
    with open(args.input, encoding="utf-8") as f:
        w = split_terminals(f.read())
    _, stats = parallel_parse(m, w, args.parallel, processes=args.processes)
    _emit(stats.to_csv(), args.output)
    return EXIT_OK


# =============================================================================
# ARGUMENTS
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copg", description="Cyclic operator precedence grammars and automata")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: COPG_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flag(p: argparse.ArgumentParser) -> None:
        p.add_argument("-o", "--output", help="Write to FILE instead of stdout")

    p = sub.add_parser("check", help="Validate a grammar and report its matrix")
    p.add_argument("grammar")
    p.add_argument("--format", choices=["text", "json"], default="text")
    output_flag(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("opm", help="Print or export a grammar's matrix")
    p.add_argument("grammar")
    p.add_argument("--format", choices=["text", "json"], default="text")
    output_flag(p)
    p.set_defaults(func=cmd_opm)

    p = sub.add_parser("parse", help="Parse a string with a matrix or grammar")
    p.add_argument("input")
    p.add_argument("--grammar")
    p.add_argument("--opm")
    p.add_argument("--labeled", action="store_true", help="Label nodes with grammar rules")
    p.add_argument("--parallel", type=int, metavar="K", help="Parse in K chunks")
    p.add_argument("--processes", type=int, default=None, help="Worker processes (default: COPG_WORKERS)")
    p.add_argument("--format", choices=["json", "sexpr"], default="json")
    output_flag(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("to-opa", help="Build the automaton of a grammar")
    p.add_argument("grammar")
    output_flag(p)
    p.set_defaults(func=cmd_to_opa)

    p = sub.add_parser("to-grammar", help="Build the grammar of an automaton")
    p.add_argument("opa")
    output_flag(p)
    p.set_defaults(func=cmd_to_grammar)

    p = sub.add_parser("run", help="Run an automaton on a string")
    p.add_argument("input")
    p.add_argument("--opa", required=True)
    p.add_argument("--trace", action="store_true", help="Print the accepting run")
    output_flag(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enumerate", help="List a grammar's words up to a length")
    p.add_argument("--grammar", required=True)
    p.add_argument("--max-len", type=int, required=True)
    output_flag(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("bench", help="Parallel-parse a file and report work per worker")
    p.add_argument("--opm", required=True)
    p.add_argument("--parallel", type=int, required=True, metavar="K")
    p.add_argument("--input", required=True, help="File holding the input string")
    p.add_argument("--processes", type=int, default=None)
    output_flag(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings.configure_logging(args.log_level, stream=sys.stderr)
    try:
        return args.func(args)
    except (OpmFormatError, OpaFormatError, GrammarSyntaxError, UsageError, json.JSONDecodeError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FORMAT
    except (ParseError, OpmError, GrammarError, ConversionError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_REJECTED


if __name__ == "__main__":
    sys.exit(main())
