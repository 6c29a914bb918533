"""Command-line interface.

Exit codes: 0 yes/entailed/accepted/ok, 1 no, 2 a cap was hit,
64 usage error, 65 unparsable input, 66 missing input file.
"""
from __future__ import annotations

import argparse
import hashlib
import random
import sys
import time
from pathlib import Path

from . import __version__
from .brake import NameCollision, brake_transform, build_r6
from .chase import (
    STRATEGIES, TERMINATED, Caps, Strategy, decide_goal, default_max_nodes, parallel_chase,
    run_chase, write_tree_json, ENTAILED, NOT_ENTAILED,
)
from .disjfree import NotDatalog, Split, SplitViolation, build_pipeline, remove_disjunctions
from .hom import entails
from .model import DatabaseParseError, Names, format_db, parse_db
from .querygen import InvalidSchema, generate_stage, make_context
from .rules import ParseError, ValidationError, format_rules, parse_rules, parse_schema
from .turing import (
    ACCEPT, REJECT, InvalidMachine, MachineViolation, MalformedSerialisation, SchemaMismatch,
    deserialize, format_word, parse_tm, random_serialisation, run_tm, serialize_db, tokenize_word,
)

EX_YES, EX_NO, EX_CAP = 0, 1, 2
EX_USAGE, EX_DATAERR, EX_NOINPUT = 64, 65, 66
CAP_EXCEEDED = "CAP-EXCEEDED"
COMPILE_STAGES = ("r1", "r2", "r3", "r4", "r5", "r6", "final")

PARSE_ERRORS = (ParseError, ValidationError, DatabaseParseError, InvalidMachine, InvalidSchema,
                MalformedSerialisation, SchemaMismatch, NotDatalog, SplitViolation, NameCollision)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    return Path(path).read_text()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _caps(args) -> Caps:
    caps = Caps(max_nodes=args.max_nodes if args.max_nodes is not None else default_max_nodes())
    if args.max_steps is not None:
        caps.max_steps = args.max_steps
    if args.max_seconds is not None:
        caps.max_seconds = args.max_seconds
    for name in ("max_nodes", "max_steps", "max_seconds"):
        if getattr(caps, name) is not None and getattr(caps, name) <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    return caps


def _status_line(status: str, out, ms: float) -> str:
    s = out.stats
    return f"status={status} nodes={s.nodes} steps={s.applications} depth={s.max_depth} ms={ms:.0f}\n"


def _verdict(out) -> tuple[str, int]:
    if out.status != TERMINATED or out.stats.open_branches:
        return CAP_EXCEEDED, EX_CAP
    if all(out.leaf_goal) if out.leaf_goal else out.stats.goal_leaves == out.stats.leaves:
        return ENTAILED, EX_YES
    return NOT_ENTAILED, EX_NO


# subcommands

def cmd_entail(args) -> int:
    rs = parse_rules(_read(args.rules))
    db = parse_db(_read(args.db))
    caps = _caps(args)
    strategy = Strategy(args.strategy, args.seed)
    t0 = time.perf_counter()
    if args.early_stop:
        v = decide_goal(rs, db, strategy, caps)
        out = v.outcome
        status, code = {ENTAILED: (ENTAILED, EX_YES), NOT_ENTAILED: (NOT_ENTAILED, EX_NO)}.get(
            v.status, (CAP_EXCEEDED, EX_CAP))
    else:
        options = dict(record_tree=False, keep_leaves=False, stop_on_goal=True)
        if args.jobs > 1:
            out = parallel_chase(rs, db, strategy, caps, jobs=args.jobs, **options)
        else:
            out = run_chase(rs, db, strategy, caps, **options)
        status, code = _verdict(out)
    sys.stdout.write(_status_line(status, out, 1000 * (time.perf_counter() - t0)))
    return code


def cmd_chase(args) -> int:
    rs = parse_rules(_read(args.rules))
    names = Names()
    db = parse_db(_read(args.db), names)
    caps = _caps(args)
    strategy = Strategy(args.strategy, args.seed)
    t0 = time.perf_counter()
    options = dict(record_tree=args.emit_tree is not None)
    if args.jobs > 1:
        out = parallel_chase(rs, db, strategy, caps, jobs=args.jobs, **options)
    else:
        out = run_chase(rs, db, strategy, caps, **options)
    status, code = _verdict(out)
    if args.emit_tree is not None:
        with open(args.emit_tree, "w") as fh:
            write_tree_json(out.tree, fh)
    if args.emit_leaves is not None:
        d = Path(args.emit_leaves)
        d.mkdir(parents=True, exist_ok=True)
        for k, (leaf, kind) in enumerate(zip(out.leaves, out.leaf_kinds), 1):
            (d / f"leaf{k:05d}.db").write_text(f"# {kind}\n" + format_db(leaf, names))
    sys.stdout.write(_status_line(status, out, 1000 * (time.perf_counter() - t0)))
    return code


def cmd_entail_bcq(args) -> int:
    names = Names()
    src = parse_db(_read(args.src), names)
    query = parse_db(_read(args.query), names)
    ok = entails(src, query)
    sys.stdout.write("true\n" if ok else "false\n")
    return EX_YES if ok else EX_NO


def _header(stage: str, schema_text: str, tm_text: str, strict: bool) -> str:
    return "\n".join([
        f"chasekit {__version__}",
        f"stage: {stage}",
        f"schema-sha256: {_sha(schema_text)}",
        f"tm-sha256: {_sha(tm_text)}",
        f"strict: {'yes' if strict else 'no'}",
    ])


def cmd_compile(args) -> int:
    schema_text, tm_text = _read(args.schema), _read(args.tm)
    ctx = make_context(parse_schema(schema_text), parse_tm(tm_text), not args.non_strict)
    if args.stage == "r6":
        rs = build_r6(ctx)
    elif args.stage == "final":
        rs = build_pipeline(ctx)
    else:
        rs = generate_stage(ctx, args.stage)
    _write(args.output, format_rules(rs, _header(args.stage, schema_text, tm_text, not args.non_strict)))
    return EX_YES


def cmd_brake(args) -> int:
    text = _read(args.rules)
    out = brake_transform(parse_rules(text)).rules
    header = [f"chasekit {__version__}", "brake", f"rules-sha256: {_sha(text)}"]
    if args.halt_rules:
        halt_text = _read(args.halt_rules)
        out = out + parse_rules(halt_text)
        header.append(f"halt-rules-sha256: {_sha(halt_text)}")
    _write(args.output, format_rules(out, "\n".join(header)))
    return EX_YES


def cmd_remove_disj(args) -> int:
    t1, t2 = _read(args.sigma1), _read(args.sigma2)
    out = remove_disjunctions(Split(parse_rules(t1), parse_rules(t2)), acc_flag=args.acc_flag)
    header = [f"chasekit {__version__}", "remove-disj",
              f"sigma1-sha256: {_sha(t1)}", f"sigma2-sha256: {_sha(t2)}"]
    _write(args.output, format_rules(out, "\n".join(header)))
    return EX_YES


def cmd_tm_run(args) -> int:
    tm = parse_tm(_read(args.tm))
    word = args.input if args.input is not None else _read(args.input_file).strip()
    res = run_tm(tm, tokenize_word(word, tm.blank), args.step_cap)
    sys.stdout.write(f"status={res.status} steps={res.steps} state={res.config.state}\n")
    return {ACCEPT: EX_YES, REJECT: EX_NO}.get(res.status, EX_CAP)


def cmd_serialize(args) -> int:
    schema = parse_schema(_read(args.schema))
    db = parse_db(_read(args.db))
    if args.random:
        word = random_serialisation(db, schema, random.Random(args.seed))
    else:
        word = serialize_db(db, schema)
    sys.stdout.write(format_word(word) + "\n")
    return EX_YES


def cmd_deserialize(args) -> int:
    schema = parse_schema(_read(args.schema))
    word = args.word if args.word is not None else _read(args.word_file).strip()
    names = Names()
    db = deserialize(word, schema)
    for k in sorted(db.nulls()):
        names.intern(f"n{k}")
    _write(args.output, format_db(db, names))
    return EX_YES


# parser

def _chase_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default="fifo", help="trigger selection order")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed; 0 keeps discovery order")
    p.add_argument("--max-nodes", type=int, default=None,
                   help="node cap (default: $CHASEKIT_MAX_NODES or 1000000)")
    p.add_argument("--max-steps", type=int, default=None, help="cap on rule applications")
    p.add_argument("--max-seconds", type=float, default=None, help="wall-clock cap")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the branches of the first split")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chasekit", description="Disjunctive chase engine and query compiler.")
    parser.add_argument("--version", action="version", version=f"chasekit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("entail", help="decide whether the rules and database entail Goal")
    p.add_argument("--rules", required=True, help="rule file")
    p.add_argument("--db", required=True, help="database file")
    _chase_flags(p)
    p.add_argument("--early-stop", action="store_true",
                   help="stop at the first finished branch without Goal")
    p.set_defaults(func=cmd_entail)

    p = sub.add_parser("chase", help="run the chase and optionally export the tree and leaves")
    p.add_argument("--rules", required=True, help="rule file")
    p.add_argument("--db", required=True, help="database file")
    _chase_flags(p)
    p.add_argument("--emit-tree", metavar="FILE", help="write the chase tree as JSON")
    p.add_argument("--emit-leaves", metavar="DIR", help="write every leaf as a .db file")
    p.set_defaults(func=cmd_chase)

    p = sub.add_parser("entail-bcq", help="check whether a database satisfies a conjunctive query")
    p.add_argument("--src", required=True, help="database")
    p.add_argument("--query", required=True, help="query, written as a database")
    p.set_defaults(func=cmd_entail_bcq)

    p = sub.add_parser("compile", help="compile a decider into a rule set")
    p.add_argument("--schema", required=True, help="schema file (name/arity per line)")
    p.add_argument("--tm", required=True, help="decider machine file")
    p.add_argument("--stage", choices=COMPILE_STAGES, default="r5", help="which rule set to write")
    p.add_argument("--non-strict", action="store_true",
                   help="allow schemas with differing predicate counts per arity")
    p.add_argument("-o", "--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("brake", help="apply the emergency brake transformation")
    p.add_argument("--rules", required=True, help="rule file")
    p.add_argument("--halt-rules", help="extra rules appended after the transformation")
    p.add_argument("-o", "--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_brake)

    p = sub.add_parser("remove-disj", help="replace a split by a disjunction-free rule set")
    p.add_argument("--sigma1", required=True, help="disjunctive Datalog part")
    p.add_argument("--sigma2", required=True, help="existential part")
    p.add_argument("--acc-flag", action="store_true", help="also record accepting rule instances")
    p.add_argument("-o", "--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_remove_disj)

    p = sub.add_parser("tm", help="Turing machine utilities")
    tsub = p.add_subparsers(dest="tm_command", metavar="ACTION", parser_class=_Parser)
    r = tsub.add_parser("run", help="run a machine on a word")
    r.add_argument("--tm", required=True, help="machine file")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="tape word, e.g. 'p|1|'")
    g.add_argument("--input-file", help="file holding the tape word")
    r.add_argument("--step-cap", type=int, default=10**6, help="give up after this many steps")
    r.set_defaults(func=cmd_tm_run)

    p = sub.add_parser("serialize", help="write a database as a tape word")
    p.add_argument("--schema", required=True, help="schema file")
    p.add_argument("--db", required=True, help="database file")
    p.add_argument("--random", action="store_true", help="a random valid serialisation instead")
    p.add_argument("--seed", type=int, default=0, help="seed for --random")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("deserialize", help="read a tape word back into a database")
    p.add_argument("--schema", required=True, help="schema file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--word", help="tape word, e.g. 'ed|1|10|'")
    g.add_argument("--word-file", help="file holding the tape word")
    p.add_argument("-o", "--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_deserialize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EX_USAGE
    try:
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as e:
        print(f"chasekit: {e}", file=sys.stderr)
        return EX_USAGE
    except MachineViolation as e:
        print(f"chasekit: {e}", file=sys.stderr)
        return EX_CAP
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"chasekit: cannot read {e.filename or e}", file=sys.stderr)
        return EX_NOINPUT
    except PARSE_ERRORS as e:
        print(f"chasekit: {type(e).__name__}: {e}", file=sys.stderr)
        return EX_DATAERR
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stay quiet
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    sys.exit(main())
