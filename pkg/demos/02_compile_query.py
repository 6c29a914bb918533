"""Compile a Turing-machine decider into rules and compare verdicts.

The machine accepts iff the database has at least one p-fact. The compiled
rule set should entail Goal on exactly the databases the machine accepts.

Run with: python3 demos/02_compile_query.py
"""
import time

from chasekit.brake import HALT, build_r6, shadow_map
from chasekit.chase import Caps, Strategy, decide_goal
from chasekit.model import parse_db
from chasekit.oracle import QueryOracle, decide_query_oracle
from chasekit.querygen import generate_stage, make_context
from chasekit.rules import parse_schema
from chasekit.turing import format_word, nonempty_machine, serialize_db

schema = parse_schema("p/1")
ctx = make_context(schema, nonempty_machine(schema))
for stage in ("r1", "r2", "r3", "r4", "r5"):
    print(f"{stage}: {len(generate_stage(ctx, stage))} rules")
r5 = generate_stage(ctx, "r5")
r6 = build_r6(ctx)
print(f"r6 (braked): {len(r6)} rules\n")

for text in ("", "p(a).", "p(a). p(b)."):
    db = parse_db(text)
    want = decide_query_oracle(QueryOracle(ctx.tm, schema), db)
    t = time.perf_counter()
    v = decide_goal(r6, db, Strategy("datalog-first"), Caps(max_seconds=120),
                    defer_on=(HALT, ()), shadows=shadow_map(r5))
    print(f"db: {text or '(empty)'}  tape: {format_word(serialize_db(db, schema))!r}")
    print(f"  machine accepts: {want}; chase says {v.status} "
          f"({v.outcome.status}, {v.outcome.stats.nodes} nodes, {time.perf_counter() - t:.1f}s)")
