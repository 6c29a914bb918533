"""Replace a disjunctive first stage with a world-tracking deterministic program.

Run with: python3 demos/03_remove_disjunctions.py
"""
from chasekit.chase import goal_entailed, run_chase
from chasekit.disjfree import Split, remove_disjunctions
from chasekit.model import parse_db
from chasekit.rules import format_rules, parse_rules

split = Split(parse_rules("@guess: a(x) -> b(x); c(x)."),
              parse_rules("@fromb: b(x) -> Goal(). @fromc: c(x) -> Goal()."))
rs = remove_disjunctions(split)
print(f"{len(rs)} rules, none disjunctive:\n")
print(format_rules(rs))

for text in ("a(k).", "a(k). a(j).", ""):
    db = parse_db(text)
    both = run_chase(split.sigma1 + split.sigma2, db)
    one = run_chase(rs, db)
    print(f"db: {text or '(empty)'}  disjunctive chase: {goal_entailed(both)}  "
          f"translated ({len(one.leaves)} leaf): {goal_entailed(one)}")
