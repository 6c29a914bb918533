"""Walk through the restricted chase on a few tiny rule sets.

Run with: python3 demos/01_restricted_chase.py
"""
from chasekit.brake import brake_transform
from chasekit.chase import Caps, Strategy, goal_entailed, run_chase
from chasekit.model import format_db, parse_db
from chasekit.rules import format_rules, parse_rules

succ = parse_rules("ed(x,y) -> exists z . ed(y,z).")

# A self-loop already satisfies the rule, so nothing fires.
out = run_chase(succ, parse_db("ed(a,a)."))
print("self-loop:", out.status, "applications =", out.stats.applications)

# A plain edge starts an infinite path; the node cap stops it.
out = run_chase(succ, parse_db("ed(a,b)."), caps=Caps(max_nodes=100))
print("edge:     ", out.status, "after", out.stats.nodes, "nodes")

# Braking: once Halt is derived every remaining trigger is satisfied by the brake.
braked = brake_transform(succ).rules + parse_rules("@stop: ed(x,y) -> Halt().")
print("\nbraked rule set:\n" + format_rules(braked))
out = run_chase(braked, parse_db("ed(a,b)."), caps=Caps(max_nodes=100))
print("braked edge:", out.status, "in", out.stats.nodes, "nodes")

# Disjunction branches the chase; Goal must hold in every leaf.
rs = parse_rules("-> A(); B(). A() -> Goal().")
out = run_chase(rs, [], Strategy("fifo"))
for i, leaf in enumerate(out.leaves, 1):
    print(f"\nleaf {i}:\n{format_db(leaf).rstrip()}")
print("Goal entailed:", goal_entailed(out))
