import random

import pytest
from hypothesis import given, settings, strategies as st

from chasekit.brake import (
    BRAKE, HALT, REAL, NameCollision, brake_transform, build_r6, halt_rules_for_query, hat, marker,
    shadow_map,
)
from chasekit.chase import NODE_CAP, Caps, Strategy, check_model, run_chase
from chasekit.corpus import random_brake_case
from chasekit.model import Atom, parse_db
from chasekit.querygen import generate_stage, make_context
from chasekit.rules import format_rule, parse_rules, parse_schema
from chasekit.turing import nonempty_machine

SUCC = parse_rules("ed(x,y) -> exists z . ed(y,z).")
STOP = parse_rules("@stop: ed(x,y) -> Halt().")


def test_brake_of_successor_rule():
    out = brake_transform(SUCC).rules
    assert out.labels() == ["brake_init", "brake_halt", "real_ed", "r1_body", "r1_head1"]
    assert format_rule(out["r1_body"]) == \
        "@r1_body: ed(x, y), g_Brake(v) -> g_B_r1_1(y), g_H_ed(y, v), g_Real(y)."
    assert format_rule(out["r1_head1"]) == \
        "@r1_head1: g_B_r1_1(y) -> exists z . g_H_ed(y, z), g_Real(z)."
    assert format_rule(out["real_ed"]) == "@real_ed: g_H_ed(x1, x2), g_Real(x1), g_Real(x2) -> ed(x1, x2)."


def test_brake_of_datalog_rule():
    out = brake_transform(parse_rules("p(x) -> q(x).")).rules
    assert format_rule(out["r1_head1"]) == "@r1_head1: g_B_r1_1(x) -> g_H_q(x)."


def test_brake_of_disjunctive_rule():
    b = brake_transform(parse_rules("p(x) -> exists z . q(x,z); r(x)."))
    assert set(b.markers) == {("r1", 1), ("r1", 2)}
    assert b.markers[("r1", 1)] == (marker("r1", 1), 1)
    assert {"r1_head1", "r1_head2"} <= set(b.rules.labels())
    assert len(b.rules["r1_body"].disjuncts) == 2


def test_names():
    assert hat("ed") == "$H_ed" and marker("r1", 2) == "$B_r1_2"
    assert {BRAKE, REAL, hat("ed"), HALT} <= set(brake_transform(SUCC).rules.predicates())


def test_reserved_names_are_refused():
    with pytest.raises(NameCollision):
        brake_transform(parse_rules("Halt() -> p()."))
    with pytest.raises(NameCollision):
        brake_transform(parse_rules("g_Brake(x) -> p(x)."))


def test_halt_rule_counts():
    for text, n in [("p/1", 4), ("p/1\ned/2", 5), ("a/1\nb/1", 5)]:
        s = parse_schema(text)
        rs = halt_rules_for_query(make_context(s, nonempty_machine(s)))
        assert len(rs) == n
        assert all(r.disjuncts[0].atoms == (Atom(HALT, ()),) for r in rs)


def test_r6_is_brake_plus_halt_rules():
    s = parse_schema("p/1")
    ctx = make_context(s, nonempty_machine(s))
    r6 = build_r6(ctx)
    r5 = generate_stage(ctx, "r5")
    assert len(r6) == len(brake_transform(r5).rules) + 4
    assert set(shadow_map(r5)) == {f"{r.label}_body" for r in r5 if r.is_disjunctive}


def test_brake_rescues_divergent_rule():
    db = parse_db("ed(a,b).")
    assert run_chase(SUCC, db, caps=Caps(max_nodes=100)).status == NODE_CAP
    out = run_chase(brake_transform(SUCC).rules + STOP, db, caps=Caps(max_nodes=100))
    assert out.terminated


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_finished_leaves_restrict_to_models(seed):
    rng = random.Random(seed)
    sigma, halt, db = random_brake_case(rng)
    out = run_chase(brake_transform(sigma).rules + halt, db, Strategy("fifo", seed),
                    Caps(max_nodes=3000, max_seconds=5))
    preds = set(sigma.predicates())
    for leaf, kind in zip(out.leaves, out.leaf_kinds):
        if kind == "terminated":
            assert check_model(leaf.restrict(preds), sigma)


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_chase_below_halt_is_finite(seed):
    rng = random.Random(seed)
    sigma, halt, db = random_brake_case(rng)
    rs = brake_transform(sigma).rules + halt
    out = run_chase(rs, db, Strategy("fifo", seed), Caps(max_nodes=500))
    halted = [n for n in out.tree.walk() if (HALT, ()) in n.delta]
    for node in halted[:3]:
        below = run_chase(rs, node.label, Strategy("fifo", seed), Caps(max_nodes=20000))
        assert below.terminated
