import json
import random

import pytest
from hypothesis import given, strategies as st

from chasekit.chase import (
    NODE_CAP, STEP_CAP, STRATEGIES, TERMINATED, TIME_CAP, Caps, ChaseOutcome, NotTerminated,
    PreconditionViolated, Stats, Strategy, check_model, decide_goal, default_max_nodes,
    goal_entailed, is_applicable, parallel_chase, run_chase, tree_json,
)
from chasekit.corpus import random_ground_program, random_rule_set
from chasekit.model import Interpretation, parse_db
from chasekit.oracle import goal_in_all_minimal_models
from chasekit.rules import parse_rules

SUCC = parse_rules("ed(x,y) -> exists z . ed(y,z).")
EQ_SPLIT = parse_rules("dbdom(x), dbdom(y) -> eq(x,y); neq(x,y).")
TWO_LEVEL = parse_rules(
    "a(x) -> exists y . b(x,y); c(x).\n"
    "b(x,y) -> exists z . d(y,z); e(y).\n"
    "c(x) -> exists u . f(x,u).\n"
    "d(y,z) -> g(z); h(z).")


def test_is_applicable_examples():
    (r,) = SUCC
    assert not is_applicable(r, {"x": 1, "y": 1}, parse_db("ed(a,a)."))
    assert is_applicable(r, {"x": 1, "y": 2}, parse_db("ed(a,b)."))
    (s,) = EQ_SPLIT
    i = Interpretation([("dbdom", (1,)), ("eq", (1, 1))])
    assert not is_applicable(s, {"x": 1, "y": 1}, i)


def test_is_applicable_precondition():
    (r,) = SUCC
    with pytest.raises(PreconditionViolated):
        is_applicable(r, {"x": 1}, parse_db("ed(a,b)."))
    with pytest.raises(PreconditionViolated):
        is_applicable(r, {"x": 2, "y": 1}, parse_db("ed(a,b)."))


def test_nullary_disjunction_gives_two_leaves():
    out = run_chase(parse_rules("-> A(); B()."), [])
    assert out.status == TERMINATED
    assert [c.delta for c in out.tree.children] == [(("A", ()),), (("B", ()),)]
    assert out.leaves == [Interpretation([("A", ())]), Interpretation([("B", ())])]


def test_satisfied_head_means_no_application():
    out = run_chase(SUCC, parse_db("ed(a,a)."))
    assert out.status == TERMINATED
    assert out.stats.applications == 0 and out.stats.nodes == 1


def test_divergent_rule_hits_node_cap():
    out = run_chase(SUCC, parse_db("ed(a,b)."), caps=Caps(max_nodes=100))
    assert out.status == NODE_CAP
    assert not out.terminated
    with pytest.raises(NotTerminated):
        goal_entailed(out)


def test_step_and_time_caps():
    assert run_chase(SUCC, parse_db("ed(a,b)."), caps=Caps(max_steps=10)).status == STEP_CAP
    out = run_chase(SUCC, parse_db("ed(a,b)."), caps=Caps(max_seconds=0.05), record_tree=False)
    assert out.status == TIME_CAP


def test_env_overrides_default_node_cap(monkeypatch):
    monkeypatch.setenv("CHASEKIT_MAX_NODES", "7")
    assert default_max_nodes() == 7
    assert run_chase(SUCC, parse_db("ed(a,b).")).stats.nodes == 8


def _outcome(leaves):
    leaves = [Interpretation(x) for x in leaves]
    stats = Stats(leaves=len(leaves), goal_leaves=sum(("Goal", ()) in x for x in leaves))
    return ChaseOutcome(TERMINATED, None, leaves, stats, [("Goal", ()) in x for x in leaves])


def test_goal_entailed_examples():
    assert goal_entailed(_outcome([[("Goal", ())], [("Goal", ()), ("A", ())]]))
    assert not goal_entailed(_outcome([[("Goal", ())], [("A", ())]]))
    rs = parse_rules("-> A(); B(). A() -> Goal(). B() -> Goal().")
    assert goal_entailed(run_chase(rs, []))
    assert goal_in_all_minimal_models(rs)


def test_check_model_examples():
    rs = parse_rules("dbdom(x) -> eq(x,x).")
    assert check_model(Interpretation([("eq", (1, 1))]), rs)
    assert not check_model(Interpretation([("dbdom", (1,))]), rs)


def test_repeated_variable_in_later_join_step():
    # d is derived after h, so the join starts from h and must check x = x after binding
    rs = parse_rules("@mk: s(w) -> d(w).\n@use: d(w), h(x,x,w) -> Goal().")
    assert goal_entailed(run_chase(rs, parse_db("s(c). h(a,a,c)."), Strategy("fifo")))
    assert not goal_entailed(run_chase(rs, parse_db("s(c). h(a,b,c)."), Strategy("fifo")))


def test_tree_json_shape():
    out = run_chase(parse_rules("-> A(); B()."), [])
    tree = json.loads(tree_json(out.tree))
    assert tree["applied_rule"] == "r1" and tree["substitution"] == {}
    assert [c["label_delta"] for c in tree["children"]] == [["A()"], ["B()"]]
    assert tree["children"][0]["leaf"] == "terminated"


def _check_tree(rs, out):
    used = set()
    for node in out.tree.walk():
        if node.parent is not None:
            assert node.parent.label <= node.label
            new = node.label.nulls() - node.parent.label.nulls()
            assert not new & used
            used |= new
        if node.applied:
            label, s = node.applied
            rule = rs[label]
            assert is_applicable(rule, s, node.label)
            if out.status == TERMINATED:
                assert len(node.children) == len(rule.disjuncts)
            for child, d in zip(node.children, rule.disjuncts):
                fresh = child.label.nulls() - node.label.nulls()
                assert len(fresh) == len(d.exists)


def test_tree_properties_on_fixed_rules():
    for kind in STRATEGIES:
        out = run_chase(TWO_LEVEL, parse_db("a(k). a(j)."), Strategy(kind))
        assert out.terminated
        _check_tree(TWO_LEVEL, out)
        assert all(check_model(leaf, TWO_LEVEL) for leaf in out.leaves)


@given(st.integers(0, 10**6), st.sampled_from(STRATEGIES))
def test_tree_properties_on_random_rules(seed, kind):
    rng = random.Random(seed)
    rs = random_rule_set(rng)
    db = Interpretation([("p", (1,)), ("q", (1, 2))])
    out = run_chase(rs, db, Strategy(kind, seed), Caps(max_nodes=400))
    _check_tree(rs, out)
    if out.terminated:
        assert all(check_model(leaf, rs) for leaf in out.leaves)


@given(st.integers(0, 10**6))
def test_entailment_is_strategy_independent(seed):
    rs = random_ground_program(random.Random(seed))
    verdicts = {goal_entailed(run_chase(rs, [], Strategy(kind, s)))
                for kind in STRATEGIES for s in range(3)}
    assert verdicts == {goal_in_all_minimal_models(rs)}


def test_decide_goal_matches_full_chase():
    rs = parse_rules("-> A(); B(). A() -> Goal(). B() -> C(); Goal().")
    assert decide_goal(rs, []).status == "NOT-ENTAILED"
    rs = parse_rules("-> A(); B(). A() -> Goal(). B() -> Goal().")
    assert decide_goal(rs, []).status == "ENTAILED"
    assert decide_goal(SUCC, parse_db("ed(a,b)."), caps=Caps(max_nodes=50)).status == "UNKNOWN"


def _strip(out):
    out.stats.seconds = 0
    return tree_json(out.tree), out.leaves, out.stats, out.leaf_kinds, out.status


@pytest.mark.parametrize("kind", STRATEGIES)
def test_parallel_run_is_identical(kind):
    db = parse_db("a(k). a(j).")
    for seed in range(3):
        one = run_chase(TWO_LEVEL, db, Strategy(kind, seed))
        many = parallel_chase(TWO_LEVEL, db, Strategy(kind, seed), jobs=2)
        assert _strip(one) == _strip(many)


def test_parallel_without_split_falls_back():
    out = parallel_chase(SUCC, parse_db("ed(a,a)."), jobs=4)
    assert out.status == TERMINATED and out.stats.nodes == 1
