import pytest

from chasekit.chase import Caps, Strategy, decide_goal, run_chase
from chasekit.model import Interpretation, parse_db
from chasekit.oracle import QueryOracle, decide_query_oracle, enumerate_guesses, position_code
from chasekit.querygen import (
    ENC, GOAL, ROOT, STAGES, InvalidSchema, generate_stage, head, make_context, stage_only,
    structural_validate,
)
from chasekit.rules import format_rule, input_schema, parse_schema
from chasekit.structure import StructuralViolation
from chasekit.turing import nonempty_machine, selfloop_machine

P = parse_schema("p/1")
ED = parse_schema("ed/2")
# branches that never finish (see test_r1_leaves_cover_every_order_and_completion) are cut here
BRANCH = Caps(max_branch_steps=3000, max_seconds=120)


@pytest.fixture(scope="module")
def ctx():
    return make_context(P, nonempty_machine(P))


def test_r1_rule_count(ctx):
    assert len(generate_stage(ctx, "r1")) == 22
    assert input_schema(generate_stage(ctx, "r1")) == P


def test_goal_rule_reads_accepting_head(ctx):
    r5 = generate_stage(ctx, "r5")
    goal_rules = [r for r in r5 if any(a.pred == GOAL for d in r.disjuncts for a in d.atoms)]
    assert len(goal_rules) == 1
    (r,) = goal_rules
    assert [a.pred for a in r.body] == [head(ctx.tm.accept)]
    assert len(r.body[0].args) == 1


def test_single_root_encoding_rule(ctx):
    r3 = stage_only(ctx, "r3")
    hits = [r for r in r3 if any(a.pred == ENC for a in r.disjuncts[0].atoms)
            and [a.pred for a in r.body] == [ROOT]]
    assert len(hits) == 1
    assert len(hits[0].disjuncts[0].exists) == 2


def test_stages_are_cumulative(ctx):
    prev = set()
    for stage in STAGES:
        now = {format_rule(r) for r in generate_stage(ctx, stage)}
        assert prev < now
        prev = now


def test_invalid_schema_is_rejected():
    bad = parse_schema("p/1\ned/2\nq/2")
    with pytest.raises(InvalidSchema):
        make_context(bad, nonempty_machine(P))


def test_deterministic_output(ctx):
    again = make_context(P, nonempty_machine(P))
    for stage in STAGES:
        assert generate_stage(ctx, stage) == generate_stage(again, stage)


def test_guess_count_matches_orders_times_completions():
    # four ordered partitions of {a, alpha, omega} with alpha first and omega
    # last; p holds on a's block and is free on the others: 1 + 2 * 2 + 4
    db = parse_db("p(a).")
    guesses = enumerate_guesses(db, P)
    assert len(guesses) == 9
    # {alpha, omega}: one block (2 completions) or two blocks (4)
    assert len(enumerate_guesses(Interpretation(), P)) == 6


def test_r1_leaves_cover_every_order_and_completion(ctx):
    db = parse_db("p(a).")
    out = run_chase(generate_stage(ctx, "r1"), db, Strategy("rule-order"))
    assert out.terminated
    report = structural_validate(out, "r1", ctx, db)
    assert report.expected_models == 9
    assert report.matched_models == 9
    # the two extra leaves guess a cyclic order; nothing else is off
    assert len(out.leaves) == 11
    assert report.clauses() == {"r1-order": 2}


def test_r1_on_empty_database_is_exact(ctx):
    out = run_chase(generate_stage(ctx, "r1"), [], Strategy("datalog-first"))
    report = structural_validate(out, "r1", ctx, [], raise_on_violation=True)
    assert report.ok and report.leaves == 6


def test_root_encoding_spells_two():
    assert position_code(1) == "01"
    assert [position_code(d) for d in range(1, 5)] == ["01", "11", "001", "101"]


@pytest.mark.parametrize("stage", ["r2", "r3", "r4", "r5"])
def test_finished_leaves_have_the_intended_shape(ctx, stage):
    db = parse_db("p(a).")
    out = run_chase(generate_stage(ctx, stage), db, Strategy("datalog-first"), BRANCH)
    report = structural_validate(out, stage, ctx, db)
    assert report.ok
    assert report.passed == 9
    assert out.stats.open_branches == 2


def test_goal_in_every_finished_r5_leaf(ctx):
    db = parse_db("p(a).")
    out = run_chase(generate_stage(ctx, "r5"), db, Strategy("datalog-first"), BRANCH)
    finished = [leaf for leaf, kind in zip(out.leaves, out.leaf_kinds) if kind == "terminated"]
    assert len(finished) == 9
    assert all((GOAL, ()) in leaf for leaf in finished)


def test_validator_raises_on_tampered_leaf(ctx):
    db = parse_db("p(a).")
    out = run_chase(generate_stage(ctx, "r3"), db, Strategy("datalog-first"), BRANCH)
    k = out.leaf_kinds.index("terminated")
    leaf = out.leaves[k]
    enc = next(a for a in leaf if a[0] == ENC)
    out.leaves[k] = Interpretation(a for a in leaf if a != enc)
    with pytest.raises(StructuralViolation):
        structural_validate(out, "r3", ctx, db, raise_on_violation=True)


@pytest.mark.parametrize("text", ["", "p(a)."])
def test_r5_expresses_nonempty(ctx, text):
    db = parse_db(text)
    want = decide_query_oracle(QueryOracle(ctx.tm, P), db)
    v = decide_goal(generate_stage(ctx, "r5"), db, Strategy("datalog-first"), Caps(max_seconds=60))
    assert v.status == ("ENTAILED" if want else "NOT-ENTAILED")


def test_r5_expresses_selfloop_on_distinct_nulls():
    ctx = make_context(ED, selfloop_machine(ED), strict=False)
    db = parse_db("ed(a,b).")
    assert not decide_query_oracle(QueryOracle(ctx.tm, ED), db)
    v = decide_goal(generate_stage(ctx, "r5"), db, Strategy("datalog-first"), Caps(max_seconds=60))
    assert v.status == "NOT-ENTAILED"
