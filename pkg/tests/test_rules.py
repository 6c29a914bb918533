import random

import pytest
from hypothesis import given, strategies as st

from chasekit.brake import brake_transform, build_r6
from chasekit.corpus import random_rule_set
from chasekit.disjfree import build_pipeline
from chasekit.model import Atom
from chasekit.querygen import generate_stage, make_context
from chasekit.rules import (
    ParseError, RuleSet, Schema, ValidationError, format_rules, format_schema, input_schema,
    parse_rules, parse_schema, validate_decider_inputs,
)
from chasekit.turing import nonempty_machine, selfloop_machine


def test_parse_existential_rule():
    rs = parse_rules("ed(x,y) -> exists z . ed(y,z).")
    assert len(rs) == 1
    (r,) = rs
    assert len(r.disjuncts) == 1
    assert r.disjuncts[0].exists == ("z",)
    assert r.label == "r1"


def test_parse_empty_body_rule():
    (r,) = parse_rules("-> exists y . first(y), dbdom(y).")
    assert r.body == ()
    assert r.disjuncts[0].atoms == (Atom("first", ("y",)), Atom("dbdom", ("y",)))


def test_existential_clashing_with_body_is_rejected():
    with pytest.raises(ValidationError):
        parse_rules("p(x) -> exists x . q(x).")


def test_parse_labels_and_disjunction():
    rs = parse_rules("@split: dbdom(x), dbdom(y) -> eq(x, y); neq(x, y).\n@g: A() -> Goal().")
    assert rs.labels() == ["split", "g"]
    assert rs["split"].is_disjunctive and rs["g"].is_datalog


def test_parse_error_position():
    with pytest.raises(ParseError) as e:
        parse_rules("p(x) -> q(x).\np(x) q(x).")
    assert e.value.line == 2


def test_unbound_head_variable_is_rejected():
    with pytest.raises(ValidationError):
        parse_rules("p(x) -> q(y).")


def test_duplicate_labels_and_arity_clash():
    with pytest.raises(ValidationError):
        parse_rules("@a: p(x) -> q(x). @a: q(x) -> p(x).")
    with pytest.raises(ValidationError):
        parse_rules("p(x) -> p(x, x).")


def test_input_schema_examples():
    assert input_schema(parse_rules("p(x) -> q(x).")) == Schema([("p", 1)])
    assert input_schema(parse_rules("p(x) -> q(x). q(x) -> p(x).")) == Schema()
    s = parse_schema("p/1")
    r1 = generate_stage(make_context(s, nonempty_machine(s)), "r1")
    assert input_schema(r1) == s


def test_validate_decider_inputs_examples():
    assert validate_decider_inputs(parse_schema("p/1\ned/2"))
    assert not validate_decider_inputs(parse_schema("p/1\nq/1\ned/2"))
    assert not validate_decider_inputs(parse_schema("c/0"))
    assert not validate_decider_inputs(Schema())


def test_schema_round_trip():
    s = parse_schema("p/1\n# comment\ned / 2\n")
    assert format_schema(s) == "p/1\ned/2\n"


def _generated_rule_sets():
    p = parse_schema("p/1")
    ed = parse_schema("ed/2")
    ctx_p = make_context(p, nonempty_machine(p))
    ctx_e = make_context(ed, selfloop_machine(ed), strict=False)
    for ctx in (ctx_p, ctx_e):
        for stage in ("r1", "r2", "r3", "r4", "r5"):
            yield generate_stage(ctx, stage)
        yield build_r6(ctx)
    yield build_pipeline(ctx_p)


def test_generated_rule_sets_round_trip():
    for rs in _generated_rule_sets():
        again = parse_rules(format_rules(rs))
        assert again == rs
        assert not set(p.name for p in input_schema(rs)) & rs.head_predicates()


@given(st.integers(0, 10**6))
def test_random_rule_sets_round_trip(seed):
    rs = random_rule_set(random.Random(seed))
    assert parse_rules(format_rules(rs)) == rs
    braked = brake_transform(rs).rules
    assert parse_rules(format_rules(braked)) == braked
    assert not set(p.name for p in input_schema(rs)) & rs.head_predicates()


def test_ruleset_concatenation_keeps_order():
    a = parse_rules("@a: p(x) -> q(x).")
    b = parse_rules("@b: q(x) -> r(x).")
    assert (a + b).labels() == ["a", "b"]
    assert isinstance(a + b, RuleSet)
