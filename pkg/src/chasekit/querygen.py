"""Compile a schema and a decider machine into the staged rule sets.

Stage r1 guesses a linear order and a completion of the database, r2
builds a tree whose branches stand for vectors of the ordered domain, r3
gives every tree node a binary position code, r4 writes one tape per leaf
listing the completed facts, and r5 simulates the machine on those tapes.
Each stage contains the previous one.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import Atom, IDENT
from .rules import Disjunct, Rule, RuleSet, Schema, validate_decider_inputs
from .turing import SEP, TuringMachine, pred_symbol, predicate_order

STAGES = ("r1", "r2", "r3", "r4", "r5")


class InvalidSchema(ValueError):
    pass


# generated predicate names

DBDOM, FIRST, LAST = "$DbDom", "$First", "$Last"
EQ, NEQ, LT = "$Eq", "$NEq", "$LT"
ROOT, CHI, LEAF, LINK = "$Root", "$Chi", "$Leaf", "$Link"
ENC, NXT, CPY, CPY_INC, LDE, END = "$Enc", "$Nxt", "$Cpy", "$CpyInc", "$LdE", "$End"
STP, NXT_PLUS = "$Stp", "$NxtPlus"
GOAL = "Goal"


def in_pred(p: str) -> str:
    return "$In_" + p


def out_pred(p: str) -> str:
    return "$Out_" + p


def in_tree(p: str) -> str:
    return "$InT_" + p


def out_tree(p: str) -> str:
    return "$OutT_" + p


def load_arity(level: int) -> str:
    return f"$Load{level}"


def ready_arity(level: int) -> str:
    return f"$Ready{level}"


def load_pred(p: str) -> str:
    return "$LoadP_" + p


def ready_pred(p: str) -> str:
    return "$ReadyP_" + p


def symbol_ident(sym: str, blank: str = "_") -> str:
    if sym == blank:
        return "blank"
    if sym == SEP:
        return "sep"
    if sym in ("0", "1"):
        return sym
    if sym.startswith("@") and IDENT.match(sym[1:]):
        return "at_" + sym[1:]
    if re.fullmatch(r"[A-Za-z0-9_]+", sym):
        return "s_" + sym
    return "x" + "".join(f"{ord(c):x}" for c in sym)


def cell(sym: str, blank: str = "_") -> str:
    return "$Cell_" + symbol_ident(sym, blank)


def head(state: str) -> str:
    return "$Head_" + state


@dataclass(frozen=True)
class CompileContext:
    schema: Schema
    tm: TuringMachine
    # strict contexts require the same number of predicates for every arity
    strict: bool = True
    by_arity: dict = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        schema = self.schema
        if self.strict and not validate_decider_inputs(schema):
            raise InvalidSchema(f"{schema} needs n > 0 predicates of every arity 1..m")
        if not schema or any(p.arity == 0 for p in schema):
            raise InvalidSchema("schema must be non-empty with no nullary predicates")
        for p in schema:
            if p.name.startswith("$") or not IDENT.match(p.name):
                raise InvalidSchema(f"bad predicate name {p.name!r}")
            if pred_symbol(p.name) not in self.tm.alphabet:
                raise InvalidSchema(f"machine alphabet lacks {pred_symbol(p.name)}")
        for q in self.tm.states:
            if not IDENT.match(q):
                raise InvalidSchema(f"state name {q!r} is not an identifier")
        idents = [symbol_ident(a, self.tm.blank) for a in self.tm.alphabet]
        if len(set(idents)) != len(idents):
            raise InvalidSchema("tape symbols collide after renaming")
        groups: dict[int, list[str]] = {}
        for name in predicate_order(schema):
            groups.setdefault(schema.arity(name), []).append(name)
        object.__setattr__(self, "by_arity", groups)

    @property
    def m(self) -> int:
        return max(p.arity for p in self.schema)

    @property
    def n(self) -> int | None:
        counts = {len(v) for v in self.by_arity.values()}
        return counts.pop() if len(counts) == 1 and len(self.by_arity) == self.m else None

    def preds(self) -> list[tuple[str, int]]:
        return [(p, self.schema.arity(p)) for p in predicate_order(self.schema)]

    def level(self, ell: int) -> list[str]:
        return self.by_arity.get(ell, [])


def _xs(n: int, stem: str = "x") -> list[str]:
    return [f"{stem}{i}" for i in range(1, n + 1)]


def A(pred: str, *args: str) -> Atom:
    return Atom(pred, tuple(args))


def _rule(label: str, body: list, head_atoms: list, exists=()) -> Rule:
    return Rule(tuple(body), (Disjunct(tuple(exists), tuple(head_atoms)),), label)


def _disj(label: str, body: list, *heads: list) -> Rule:
    return Rule(tuple(body), tuple(Disjunct((), tuple(h)) for h in heads), label)


def _short(pred: str) -> str:
    return pred[1:] if pred.startswith("$") else pred


def _r1(ctx: CompileContext) -> list[Rule]:
    preds = ctx.preds()
    out = [
        _rule("create_first", [], [A(FIRST, "y"), A(DBDOM, "y")], ["y"]),
        _rule("create_last", [], [A(LAST, "z"), A(DBDOM, "z")], ["z"]),
    ]
    for p, ar in preds:
        xs = _xs(ar)
        out.append(_rule(f"copy_{p}", [A(p, *xs)], [A(in_pred(p), *xs)] + [A(DBDOM, x) for x in xs]))
    out.append(_rule("dom_eq", [A(DBDOM, "x")], [A(EQ, "x", "x")]))
    out.append(_rule("eq_sym", [A(EQ, "x", "y")], [A(EQ, "y", "x")]))
    out.append(_rule("neq_sym", [A(NEQ, "x", "y")], [A(NEQ, "y", "x")]))
    cong = [(FIRST, 1), (LAST, 1), (EQ, 2), (NEQ, 2), (LT, 2)]
    cong += [(in_pred(p), ar) for p, ar in preds] + [(out_pred(p), ar) for p, ar in preds]
    for r, ar in cong:
        xs = _xs(ar)
        for i in range(ar):
            ys = list(xs)
            ys[i] = "y"
            out.append(_rule(f"cong_{_short(r)}_{i + 1}", [A(r, *xs), A(EQ, xs[i], "y")], [A(r, *ys)]))
    out.append(_disj("eq_or_neq", [A(DBDOM, "x"), A(DBDOM, "y")], [A(EQ, "x", "y")], [A(NEQ, "x", "y")]))
    out.append(_rule("lt_trans", [A(LT, "x", "y"), A(LT, "y", "z")], [A(LT, "x", "z")]))
    out.append(_rule("first_lt", [A(FIRST, "x"), A(NEQ, "x", "y")], [A(LT, "x", "y")]))
    out.append(_rule("lt_last", [A(NEQ, "x", "y"), A(LAST, "y")], [A(LT, "x", "y")]))
    out.append(_disj("lt_choice", [A(NEQ, "x", "y")], [A(LT, "x", "y")], [A(LT, "y", "x")]))
    for p, ar in preds:
        xs = _xs(ar)
        out.append(_disj(f"complete_{p}", [A(DBDOM, x) for x in xs],
                         [A(in_pred(p), *xs)], [A(out_pred(p), *xs)]))
    return out


def _r2(ctx: CompileContext) -> list[Rule]:
    out = [
        _rule("root", [A(FIRST, "x")], [A(ROOT, "u"), A(LINK, "x", "u")], ["u"]),
        _rule("next_rep", [A(LINK, "x", "v"), A(LT, "x", "z")], [A(CHI, "v", "w"), A(LINK, "z", "w")], ["w"]),
        _rule("leaf", [A(LAST, "x"), A(LINK, "x", "u")], [A(LEAF, "u")]),
        _rule("rep_eq", [A(LINK, "x", "u"), A(EQ, "x", "y")], [A(LINK, "y", "u")]),
    ]
    for mk, tree, tag in ((in_pred, in_tree, "in"), (out_pred, out_tree, "out")):
        for p, ar in ctx.preds():
            xs, us = _xs(ar), _xs(ar, "u")
            body = [A(mk(p), *xs)] + [A(LINK, x, u) for x, u in zip(xs, us)]
            out.append(_rule(f"tree_{tag}_{p}", body, [A(tree(p), *us)]))
    return out


def _r3(ctx: CompileContext) -> list[Rule]:
    c0, c1 = cell("0"), cell("1")
    out = [
        _rule("enc_root", [A(ROOT, "u")],
              [A(ENC, "u", "y1", "y2"), A(c0, "y1"), A(NXT, "y1", "y2"), A(c1, "y2")], ["y1", "y2"]),
        _rule("enc_child", [A(ENC, "u", "y1", "ye"), A(CHI, "u", "v")],
              [A(ENC, "v", "z1", "ze"), A(CPY_INC, "y1", "ye", "z1", "ze")], ["z1", "ze"]),
        _rule("inc_last0", [A(CPY_INC, "y1", "y2", "z1", "ze"), A(c0, "y1"), A(NXT, "y1", "y2")],
              [A(c1, "z1"), A(NXT, "z1", "ze"), A(c1, "ze")]),
        _rule("inc_last1", [A(CPY_INC, "y1", "y2", "z1", "ze"), A(c1, "y1"), A(NXT, "y1", "y2")],
              [A(c0, "z1"), A(NXT, "z1", "z2"), A(c0, "z2"), A(NXT, "z2", "ze"), A(c1, "ze")], ["z2"]),
        _rule("inc_next0",
              [A(CPY_INC, "y1", "ye", "z1", "ze"), A(c0, "y1"), A(NXT, "y1", "y2"), A(NXT, "y2", "y3")],
              [A(CPY, "y2", "ye", "z2", "ze"), A(c1, "z1"), A(NXT, "z1", "z2")], ["z2"]),
        _rule("inc_next1",
              [A(CPY_INC, "y1", "ye", "z1", "ze"), A(c1, "y1"), A(NXT, "y1", "y2"), A(NXT, "y2", "y3")],
              [A(CPY_INC, "y2", "ye", "z2", "ze"), A(c0, "z1"), A(NXT, "z1", "z2")], ["z2"]),
    ]
    for bit in "01":
        cb = cell(bit)
        out.append(_rule(f"copy_base{bit}", [A(CPY, "y1", "y2", "z1", "z2"), A(cb, "y1"), A(NXT, "y1", "y2")],
                         [A(cb, "z1"), A(NXT, "z1", "z2"), A(c1, "z2")]))
    for bit in "01":
        cb = cell(bit)
        out.append(_rule(f"copy_rec{bit}",
                         [A(CPY, "y1", "ye", "z1", "ze"), A(cb, "y1"), A(NXT, "y1", "y2"), A(NXT, "y2", "y3")],
                         [A(CPY, "y2", "ye", "z2", "ze"), A(cb, "z1"), A(NXT, "z1", "z2")], ["z2"]))
    return out


def _r4(ctx: CompileContext) -> list[Rule]:
    tm, m = ctx.tm, ctx.m
    sep = cell(SEP, tm.blank)
    out = []
    for p, ar in ctx.preds():
        vs = _xs(ar, "v")
        xs = _xs(ar + 1, "x")
        heads = [A(cell(pred_symbol(p), tm.blank), "t"), A(NXT, "t", "x1")]
        heads += [A(LDE, vs[i], xs[i], xs[i + 1]) for i in range(ar)]
        heads += [A(NXT, xs[-1], "y"), A(ready_pred(p), "u", "y", *vs)]
        out.append(_rule(f"load_{p}", [A(load_pred(p), "u", "t", *vs), A(in_tree(p), *vs)], heads, xs + ["y"]))
    out.append(_rule("encode_block", [A(LDE, "v", "xs", "xe"), A(ENC, "v", "y1", "ye")],
                     [A(sep, "xs"), A(NXT, "xs", "z1"), A(CPY, "y1", "ye", "z1", "ze"),
                      A(NXT, "ze", "xe"), A(sep, "xe")], ["z1", "ze"]))
    out.append(_rule("start_tape", [A(LEAF, "u")], [A(load_arity(1), "u", "t", "u"), A(head(tm.initial), "t")], ["t"]))
    for ell in range(1, m + 1):
        vs = _xs(ell, "v")
        level = ctx.level(ell)
        if not level:
            # only reachable in non-strict contexts: skip an empty arity
            out.append(_rule(f"skip_level{ell}", [A(load_arity(ell), "u", "t", *vs)],
                             [A(ready_arity(ell), "u", "t", *vs)]))
            continue
        out.append(_rule(f"first_pred{ell}", [A(load_arity(ell), "u", "t", *vs)],
                         [A(load_pred(level[0]), "u", "t", *vs)]))
        for j in range(len(level) - 1):
            out.append(_rule(f"next_pred_{level[j]}", [A(ready_pred(level[j]), "u", "t", *vs)],
                             [A(load_pred(level[j + 1]), "u", "t", *vs)]))
        out.append(_rule(f"last_pred{ell}", [A(ready_pred(level[-1]), "u", "t", *vs)],
                         [A(ready_arity(ell), "u", "t", *vs)]))
    for ell in range(1, m + 1):
        vs = _xs(ell, "v")
        for k in range(1, ell + 1):
            body = [A(ready_arity(ell), "u", "t", *vs)]
            body += [A(ROOT, vs[i - 1]) for i in range(k + 1, ell + 1)]
            body.append(A(CHI, "w", vs[k - 1]))
            args = vs[:k - 1] + ["w"] + ["u"] * (ell - k)
            out.append(_rule(f"next_vector{ell}_{k}", body, [A(load_arity(ell), "u", "t", *args)]))
    for ell in range(1, m + 1):
        vs = _xs(ell, "v")
        body = [A(ready_arity(ell), "u", "t", *vs)] + [A(ROOT, v) for v in vs]
        out.append(_rule(f"next_level{ell}", body, [A(load_arity(ell + 1), "u", "t", *(["u"] * (ell + 1)))]))
    vs = _xs(m, "v")
    out.append(_rule("end_tape", [A(ready_arity(m), "u", "t", *vs)] + [A(ROOT, v) for v in vs],
                     [A(cell(tm.blank, tm.blank), "t"), A(END, "t")]))
    for p, ar in ctx.preds():
        vs = _xs(ar, "v")
        out.append(_rule(f"skip_fact_{p}", [A(load_pred(p), "u", "t", *vs), A(out_tree(p), *vs)],
                         [A(ready_pred(p), "u", "t", *vs)]))
    return out


def _r5(ctx: CompileContext) -> list[Rule]:
    tm = ctx.tm
    blank = tm.blank
    out = [
        _rule("accept", [A(head(tm.accept), "x")], [A(GOAL)]),
        _rule("nxt_plus", [A(NXT, "x", "y")], [A(NXT_PLUS, "x", "y")]),
        _rule("nxt_plus_trans", [A(NXT_PLUS, "x", "y"), A(NXT_PLUS, "y", "z")], [A(NXT_PLUS, "x", "z")]),
        _rule("new_nxt", [A(NXT, "x", "y"), A(STP, "x", "z"), A(STP, "y", "w")], [A(NXT, "z", "w")]),
        _rule("add_mem", [A(END, "x"), A(STP, "x", "z")],
              [A(NXT, "z", "v"), A(cell(blank, blank), "v"), A(END, "v")], ["v"]),
    ]
    trans = tm.transitions()
    ident = {a: symbol_ident(a, blank) for a in tm.alphabet}
    for q, a, r, b, d in trans:
        out.append(_rule(f"write_{q}_{ident[a]}", [A(head(q), "x"), A(cell(a, blank), "x")],
                         [A(STP, "x", "z"), A(cell(b, blank), "z")], ["z"]))
    # the memory rules do not depend on the read symbol: one instance per state
    states = list(dict.fromkeys(q for q, *_ in trans))
    for q in states:
        for c in tm.alphabet:
            out.append(_rule(f"keep_right_{q}_{ident[c]}", [A(head(q), "x"), A(NXT_PLUS, "x", "y"), A(cell(c, blank), "y")],
                             [A(STP, "y", "z"), A(cell(c, blank), "z")], ["z"]))
    for q in states:
        for c in tm.alphabet:
            out.append(_rule(f"keep_left_{q}_{ident[c]}", [A(head(q), "x"), A(NXT_PLUS, "y", "x"), A(cell(c, blank), "y")],
                             [A(STP, "y", "z"), A(cell(c, blank), "z")], ["z"]))
    for q, a, r, b, d in trans:
        if d > 0:
            out.append(_rule(f"move_right_{q}_{ident[a]}",
                             [A(head(q), "x"), A(cell(a, blank), "x"), A(STP, "x", "z"), A(NXT, "z", "w")],
                             [A(head(r), "w")]))
    for q, a, r, b, d in trans:
        if d < 0:
            out.append(_rule(f"move_left_{q}_{ident[a]}",
                             [A(head(q), "x"), A(cell(a, blank), "x"), A(STP, "x", "z"), A(NXT, "w", "z")],
                             [A(head(r), "w")]))
    return out


_BUILDERS = {"r1": _r1, "r2": _r2, "r3": _r3, "r4": _r4, "r5": _r5}


def generate_stage(ctx: CompileContext, stage: str) -> RuleSet:
    """The cumulative rule set up to and including ``stage``."""
    if stage not in _BUILDERS:
        raise ValueError(f"unknown stage {stage!r}")
    rules: list[Rule] = []
    for s in STAGES:
        rules += _BUILDERS[s](ctx)
        if s == stage:
            break
    return RuleSet(rules)


def stage_only(ctx: CompileContext, stage: str) -> RuleSet:
    return RuleSet(_BUILDERS[stage](ctx))


def make_context(schema: Schema, tm: TuringMachine, strict: bool = True) -> CompileContext:
    return CompileContext(schema, tm, strict)


def structural_validate(outcome, stage: str, ctx: CompileContext, db, raise_on_violation: bool = False):
    """See :func:`chasekit.structure.structural_validate`."""
    from .structure import structural_validate as check
    return check(outcome, stage, ctx, db, raise_on_violation)
