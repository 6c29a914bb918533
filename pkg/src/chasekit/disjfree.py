"""Disjunction removal: simulate a disjunctive Datalog layer with worlds.

A *world* is a null standing for a set of ground atoms. ``Ins_p(a, w, w')``
says that ``w'`` is ``w`` plus ``p(a)``; ``Ins_p(a, w, w)`` says ``p(a)`` is in
``w``. The existential part of a split runs inside every world over the
``Hat_p(a, w)`` copies, and acceptance is aggregated bottom-up: a world
accepts if Goal holds in it or both successor worlds of some disjunctive
rule application accept.
"""
from __future__ import annotations

from dataclasses import dataclass

from .brake import BRAKE, brake_transform, halt_rules_for_query
from .model import Atom, display_pred
from .querygen import GOAL, CompileContext, generate_stage
from .rules import Disjunct, Rule, RuleSet

INIT = "$Init"
DONE = "$Done"
EMPTY = "$Empty"
SUBS = "$Subs"
ACC = "$Acc"
AUX_PREFIX = "$Aux_"


class NotDatalog(ValueError):
    pass


class SplitViolation(ValueError):
    pass


def ins(pred: str) -> str:
    return "$Ins_" + display_pred(pred)


def world_hat(pred: str) -> str:
    return "$Hat_" + display_pred(pred)


def acc_rule(label: str) -> str:
    return f"$Acc_{label}"


@dataclass(frozen=True)
class Split:
    sigma1: RuleSet
    sigma2: RuleSet


def _fresh_pred(taken: set, stem: str) -> str:
    name, k = stem, 0
    while name in taken:
        k += 1
        name = f"{stem}_{k}"
    taken.add(name)
    return name


def _fresh_var(taken: set, stem: str) -> str:
    v, k = stem, 0
    while v in taken:
        k += 1
        v = f"{stem}{k}"
    taken.add(v)
    return v


def _vars_of(atoms) -> list[str]:
    seen: dict[str, None] = {}
    for _, args in atoms:
        for t in args:
            seen.setdefault(t)
    return list(seen)


def normalize_two_disjuncts(rs: RuleSet) -> RuleSet:
    """Rewrite disjunctive Datalog so every head is ``a ∨ b`` with single atoms.

    Single-disjunct heads are duplicated, conjunctive disjuncts are named by
    an auxiliary predicate over their variables, and longer disjunctions are
    chained through auxiliary predicates.
    """
    taken = set(rs.predicates())
    out: list[Rule] = []
    for r in rs:
        if r.is_existential:
            raise NotDatalog(f"rule {r.label!r} has existential variables")
        if not r.is_disjunctive:
            atoms = r.disjuncts[0].atoms
            if len(atoms) == 1:
                out.append(Rule(r.body, (r.disjuncts[0], r.disjuncts[0]), r.label))
            else:
                for j, a in enumerate(atoms, 1):
                    d = Disjunct((), (a,))
                    out.append(Rule(r.body, (d, d), f"{r.label}_{j}"))
            continue
        singles: list[Atom] = []
        for i, d in enumerate(r.disjuncts, 1):
            if len(d.atoms) == 1:
                singles.append(d.atoms[0])
                continue
            args = tuple(_vars_of(d.atoms))
            aux = Atom(_fresh_pred(taken, f"{AUX_PREFIX}{r.label}_d{i}"), args)
            singles.append(aux)
            for j, a in enumerate(d.atoms, 1):
                one = Disjunct((), (a,))
                out.append(Rule((aux,), (one, one), f"{r.label}_d{i}_{j}"))
        body = r.body
        for i in range(len(singles) - 2):
            rest = _vars_of(singles[i + 1:])
            args = tuple(v for v in _vars_of(body) if v in rest)
            aux = Atom(_fresh_pred(taken, f"{AUX_PREFIX}{r.label}_c{i + 1}"), args)
            label = r.label if i == 0 else f"{r.label}_c{i}"
            out.append(Rule(body, (Disjunct((), (singles[i],)), Disjunct((), (aux,))), label))
            body = (aux,)
        label = r.label if len(singles) == 2 else f"{r.label}_c{len(singles) - 2}"
        out.append(Rule(body, (Disjunct((), (singles[-2],)), Disjunct((), (singles[-1],))), label))
    return RuleSet(out)


def fact_like(rs: RuleSet) -> set[str]:
    """Labels of deterministic rules fed only by other such rules.

    Starting from the empty-body rules, a deterministic rule joins when each
    of its body predicates is derived, and only derived by rules already in
    the set. Their inferences are the same in every world, so they are
    computed once and treated like database facts.
    """
    producers: dict[str, set[str]] = {}
    for r in rs:
        for d in r.disjuncts:
            for a in d.atoms:
                producers.setdefault(a.pred, set()).add(r.label)
    chosen: set[str] = set()
    changed = True
    while changed:
        changed = False
        for r in rs:
            if r.label in chosen or r.is_disjunctive:
                continue
            if all(a.pred in producers and producers[a.pred] <= chosen for a in r.body):
                chosen.add(r.label)
                changed = True
    return chosen


def _check_split(split: Split, facts: set[str]) -> None:
    for r in split.sigma1:
        if r.is_existential and r.label not in facts:
            raise SplitViolation(f"first-stage rule {r.label!r} has existentials but is not fact-like")
    for r in split.sigma2:
        if r.is_disjunctive:
            raise SplitViolation(f"second-stage rule {r.label!r} is disjunctive")


def _world_vars(r: Rule | None, *stems: str) -> list[str]:
    taken = set()
    if r is not None:
        taken = set(r.body_vars())
        for d in r.disjuncts:
            taken.update(d.exists)
    return [_fresh_var(taken, s) for s in stems]


def remove_disjunctions(split: Split, acc_flag: bool = False) -> RuleSet:
    """Translate a split into a disjunction-free rule set with the same Goal entailment.

    With ``acc_flag`` the acceptance rules also record which rule and which
    pair of successor worlds made a world accepting (``$Acc_<label>``).
    """
    facts = fact_like(split.sigma1)
    _check_split(split, facts)
    base = RuleSet(r for r in split.sigma1 if r.label not in facts)
    sigma1 = normalize_two_disjuncts(base)
    preds = dict(split.sigma1.predicates())
    preds.update(split.sigma2.predicates())
    preds.update(sigma1.predicates())
    fresh = {INIT, DONE, EMPTY, SUBS, ACC}
    fresh |= {ins(p) for p in preds} | {world_hat(p) for p in preds}
    clash = fresh & set(preds)
    if clash:
        raise SplitViolation(f"input already uses reserved predicates {sorted(clash)}")

    out: list[Rule] = [r for r in split.sigma1 if r.label in facts]
    # only predicates that can hold as facts need collecting: the input
    # predicates and whatever the fact-like rules derive
    heads = split.sigma1.head_predicates() | split.sigma2.head_predicates() | sigma1.head_predicates()
    factual = {p for p in preds if p not in heads}
    factual |= {a.pred for r in out for d in r.disjuncts for a in d.atoms}
    w, w0, w1, w2 = "w", "w0", "w1", "w2"
    out.append(Rule((), (Disjunct((w,), (Atom(INIT, (w,)), Atom(DONE, (w,)), Atom(EMPTY, (w,)))),),
                    "world_init"))
    for p, ar in preds.items():
        xs = tuple(f"x{i}" for i in range(1, ar + 1))
        if p in factual:
            out.append(Rule(
                (Atom(DONE, (w,)), Atom(INIT, (w,)), Atom(p, xs)),
                (Disjunct((w1,), (Atom(ins(p), xs + (w, w1)), Atom(SUBS, (w1, w1)), Atom(INIT, (w1,)))),),
                f"collect_{display_pred(p)}"))
        out.append(Rule(
            (Atom(ins(p), xs + (w0, w1)), Atom(SUBS, (w1, w2))),
            (Disjunct((), (Atom(ins(p), xs + (w2, w2)), Atom(world_hat(p), xs + (w2,)),
                           Atom(SUBS, (w0, w2)))),),
            f"propagate_{display_pred(p)}"))
    out.append(Rule((Atom(EMPTY, (w,)), Atom(SUBS, (w, w1))), (Disjunct((), (Atom(DONE, (w1,)),)),),
                    "world_done"))

    for r in sigma1:
        v, v1, v2 = _world_vars(r, "w", "w1", "w2")
        in_w = tuple(Atom(ins(p), args + (v, v)) for p, args in r.body)
        (a1,), (a2,) = r.disjuncts[0].atoms, r.disjuncts[1].atoms
        for i, (a, vi) in enumerate(((a1, v1), (a2, v2)), 1):
            out.append(Rule(
                (Atom(DONE, (v,)),) + in_w,
                (Disjunct((vi,), (Atom(ins(a.pred), a.args + (v, vi)), Atom(SUBS, (vi, vi)))),),
                f"{r.label}_world{i}"))
        body = (Atom(ins(a1.pred), a1.args + (v, v1)), Atom(ACC, (v1,)),
                Atom(ins(a2.pred), a2.args + (v, v2)), Atom(ACC, (v2,))) + in_w
        head = (Atom(ACC, (v,)),)
        if acc_flag:
            head = (Atom(acc_rule(r.label), (v, v1, v2)),) + head
        out.append(Rule(body, (Disjunct((), head),), f"{r.label}_accept"))

    for r in split.sigma2:
        (v,) = _world_vars(r, "w")
        d = r.disjuncts[0]
        body = (Atom(DONE, (v,)),) + tuple(Atom(world_hat(p), args + (v,)) for p, args in r.body)
        head = tuple(Atom(world_hat(p), args + (v,)) for p, args in d.atoms)
        out.append(Rule(body, (Disjunct(d.exists, head),), f"{r.label}_in_world"))

    out.append(Rule((Atom(world_hat(GOAL), (w,)),), (Disjunct((), (Atom(ACC, (w,)),)),), "goal_accept"))
    out.append(Rule((Atom(INIT, (w,)), Atom(ACC, (w,))), (Disjunct((), (Atom(GOAL, ()),)),), "final_goal"))
    return RuleSet(out)


def pipeline_split(ctx: CompileContext) -> Split:
    """brake(R1) against brake(R5 minus R1) plus the halt rules.

    Rules the two brake outputs share are kept on both sides, except the
    brake null creation, which stays a fact-like first-stage rule.
    """
    r1 = generate_stage(ctx, "r1")
    r5 = generate_stage(ctx, "r5")
    rest = RuleSet(r for r in r5 if r.label not in set(r1.labels()))
    s1 = brake_transform(r1).rules
    s2 = brake_transform(rest).rules
    s2 = RuleSet(r for r in s2 if BRAKE not in {a.pred for d in r.disjuncts for a in d.atoms} or r.body)
    s2 = RuleSet(_prefixed(s2, "s2_")) + halt_rules_for_query(ctx)
    return Split(s1, s2)


def _prefixed(rs: RuleSet, prefix: str) -> list[Rule]:
    return [r.relabel(prefix + r.label) for r in rs]


def build_pipeline(ctx: CompileContext, acc_flag: bool = False) -> RuleSet:
    """The final disjunction-free rule set for the compiled query."""
    return remove_disjunctions(pipeline_split(ctx), acc_flag)
