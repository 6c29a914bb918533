"""Emergency brake: a rule-set transformation that makes the chase stop
once a nullary ``Halt`` fact is derived.

Every derivation goes through hatted copies of the predicates. A rule
match first produces a marker and a copy of the head in which all
existential witnesses collapse onto one shared brake null; only a second
rule creates genuinely fresh nulls. Once ``Halt`` makes the brake null
real, the collapsed copies satisfy every later existential head and no
fresh nulls appear any more.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import Atom, display_pred
from .querygen import FIRST, LAST, LT, CompileContext, generate_stage, in_pred, out_pred
from .rules import Disjunct, Rule, RuleSet

HALT = "Halt"
BRAKE = "$Brake"
REAL = "$Real"
HAT_PREFIX = "$H_"
MARKER_PREFIX = "$B_"


class NameCollision(ValueError):
    pass


def hat(pred: str) -> str:
    return HAT_PREFIX + display_pred(pred)


def marker(label: str, i: int) -> str:
    """Marker predicate for disjunct ``i`` (1-based) of rule ``label``."""
    return f"{MARKER_PREFIX}{label}_{i}"


@dataclass(frozen=True)
class BrakeOutput:
    rules: RuleSet
    hats: dict
    # (rule label, disjunct index) -> (marker predicate, arity)
    markers: dict
    halt: str = HALT


def _hatted(atoms, sub=None) -> list[Atom]:
    sub = sub or {}
    return [Atom(hat(p), tuple(sub.get(t, t) for t in args)) for p, args in atoms]


def _fresh_var(taken: set, stem: str) -> str:
    v, k = stem, 0
    while v in taken:
        k += 1
        v = f"{stem}{k}"
    return v


def _check_names(rs: RuleSet, halt: str) -> None:
    preds = rs.predicates()
    for p in preds:
        if p in (BRAKE, REAL, halt) or p.startswith(HAT_PREFIX) or p.startswith(MARKER_PREFIX):
            raise NameCollision(f"rule set already uses reserved predicate {display_pred(p)}")


def brake_transform(rs: RuleSet, halt: str = HALT) -> BrakeOutput:
    _check_names(rs, halt)
    preds = rs.predicates()
    out = [
        Rule((), (Disjunct(("v",), (Atom(BRAKE, ("v",)),)),), "brake_init"),
        Rule((Atom(halt, ()), Atom(BRAKE, ("x",))), (Disjunct((), (Atom(REAL, ("x",)),)),), "brake_halt"),
    ]
    heads = rs.head_predicates()
    for p, ar in preds.items():
        if p not in heads:
            # p-hat is never derived, so the rule could never fire
            continue
        xs = tuple(f"x{i}" for i in range(1, ar + 1))
        body = (Atom(hat(p), xs),) + tuple(Atom(REAL, (x,)) for x in xs)
        out.append(Rule(body, (Disjunct((), (Atom(p, xs),)),), f"real_{display_pred(p)}"))
    markers = {}
    for r in rs:
        taken = set(r.body_vars())
        for d in r.disjuncts:
            taken.update(d.exists)
        v = _fresh_var(taken, "v")
        heads = []
        for i, d in enumerate(r.disjuncts, 1):
            front = r.frontier(i - 1)
            name = marker(r.label, i)
            markers[(r.label, i)] = (name, len(front))
            collapsed = {y: v for y in d.exists}
            atoms = [Atom(name, tuple(front))] + _hatted(d.atoms, collapsed)
            atoms += [Atom(REAL, (x,)) for x in front]
            heads.append(Disjunct((), tuple(atoms)))
        out.append(Rule(r.body + (Atom(BRAKE, (v,)),), tuple(heads), f"{r.label}_body"))
        for i, d in enumerate(r.disjuncts, 1):
            name, _ = markers[(r.label, i)]
            front = tuple(r.frontier(i - 1))
            atoms = _hatted(d.atoms) + [Atom(REAL, (y,)) for y in d.exists]
            out.append(Rule((Atom(name, front),), (Disjunct(d.exists, tuple(atoms)),), f"{r.label}_head{i}"))
    hats = {p: hat(p) for p in preds}
    return BrakeOutput(RuleSet(out), hats, markers, halt)


def shadow_map(rs: RuleSet) -> dict:
    """Map each split rule of brake(rs) to the rule it came from.

    The split rule's body starts with the original body, so at a split the
    chase can try first the disjunct the original rule already satisfies.
    """
    return {f"{r.label}_body": r for r in rs if r.is_disjunctive}


def halt_rules_for_query(ctx: CompileContext, halt: str = HALT) -> RuleSet:
    """The four rule families that pull the brake on malformed guesses."""
    out = []
    h = (Disjunct((), (Atom(halt, ()),)),)
    for p, ar in ctx.preds():
        xs = tuple(f"x{i}" for i in range(1, ar + 1))
        out.append(Rule((Atom(in_pred(p), xs), Atom(out_pred(p), xs)), h, f"halt_inconsistent_{p}"))
    out.append(Rule((Atom(LT, ("x", "x")),), h, "halt_cycle"))
    out.append(Rule((Atom(LAST, ("x",)), Atom(LT, ("x", "y"))), h, "halt_after_last"))
    out.append(Rule((Atom(LT, ("x", "y")), Atom(FIRST, ("y",))), h, "halt_before_first"))
    return RuleSet(out)


def build_r6(ctx: CompileContext) -> RuleSet:
    """brake(R5) extended with the halt rules."""
    return brake_transform(generate_stage(ctx, "r5")).rules + halt_rules_for_query(ctx)

