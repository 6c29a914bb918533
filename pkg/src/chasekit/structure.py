"""Check chase leaves of the compiled stages against the intended shapes.

Each leaf is decoded back into the order and completion it guessed, the
expected interpretation is rebuilt by the brute-force constructions in
:mod:`chasekit.oracle`, and the two are compared.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .model import Interpretation, isomorphic
from .oracle import Guess, branch_tape, position_code, r1_models, tree_model
from .querygen import (
    CHI, DBDOM, END, ENC, EQ, FIRST, GOAL, LAST, LEAF, LINK, LT, NEQ, NXT, ROOT,
    CompileContext, cell, head, in_pred, in_tree, load_arity, out_pred, out_tree,
)
from .turing import run_tm

STAGE_ORDER = ("r1", "r2", "r3", "r4", "r5")


class StructuralViolation(AssertionError):
    def __init__(self, clause: str, detail: str):
        super().__init__(f"{clause}: {detail}")
        self.clause = clause
        self.detail = detail


@dataclass
class StructureReport:
    stage: str
    leaves: int = 0
    passed: int = 0
    violations: list = field(default_factory=list)  # (leaf index, clause, detail)
    # stage r1 only: how many oracle models some leaf is isomorphic to
    matched_models: int = 0
    expected_models: int = 0
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        if self.violations:
            return False
        return self.stage != "r1" or self.matched_models == self.expected_models

    def clauses(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for _, clause, _ in self.violations:
            out[clause] += 1
        return dict(out)


def r1_predicates(ctx: CompileContext) -> set[str]:
    preds = {DBDOM, FIRST, LAST, EQ, NEQ, LT}
    for p, _ in ctx.preds():
        preds |= {p, in_pred(p), out_pred(p)}
    return preds


def r2_predicates(ctx: CompileContext) -> set[str]:
    preds = r1_predicates(ctx) | {ROOT, CHI, LEAF, LINK}
    for p, _ in ctx.preds():
        preds |= {in_tree(p), out_tree(p)}
    return preds


def decode_guess(leaf: Interpretation, ctx: CompileContext) -> Guess:
    """Read the ordered partition and completion a leaf committed to.

    Raises StructuralViolation when the leaf is not of that shape.
    """
    dom = sorted(a[1][0] for a in leaf if a[0] == DBDOM)
    eq = {a[1] for a in leaf if a[0] == EQ}
    lt = {a[1] for a in leaf if a[0] == LT}
    for t in dom:
        if (t, t) in lt:
            raise StructuralViolation("r1-order", f"LT cycle through null {t}")
    classes: list[frozenset] = []
    seen: set = set()
    for t in dom:
        if t in seen:
            continue
        cls = frozenset(u for u in dom if (t, u) in eq)
        for u in cls:
            if frozenset(w for w in dom if (u, w) in eq) != cls:
                raise StructuralViolation("r1-order", "Eq is not an equivalence")
        seen |= cls
        classes.append(cls)

    def before(a: frozenset, b: frozenset) -> bool:
        return all((x, y) in lt for x in a for y in b)

    for i, a in enumerate(classes):
        for b in classes[i + 1:]:
            if before(a, b) == before(b, a):
                raise StructuralViolation("r1-order", "LT does not totally order the Eq classes")
    blocks = sorted(classes, key=lambda c: sum(before(c, d) for d in classes), reverse=True)
    firsts = {a[1][0] for a in leaf if a[0] == FIRST}
    lasts = {a[1][0] for a in leaf if a[0] == LAST}
    if firsts != set(blocks[0]) or lasts != set(blocks[-1]):
        raise StructuralViolation("r1-order", "First/Last do not mark the end classes")
    for i, a in enumerate(blocks):
        for b in blocks[i + 1:]:
            for x in a:
                for y in b:
                    if (NEQ, (x, y)) not in leaf or (NEQ, (y, x)) not in leaf:
                        raise StructuralViolation("r1-order", "NEq missing between classes")
    where = {e: i for i, b in enumerate(blocks) for e in b}
    comp = {}
    for p, ar in ctx.preds():
        for args in itertools.product(dom, repeat=ar):
            inn = (in_pred(p), args) in leaf
            out = (out_pred(p), args) in leaf
            if inn == out:
                raise StructuralViolation("r1-completion", f"{p}{args}: need exactly one of in/out")
            idx = tuple(where[a] for a in args)
            if comp.setdefault((p, idx), inn) != inn:
                raise StructuralViolation("r1-completion", f"{p} not uniform on Eq classes")
    alpha = next(iter(firsts))
    omega = next(iter(lasts))
    return Guess(tuple(blocks), tuple(sorted(comp.items())), alpha, omega)


def _depths(leaf: Interpretation) -> dict[int, int]:
    children = defaultdict(list)
    for p, args in leaf:
        if p == CHI:
            children[args[0]].append(args[1])
    roots = [a[1][0] for a in leaf if a[0] == ROOT]
    depth: dict[int, int] = {}
    stack = [(r, 1) for r in roots]
    while stack:
        u, d = stack.pop()
        if u in depth:
            raise StructuralViolation("r2-tree", f"node {u} reached twice")
        depth[u] = d
        stack.extend((v, d + 1) for v in children[u])
    return depth


def _chain(leaf: Interpretation, start: int, stop=None, end_pred: str | None = None,
           limit: int = 100000) -> list[int]:
    nxt: dict[int, list] = defaultdict(list)
    for p, args in leaf:
        if p == NXT:
            nxt[args[0]].append(args[1])
    out = [start]
    cur = start
    while True:
        if cur == stop or (end_pred is not None and (end_pred, (cur,)) in leaf):
            return out
        succ = nxt.get(cur, [])
        if len(succ) != 1:
            raise StructuralViolation("chain", f"cell {cur} has {len(succ)} successors")
        cur = succ[0]
        out.append(cur)
        if len(out) > limit:
            raise StructuralViolation("chain", "chain too long")


def _symbols(leaf: Interpretation, cells: list[int], ctx: CompileContext) -> list[str]:
    by_pred = {cell(a, ctx.tm.blank): a for a in ctx.tm.alphabet}
    have = defaultdict(list)
    for p, args in leaf:
        if p in by_pred and len(args) == 1:
            have[args[0]].append(by_pred[p])
    out = []
    for c in cells:
        syms = have.get(c, [])
        if len(syms) != 1:
            raise StructuralViolation("cell", f"cell {c} carries symbols {sorted(syms)}")
        out.append(syms[0])
    return out


def _check_r3(leaf, ctx, depth) -> None:
    encs = defaultdict(list)
    for p, args in leaf:
        if p == ENC:
            encs[args[0]].append(args[1:])
    for u, d in depth.items():
        if len(encs.get(u, [])) != 1:
            raise StructuralViolation("r3-enc", f"node {u} has {len(encs.get(u, []))} Enc facts")
        s, e = encs[u][0]
        bits = "".join(_symbols(leaf, _chain(leaf, s, stop=e), ctx))
        if bits != position_code(d):
            raise StructuralViolation("r3-enc", f"node at depth {d} spells {bits}, want {position_code(d)}")


def _leaf_tapes(leaf, ctx, depth) -> dict[int, tuple]:
    parent = {args[1]: args[0] for p, args in leaf if p == CHI}
    present = {(p, args) for p, args in leaf}
    by_arity: dict[int, list] = ctx.by_arity
    tapes = {}
    start = load_arity(1)
    qs = head(ctx.tm.initial)
    for u in [a[1][0] for a in leaf if a[0] == LEAF]:
        ts = [args[1] for p, args in leaf if p == start and args[0] == u and args[2] == u
              and (qs, (args[1],)) in present]
        if len(ts) != 1:
            raise StructuralViolation("r4-tape", f"leaf node {u} has {len(ts)} tape starts")
        cells = _chain(leaf, ts[0], end_pred=END)
        got = tuple(_symbols(leaf, cells, ctx))
        branch = [u]
        while branch[-1] in parent:
            branch.append(parent[branch[-1]])

        def holds(p, vec):
            return (in_tree(p), tuple(vec)) in present

        want = branch_tape(branch, depth, holds, by_arity, ctx.tm.blank)
        if got != want:
            raise StructuralViolation("r4-tape", f"leaf node {u}: tape {''.join(got)!r}, want {''.join(want)!r}")
        tapes[u] = got
    return tapes


def structural_validate(outcome, stage: str, ctx: CompileContext, db: Iterable,
                        raise_on_violation: bool = False) -> StructureReport:
    """Check every finished leaf of a chase run on the cumulative stage."""
    if stage not in STAGE_ORDER:
        raise ValueError(f"unknown stage {stage!r}")
    level = STAGE_ORDER.index(stage)
    db = Interpretation(db)
    leaves = list(outcome.leaves)
    kinds = list(getattr(outcome, "leaf_kinds", None) or ["terminated"] * len(leaves))
    report = StructureReport(stage)
    oracle_models = r1_models(db, ctx.schema) if level == 0 else []
    report.expected_models = len(oracle_models)
    matched = [False] * len(oracle_models)
    r1p, r2p = r1_predicates(ctx), r2_predicates(ctx)
    for k, (leaf, kind) in enumerate(zip(leaves, kinds)):
        if kind != "terminated":
            report.notes.append((k, f"skipped {kind} leaf"))
            continue
        report.leaves += 1
        try:
            guess = decode_guess(leaf, ctx)
            if level == 0:
                part = leaf.restrict(r1p)
                hits = [i for i, m in enumerate(oracle_models) if isomorphic(part, m)]
                if not hits:
                    raise StructuralViolation("r1-model", "leaf matches no order/completion model")
                for i in hits:
                    matched[i] = True
            if level >= 1:
                if not isomorphic(leaf.restrict(r2p), tree_model(db, ctx.schema, guess)):
                    raise StructuralViolation("r2-tree", "tree part differs from the expected tree")
                depth = _depths(leaf)
            if level >= 2:
                _check_r3(leaf, ctx, depth)
            if level >= 3:
                tapes = _leaf_tapes(leaf, ctx, depth)
            if level >= 4:
                longest = max(tapes, key=lambda u: depth[u])
                accepted = run_tm(ctx.tm, tapes[longest][:-1]).accepted
                if accepted != ((GOAL, ()) in leaf):
                    raise StructuralViolation("r5-goal", f"Goal present={not accepted}, machine accepts={accepted}")
            report.passed += 1
        except StructuralViolation as e:
            if raise_on_violation:
                raise
            report.violations.append((k, e.clause, e.detail))
    report.matched_models = sum(matched)
    if raise_on_violation and level == 0 and not all(matched):
        raise StructuralViolation("r1-model", f"{matched.count(False)} oracle models have no leaf")
    return report
