"""Brute-force reference engines used to check the chase and the compiler.

Nothing here is clever on purpose: every function enumerates its search
space directly, so agreement with the optimised code is meaningful.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .hom import find_homomorphism
from .model import Interpretation, isomorphic
from .querygen import (
    DBDOM, EQ, FIRST, LAST, LEAF, LINK, LT, NEQ, ROOT, CHI,
    in_pred, in_tree, out_pred, out_tree,
)
from .rules import RuleSet, Schema
from .turing import (
    SEP, TuringMachine, pred_symbol, random_serialisation, run_tm, serialize_db, STEP_CAP,
)


class StepCapExceeded(RuntimeError):
    pass


class SerialisationDependence(RuntimeError):
    pass


class TooLarge(ValueError):
    pass


# query decision through the machine

@dataclass(frozen=True)
class QueryOracle:
    tm: TuringMachine
    schema: Schema
    step_cap: int = 10**6
    samples: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        missing = [p.name for p in self.schema if pred_symbol(p.name) not in self.tm.alphabet]
        if missing:
            raise ValueError(f"machine alphabet lacks symbols for {missing}")


def _run(o: QueryOracle, word) -> bool:
    res = run_tm(o.tm, word, o.step_cap)
    if res.status == STEP_CAP:
        raise StepCapExceeded(f"no verdict within {o.step_cap} steps")
    return res.accepted


def decide_query_oracle(o: QueryOracle, db: Iterable) -> bool:
    """Run the machine on the canonical serialisation and on random ones."""
    db = Interpretation(db)
    verdict = _run(o, serialize_db(db, o.schema))
    rng = random.Random(o.seed)
    for _ in range(o.samples):
        word = random_serialisation(db, o.schema, rng)
        if _run(o, word) != verdict:
            raise SerialisationDependence(f"verdict differs on serialisation {''.join(word)!r}")
    return verdict


# minimal models of propositional disjunctive programs

def _ground_atoms(rules: RuleSet, db: Iterable) -> list:
    base = set()
    for r in rules:
        for a in r.atoms():
            if a.args:
                raise ValueError(f"rule {r.label} is not variable-free")
            base.add(a.pred)
    for p, args in db:
        if args:
            raise ValueError("database atoms must be nullary")
        base.add(p)
    return sorted(base)


def enumerate_minimal_models(ground: RuleSet, db: Iterable = (), limit: int = 20) -> set:
    """All subset-minimal models of db and ground rules over nullary atoms."""
    db = Interpretation(db)
    base = _ground_atoms(ground, db)
    if len(base) > limit:
        raise TooLarge(f"Herbrand base has {len(base)} atoms, limit is {limit}")
    bit = {p: 1 << k for k, p in enumerate(base)}

    def mask(atoms) -> int:
        m = 0
        for a in atoms:
            m |= bit[a[0]]
        return m

    need = mask(db)
    compiled = [(mask(r.body), [mask(d.atoms) for d in r.disjuncts]) for r in ground]
    minimal: list[int] = []
    for size in range(len(base) + 1):
        for combo in itertools.combinations(range(len(base)), size):
            m = 0
            for k in combo:
                m |= 1 << k
            if m & need != need:
                continue
            if any(mm & m == mm for mm in minimal):
                continue
            if all(b & m != b or any(h & m == h for h in heads) for b, heads in compiled):
                minimal.append(m)
    return {Interpretation((p, ()) for p in base if m & bit[p]) for m in minimal}


def goal_in_all_minimal_models(ground: RuleSet, db: Iterable = (), limit: int = 20) -> bool:
    return all(("Goal", ()) in m for m in enumerate_minimal_models(ground, db, limit))


# homomorphism closure sampling

def random_database(schema: Schema, rng: random.Random, max_nulls: int = 5,
                    max_facts: int = 8, density: float | None = None) -> Interpretation:
    """Random facts over the schema: each possible fact is kept independently."""
    n = rng.randint(1, max_nulls)
    nulls = list(range(1, n + 1))
    possible = [(p.name, args) for p in schema for args in itertools.product(nulls, repeat=p.arity)]
    if density is None:
        density = rng.uniform(0.05, 0.5)
    facts = [f for f in possible if rng.random() < density]
    rng.shuffle(facts)
    return Interpretation(facts[:max_facts])


def random_hom_pair(schema: Schema, rng: random.Random, **kw) -> tuple[Interpretation, Interpretation, dict]:
    """A database, its image under a random collapsing map, and the map."""
    src = random_database(schema, rng, **kw)
    nulls = sorted(src.nulls())
    if not nulls:
        return src, src, {}
    k = rng.randint(1, len(nulls))
    targets = list(range(100, 100 + k))
    h = {n: rng.choice(targets) for n in nulls}
    dst = {(p, tuple(h[a] for a in args)) for p, args in src}
    # an image may carry extra facts; the map stays a homomorphism
    if rng.random() < 0.3:
        extra = random_database(schema, rng, max_nulls=2, max_facts=2)
        dst |= {(p, tuple(100 + a - 1 for a in args)) for p, args in extra if all(100 + a - 1 in targets for a in args)}
    return src, Interpretation(dst), h


@dataclass
class HomClosureReport:
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def hom_closure_check(o: QueryOracle, corpus: Iterable[tuple]) -> HomClosureReport:
    """Flag pairs (D, D') with D -> D' where D is accepted and D' is not."""
    report = HomClosureReport()
    for pair in corpus:
        src, dst = Interpretation(pair[0]), Interpretation(pair[1])
        if find_homomorphism(src, dst) is None:
            raise ValueError("corpus pair without a homomorphism")
        report.checked += 1
        if decide_query_oracle(o, src) and not decide_query_oracle(o, dst):
            report.violations.append((src, dst))
    return report


# order and completion guesses

def ordered_partitions(elements: Sequence, first, last) -> list[list[frozenset]]:
    """Ordered partitions T1..Tk with ``first`` in T1 and ``last`` in Tk."""
    out = []
    elems = list(elements)
    n = len(elems)
    for k in range(1, n + 1):
        for assign in itertools.product(range(k), repeat=n):
            if len(set(assign)) != k:
                continue
            blocks = [frozenset(e for e, b in zip(elems, assign) if b == i) for i in range(k)]
            if first in blocks[0] and last in blocks[-1]:
                out.append(blocks)
    return out


@dataclass(frozen=True)
class Guess:
    """A complete database completion over an ordered partition of the domain."""
    blocks: tuple
    # (predicate, tuple of block indices) -> True for present, False for absent
    completion: tuple
    alpha: int
    omega: int

    def present(self, pred: str, idx: tuple) -> bool:
        return dict(self.completion)[(pred, idx)]


def enumerate_guesses(db: Iterable, schema: Schema) -> list[Guess]:
    db = Interpretation(db)
    nulls = sorted(db.nulls())
    alpha = max(nulls, default=0) + 1
    omega = alpha + 1
    domain = nulls + [alpha, omega]
    out = []
    for blocks in ordered_partitions(domain, alpha, omega):
        where = {e: i for i, b in enumerate(blocks) for e in b}
        forced = {(p, tuple(where[a] for a in args)) for p, args in db}
        slots = [(p.name, idx) for p in schema
                 for idx in itertools.product(range(len(blocks)), repeat=p.arity)]
        free = [s for s in slots if s not in forced]
        for bits in itertools.product((True, False), repeat=len(free)):
            comp = {s: True for s in forced}
            comp.update(zip(free, bits))
            out.append(Guess(tuple(blocks), tuple(sorted(comp.items())), alpha, omega))
    return out


def r1_model(db: Iterable, schema: Schema, g: Guess) -> Interpretation:
    """The order-and-completion interpretation for one guess."""
    db = Interpretation(db)
    blocks = g.blocks
    where = {e: i for i, b in enumerate(blocks) for e in b}
    domain = sorted(where)
    atoms = set(db)
    atoms |= {(DBDOM, (t,)) for t in domain}
    atoms |= {(FIRST, (t,)) for t in blocks[0]}
    atoms |= {(LAST, (t,)) for t in blocks[-1]}
    for t in domain:
        for u in domain:
            if where[t] == where[u]:
                atoms.add((EQ, (t, u)))
            elif where[t] < where[u]:
                atoms |= {(LT, (t, u)), (NEQ, (t, u)), (NEQ, (u, t))}
    comp = dict(g.completion)
    for p in schema:
        for args in itertools.product(domain, repeat=p.arity):
            idx = tuple(where[a] for a in args)
            atoms.add(((in_pred if comp[(p.name, idx)] else out_pred)(p.name), args))
    return Interpretation(atoms)


def r1_models(db: Iterable, schema: Schema) -> list[Interpretation]:
    return [r1_model(db, schema, g) for g in enumerate_guesses(db, schema)]


def count_distinct(models: Iterable) -> int:
    """Number of isomorphism classes."""
    reps: list = []
    for m in models:
        if not any(isomorphic(m, r) for r in reps):
            reps.append(m)
    return len(reps)


# representative tree

def tree_words(k: int) -> list[tuple[int, ...]]:
    """Strictly increasing index words over 1..k that start with 1."""
    out = []
    for size in range(k):
        for rest in itertools.combinations(range(2, k + 1), size):
            out.append((1,) + rest)
    return out


def tree_model(db: Iterable, schema: Schema, g: Guess) -> Interpretation:
    """The stage-two interpretation: the order guess plus its tree."""
    base = r1_model(db, schema, g)
    k = len(g.blocks)
    words = tree_words(k)
    start = max(base.nulls()) + 1
    node = {w: start + i for i, w in enumerate(words)}
    atoms = set(base)
    atoms.add((ROOT, (node[(1,)],)))
    for w in words:
        if len(w) > 1:
            atoms.add((CHI, (node[w[:-1]], node[w])))
        if w[-1] == k:
            atoms.add((LEAF, (node[w],)))
        for x in g.blocks[w[-1] - 1]:
            atoms.add((LINK, (x, node[w])))
    comp = dict(g.completion)
    for p in schema:
        for ws in itertools.product(words, repeat=p.arity):
            idx = tuple(w[-1] - 1 for w in ws)
            pred = in_tree(p.name) if comp[(p.name, idx)] else out_tree(p.name)
            atoms.add((pred, tuple(node[w] for w in ws)))
    return Interpretation(atoms)


# position codes and branch tapes

def position_code(depth: int) -> str:
    """Binary of depth + 1, least significant bit first (the root has depth 1)."""
    return format(depth + 1, "b")[::-1]


def branch_vectors(branch: Sequence, arity: int) -> list[tuple]:
    """Argument vectors in the order the tape rules visit them.

    ``branch`` lists the nodes from the leaf up to the root; the first
    position varies slowest and every position runs from deep to shallow.
    """
    return list(itertools.product(branch, repeat=arity))


def branch_tape(branch: Sequence, depth: dict, present, preds_by_arity: dict,
                blank: str = "_") -> tuple[str, ...]:
    """The initial tape of one leaf, ending with one blank.

    ``present(p, nodes)`` says whether the fact is in the completion.
    Within one arity the tape is vector-major: all predicates of that arity
    are tried for one vector before moving to the next vector.
    """
    out: list[str] = []
    for arity in sorted(preds_by_arity):
        for vec in branch_vectors(branch, arity):
            for p in preds_by_arity[arity]:
                if present(p, vec):
                    out.append(pred_symbol(p))
                    out.append(SEP)
                    for v in vec:
                        out.extend(position_code(depth[v]))
                        out.append(SEP)
    out.append(blank)
    return tuple(out)


def guess_tapes(g: Guess, schema: Schema, preds_by_arity: dict, blank: str = "_") -> dict:
    """Tapes for every leaf word of the tree of a guess, keyed by the word."""
    k = len(g.blocks)
    comp = dict(g.completion)
    tapes = {}
    for w in tree_words(k):
        if w[-1] != k:
            continue
        prefixes = [w[:i] for i in range(len(w), 0, -1)]
        depth = {pw: len(pw) for pw in prefixes}

        def present(p, vec):
            return comp[(p, tuple(pw[-1] - 1 for pw in vec))]

        tapes[w] = branch_tape(prefixes, depth, present, preds_by_arity, blank)
    return tapes


def guess_database(g: Guess, schema: Schema) -> Interpretation:
    """The completed database of a guess, one null per block."""
    comp = dict(g.completion)
    return Interpretation((p, tuple(i + 1 for i in idx)) for (p, idx), v in comp.items() if v)
