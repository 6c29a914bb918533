"""Fixture corpus and end-to-end scenarios.

A scenario names a schema, a decider, a list of databases and the stage to
run. Expected verdicts are never written down: they are computed by running
the decider on each database. Random generators for the property suites
(brake soundness, split equivalence, ground disjunctive programs) live here
as well so tests and demos draw from the same corpus.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .brake import build_r6, shadow_map, HALT
from .chase import (
    STRATEGIES, UNKNOWN, Caps, Strategy, decide_goal, goal_entailed, run_chase, ENTAILED,
)
from .disjfree import Split, remove_disjunctions
from .model import Atom, Interpretation, parse_db
from .oracle import QueryOracle, decide_query_oracle
from .querygen import GOAL, generate_stage, make_context
from .rules import Disjunct, Rule, RuleSet, Schema, parse_rules, parse_schema
from .turing import TuringMachine, parse_tm

STAGES = ("r5", "r6", "split")


class ScenarioFailure(AssertionError):
    def __init__(self, scenario: str, database: str, detail: str):
        super().__init__(f"{scenario} on {database}: {detail}")
        self.scenario = scenario
        self.database = database


def fixture_dir() -> Path:
    return Path(str(resources.files("chasekit") / "fixtures"))


@dataclass
class Scenario:
    name: str
    schema: Schema
    tm: TuringMachine
    databases: list  # (name, Interpretation)
    stage: str
    strict: bool = True
    split: Split | None = None
    budget: float = 120.0  # seconds per chase run
    expected: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if not self.expected:
            oracle = QueryOracle(self.tm, self.schema)
            self.expected = [decide_query_oracle(oracle, db) for _, db in self.databases]


@dataclass
class RunRecord:
    database: str
    strategy: str
    seed: int
    verdict: str
    status: str
    nodes: int
    applications: int
    seconds: float


@dataclass
class ScenarioReport:
    scenario: str
    expected: list
    runs: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def load_scenarios(path: Path | None = None) -> dict[str, Scenario]:
    """Read the flat manifest: name, schema, machine, stage, databases, key=value options."""
    base = fixture_dir() if path is None else Path(path).parent
    path = base / "scenarios.txt" if path is None else Path(path)
    out = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        opts = dict(w.split("=", 1) for w in words if "=" in w)
        name, schema_file, tm_file, stage, *dbs = [w for w in words if "=" not in w]
        split = None
        if "split" in opts:
            stem = opts["split"]
            split = Split(parse_rules((base / f"{stem}.sigma1").read_text()),
                          parse_rules((base / f"{stem}.sigma2").read_text()))
        out[name] = Scenario(
            name=name,
            schema=parse_schema((base / schema_file).read_text()),
            tm=parse_tm((base / tm_file).read_text()),
            databases=[(d, parse_db((base / d).read_text())) for d in dbs],
            stage=stage,
            strict=opts.get("strict", "1") != "0",
            split=split,
            budget=float(opts.get("budget", 120)),
        )
    return out


def scenario_rules(s: Scenario) -> RuleSet:
    if s.stage == "split":
        return remove_disjunctions(s.split)
    ctx = make_context(s.schema, s.tm, s.strict)
    return generate_stage(ctx, "r5") if s.stage == "r5" else build_r6(ctx)


def _verdict(s: Scenario, rs: RuleSet, shadows, db, strategy: Strategy) -> tuple[str, object]:
    caps = Caps(max_nodes=10**9, max_seconds=s.budget)
    if s.stage == "split":
        # the translated rule set is deterministic, so the chase is one branch
        out = run_chase(rs, db, strategy, caps, record_tree=False)
        if not out.terminated:
            return UNKNOWN, out
        return (ENTAILED if goal_entailed(out) else "NOT-ENTAILED"), out
    defer = (HALT, ()) if s.stage == "r6" else None
    v = decide_goal(rs, db, strategy, caps, defer_on=defer, shadows=shadows)
    return v.status, v.outcome


def run_scenario(s: Scenario, strategies=STRATEGIES, seeds=(0, 1, 2),
                 raise_on_failure: bool = True) -> ScenarioReport:
    """Run every database under every strategy and seed against the oracle verdict."""
    rs = scenario_rules(s)
    shadows = None
    if s.stage == "r6":
        shadows = shadow_map(generate_stage(make_context(s.schema, s.tm, s.strict), "r5"))
    report = ScenarioReport(s.name, list(s.expected))
    for (name, db), want in zip(s.databases, s.expected):
        for kind in strategies:
            for seed in seeds:
                t = time.perf_counter()
                verdict, out = _verdict(s, rs, shadows, db, Strategy(kind, seed))
                rec = RunRecord(name, kind, seed, verdict, out.status, out.stats.nodes,
                                out.stats.applications, time.perf_counter() - t)
                report.runs.append(rec)
                if verdict != (ENTAILED if want else "NOT-ENTAILED"):
                    report.mismatches.append(rec)
                    if raise_on_failure:
                        raise ScenarioFailure(s.name, name, f"{kind}/{seed}: chase says {verdict}, "
                                                            f"oracle says {'accept' if want else 'reject'}")
    return report


# random corpora

def _atom(rng: random.Random, preds: list, pool: list) -> Atom:
    p, ar = rng.choice(preds)
    return Atom(p, tuple(rng.choice(pool) for _ in range(ar)))


def random_rule_set(rng: random.Random, preds=(("p", 1), ("q", 2)), max_rules: int = 3,
                    disjunctive: bool = True) -> RuleSet:
    """Small disjunctive existential rules, possibly non-terminating."""
    preds = list(preds)
    rules = []
    for k in range(rng.randint(1, max_rules)):
        body = [_atom(rng, preds, ["x", "y"]) for _ in range(rng.randint(1, 2))]
        bvars = sorted({t for a in body for t in a.args})
        heads = []
        for _ in range(rng.choice([1, 1, 2]) if disjunctive else 1):
            exists = ["z"] if rng.random() < 0.5 else []
            atoms = [_atom(rng, preds, bvars + exists) for _ in range(rng.randint(1, 2))]
            used = {t for a in atoms for t in a.args}
            exists = [z for z in exists if z in used]
            heads.append(Disjunct(tuple(exists), tuple(atoms)))
        rules.append(Rule(tuple(body), tuple(heads), f"r{k + 1}"))
    return RuleSet(rules)


def random_brake_case(rng: random.Random) -> tuple[RuleSet, RuleSet, Interpretation]:
    """(sigma, extra halt rules, database) for the brake soundness property."""
    sigma = random_rule_set(rng)
    halt = []
    if rng.random() < 0.7:
        p, ar = rng.choice([("p", 1), ("q", 2)])
        xs = tuple(f"x{i}" for i in range(ar))
        halt.append(Rule((Atom(p, xs),), (Disjunct((), (Atom(HALT, ()),)),), "stop"))
    db = set()
    for _ in range(rng.randint(1, 3)):
        db.add(_atom(rng, [("p", 1), ("q", 2)], [1, 2]))
    return sigma, RuleSet(halt), Interpretation(db)


def random_split(rng: random.Random) -> tuple[Split, Interpretation]:
    """A tiny split where the second stage cannot feed the first.

    The first stage has at most two two-disjunct Datalog rules over ``a``
    and ``b`` reading input ``e``. The second stage reads anything and
    writes only ``g``, ``h`` and Goal, each rule only reading predicates
    written by earlier ones, so it terminates on every database.
    """
    first = [("a", 1), ("b", 2)]
    inputs = [("e", 1), ("f", 2)]
    s1 = []
    for k in range(rng.randint(0, 2)):
        body = [_atom(rng, inputs + first, ["x", "y"]) for _ in range(rng.randint(1, 2))]
        bvars = sorted({t for a in body for t in a.args})
        heads = tuple(Disjunct((), (_atom(rng, first, bvars),)) for _ in range(2))
        s1.append(Rule(tuple(body), heads, f"d{k + 1}"))
    readable = inputs + first
    s2 = []
    outs = [("g", 1), ("h", 2)]
    for k in range(rng.randint(1, 2)):
        body = [_atom(rng, readable, ["x", "y"]) for _ in range(rng.randint(1, 2))]
        bvars = sorted({t for a in body for t in a.args})
        if k == 1 or rng.random() < 0.4:
            head = Disjunct((), (Atom(GOAL, ()),))
        else:
            target = rng.choice(outs)
            exists = ["z"] if rng.random() < 0.5 else []
            head_atom = _atom(rng, [target], bvars + exists)
            exists = [z for z in exists if z in head_atom.args]
            head = Disjunct(tuple(exists), (head_atom,))
            readable = readable + [target]
        s2.append(Rule(tuple(body), (head,), f"e{k + 1}"))
    if not any(r.disjuncts[0].atoms[0].pred == GOAL for r in s2):
        body = [_atom(rng, readable, ["x"])]
        s2.append(Rule(tuple(body), (Disjunct((), (Atom(GOAL, ()),)),), "goal"))
    db = {_atom(rng, inputs, [1, 2]) for _ in range(rng.randint(1, 2))}
    return Split(RuleSet(s1), RuleSet(s2)), Interpretation(db)


def random_ground_program(rng: random.Random, base_size: int | None = None,
                          max_rules: int = 8) -> RuleSet:
    """A variable-free disjunctive Datalog program over nullary atoms."""
    n = base_size or rng.randint(2, 11)
    atoms = [f"A{i}" for i in range(n)] + [GOAL]
    rules = []
    for k in range(rng.randint(1, max_rules)):
        body = rng.sample(atoms[:-1], rng.randint(0, min(2, n)))
        heads = []
        for _ in range(rng.choice([1, 1, 2, 2, 3])):
            heads.append(Disjunct((), tuple(Atom(a, ()) for a in rng.sample(atoms, rng.randint(1, 2)))))
        rules.append(Rule(tuple(Atom(a, ()) for a in body), tuple(heads), f"g{k + 1}"))
    return RuleSet(rules)
