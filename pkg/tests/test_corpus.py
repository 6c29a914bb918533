import random
from dataclasses import replace

import pytest

from chasekit.chase import STRATEGIES
from chasekit.corpus import (
    Scenario, ScenarioFailure, fixture_dir, load_scenarios, random_brake_case, random_ground_program,
    random_split, run_scenario,
)
from chasekit.model import parse_db
from chasekit.rules import parse_rules


@pytest.fixture(scope="module")
def scenarios():
    return load_scenarios()


def test_manifest_loads(scenarios):
    assert set(scenarios) == {
        "nonempty-r5", "selfloop-r5", "nonempty-r6", "selfloop-r6", "primes-r5",
        "split-nonempty", "split-selfloop",
    }
    assert not scenarios["selfloop-r5"].strict
    assert scenarios["split-nonempty"].split is not None


def test_expected_verdicts_come_from_the_machine(scenarios):
    assert scenarios["nonempty-r5"].expected == [False, True]
    assert scenarios["nonempty-r6"].expected == [False, True]
    assert scenarios["selfloop-r5"].expected == [True, False, False]
    assert scenarios["primes-r5"].expected == [False, False]
    assert scenarios["split-nonempty"].expected == [False, True]


def test_unknown_stage_is_rejected(scenarios):
    with pytest.raises(ValueError):
        replace(scenarios["nonempty-r5"], stage="r7")


@pytest.mark.parametrize("name", ["split-nonempty", "split-selfloop"])
def test_split_scenarios_pass_everywhere(scenarios, name):
    report = run_scenario(scenarios[name])
    assert report.ok
    assert len(report.runs) == len(scenarios[name].databases) * len(STRATEGIES) * 3


@pytest.mark.parametrize("name", ["nonempty-r5", "nonempty-r6"])
def test_nonempty_scenarios_under_datalog_first(scenarios, name):
    report = run_scenario(scenarios[name], strategies=("datalog-first",))
    assert report.ok
    assert {r.verdict for r in report.runs} == {"ENTAILED", "NOT-ENTAILED"}


def test_selfloop_distinct_nulls_under_datalog_first(scenarios):
    s = scenarios["selfloop-r6"]
    small = Scenario(s.name, s.schema, s.tm, s.databases[1:], s.stage, s.strict, budget=60)
    report = run_scenario(small, strategies=("datalog-first",), seeds=(0,))
    assert report.ok
    assert all(r.status == "Terminated" for r in report.runs)


def test_mismatch_raises(scenarios):
    s = scenarios["split-nonempty"]
    wrong = replace(s, expected=[True, True])
    with pytest.raises(ScenarioFailure) as e:
        run_scenario(wrong, strategies=("fifo",), seeds=(0,))
    assert e.value.database == "empty.db"
    report = run_scenario(wrong, strategies=("fifo",), seeds=(0,), raise_on_failure=False)
    assert len(report.mismatches) == 1


def test_fixture_files_parse():
    base = fixture_dir()
    for path in base.glob("*.db"):
        parse_db(path.read_text())
    for path in list(base.glob("*.sigma1")) + list(base.glob("*.sigma2")):
        parse_rules(path.read_text())


def test_random_generators_are_seeded():
    for make in (random_brake_case, random_split, random_ground_program):
        assert repr(make(random.Random(5))) == repr(make(random.Random(5)))


def test_random_splits_are_well_formed():
    for seed in range(50):
        split, db = random_split(random.Random(seed))
        assert all(not r.is_existential for r in split.sigma1)
        assert all(not r.is_disjunctive for r in split.sigma2)
        assert split.sigma2.head_predicates().isdisjoint(split.sigma1.predicates())
        assert len(db.nulls()) <= 2
