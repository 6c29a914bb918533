import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from chasekit.cli import build_parser, main
from chasekit.corpus import fixture_dir
from chasekit.rules import parse_rules

GOLDEN = Path(__file__).parent / "golden"
FIX = fixture_dir()


@pytest.fixture
def files(tmp_path):
    def write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_entail_examples(capsys, files):
    rules = files("g.rules", "p(x) -> Goal().")
    code, out, _ = run(capsys, "entail", "--rules", rules, "--db", files("a.db", "p(a)."))
    assert code == 0 and out.startswith("status=ENTAILED ")
    assert run(capsys, "entail", "--rules", rules, "--db", files("e.db", ""))[0] == 1
    succ = files("s.rules", "ed(x,y) -> exists z . ed(y,z).")
    code, out, _ = run(capsys, "entail", "--rules", succ, "--db", files("ab.db", "ed(a,b)."),
                       "--max-nodes", "50")
    assert code == 2 and out.startswith("status=CAP-EXCEEDED ")


def test_status_line_fields(capsys, files):
    _, out, _ = run(capsys, "entail", "--rules", files("g.rules", "p(x) -> Goal()."),
                    "--db", files("a.db", "p(a)."))
    fields = dict(kv.split("=") for kv in out.split())
    assert set(fields) == {"status", "nodes", "steps", "depth", "ms"}
    assert fields["nodes"] == "2" and fields["steps"] == "1"


def test_entail_early_stop_and_jobs(capsys, files):
    rules = files("d.rules", "-> A(); B(). A() -> Goal(). B() -> Goal().")
    empty = files("e.db", "")
    assert run(capsys, "entail", "--rules", rules, "--db", empty, "--early-stop")[0] == 0
    assert run(capsys, "entail", "--rules", rules, "--db", empty, "--jobs", "2")[0] == 0
    assert run(capsys, "entail", "--rules", rules, "--db", empty, "--jobs", "0")[0] == 64


def test_error_exit_codes(capsys, files):
    db = files("a.db", "p(a).")
    assert run(capsys, "entail", "--rules", "/nonexistent.rules", "--db", db)[0] == 66
    code, _, err = run(capsys, "entail", "--rules", files("bad.rules", "p(x) q(x)."), "--db", db)
    assert code == 65 and "ParseError" in err
    assert run(capsys, "entail", "--rules", files("g.rules", "p(x) -> Goal()."),
               "--db", files("bad.db", "p(a b)."))[0] == 65
    with pytest.raises(SystemExit) as e:
        main(["entail", "--bogus"])
    assert e.value.code == 64
    assert main([]) == 64


def test_chase_exports(capsys, files, tmp_path):
    rules = files("d.rules", "-> A(); B().")
    tree, leaves = tmp_path / "t.json", tmp_path / "leaves"
    code, _, _ = run(capsys, "chase", "--rules", rules, "--db", files("e.db", ""),
                     "--emit-tree", str(tree), "--emit-leaves", str(leaves))
    assert code == 1
    assert len(json.loads(tree.read_text())["children"]) == 2
    assert sorted(p.name for p in leaves.iterdir()) == ["leaf00001.db", "leaf00002.db"]
    assert (leaves / "leaf00001.db").read_text() == "# terminated\nA().\n"


def test_entail_bcq(capsys, files):
    src = files("s.db", "ed(a,b). ed(b,a).")
    assert run(capsys, "entail-bcq", "--src", src, "--query", files("q.db", "ed(u,v). ed(v,u)."))[1] == "true\n"
    assert run(capsys, "entail-bcq", "--src", src, "--query", files("q2.db", "ed(u,u)."))[0] == 1


def _compile(capsys, stage, *extra):
    code, out, _ = run(capsys, "compile", "--schema", str(FIX / "nonempty.schema"),
                       "--tm", str(FIX / "nonempty.tm"), "--stage", stage, *extra)
    assert code == 0
    return out


def test_compile_stages(capsys):
    r1 = _compile(capsys, "r1")
    assert len(parse_rules(r1)) == 22
    header = [line for line in r1.splitlines() if line.startswith("#")]
    assert header[0].startswith("# chasekit ") and "# stage: r1" in header
    assert any(line.startswith("# schema-sha256: ") for line in header)
    assert any(line.startswith("# tm-sha256: ") for line in header)
    r6 = parse_rules(_compile(capsys, "r6"))
    assert any(a.pred == "Halt" for r in r6 for d in r.disjuncts for a in d.atoms)
    assert ";" not in _compile(capsys, "final")


def test_compile_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.rules", tmp_path / "b.rules"
    _compile(capsys, "final", "-o", str(a))
    _compile(capsys, "final", "-o", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_compile_invalid_schema(capsys, files):
    code, _, err = run(capsys, "compile", "--schema", files("bad.schema", "p/1\nq/1\ned/2\n"),
                       "--tm", str(FIX / "nonempty.tm"))
    assert code == 65 and "InvalidSchema" in err


def test_brake_and_remove_disj(capsys, files):
    code, out, _ = run(capsys, "brake", "--rules", files("s.rules", "ed(x,y) -> exists z . ed(y,z)."),
                       "--halt-rules", files("h.rules", "@stop: ed(x,y) -> Halt()."))
    assert code == 0 and len(parse_rules(out)) == 6
    code, out, _ = run(capsys, "remove-disj", "--sigma1", str(FIX / "split_nonempty.sigma1"),
                       "--sigma2", str(FIX / "split_nonempty.sigma2"))
    assert code == 0 and ";" not in out.split("\n", 3)[-1]


def test_tm_and_serialisation(capsys):
    code, out, _ = run(capsys, "tm", "run", "--tm", str(FIX / "nonempty.tm"), "--input", "p|1|")
    assert code == 0 and out.startswith("status=Accept")
    assert run(capsys, "tm", "run", "--tm", str(FIX / "nonempty.tm"), "--input", "")[0] == 1
    code, out, _ = run(capsys, "serialize", "--schema", str(FIX / "selfloop.schema"),
                       "--db", str(FIX / "ed_ab.db"))
    assert out == "@ed|1|10|\n"
    code, out, _ = run(capsys, "deserialize", "--schema", str(FIX / "selfloop.schema"),
                       "--word", "ed|1|10|")
    assert out == "ed(n1, n2).\n"
    assert run(capsys, "deserialize", "--schema", str(FIX / "selfloop.schema"), "--word", "ed|1|")[0] == 65


def _help_text(*argv) -> str:
    env = dict(os.environ, COLUMNS="80")
    res = subprocess.run([sys.executable, "-m", "chasekit.cli", *argv, "--help"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0
    return res.stdout


HELP = [((), "main"), (("entail",), "entail"), (("chase",), "chase"),
        (("entail-bcq",), "entail-bcq"), (("compile",), "compile"), (("brake",), "brake"),
        (("remove-disj",), "remove-disj"), (("tm",), "tm"), (("tm", "run"), "tm_run"),
        (("serialize",), "serialize"), (("deserialize",), "deserialize")]


@pytest.mark.parametrize("argv,name", HELP)
def test_help_matches_golden(argv, name):
    assert _help_text(*argv) == (GOLDEN / f"help_{name}.txt").read_text()


def test_help_lists_every_flag():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0]
    for name, p in sub.choices.items():
        text = p.format_help()
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "chasekit.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("chasekit ")
