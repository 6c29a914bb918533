"""Deterministic Turing machines, database serialisations and the tape fact order.

Tape symbols are strings: ``0``, ``1``, ``|`` (the block separator), the
blank (``_`` by default), ``@name`` for each schema predicate, and any
extra work symbols a machine wants.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .model import Interpretation, canonicalize
from .rules import Schema

SEP = "|"
LEFT, RIGHT = -1, 1

ACCEPT = "Accept"
REJECT = "Reject"
STEP_CAP = "StepCapExceeded"


class MachineViolation(RuntimeError):
    pass


class InvalidMachine(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


class MalformedSerialisation(ValueError):
    pass


def pred_symbol(name: str) -> str:
    return "@" + name


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    delta: Mapping[tuple[str, str], tuple[str, str, int]]
    initial: str
    accept: str
    reject: str
    blank: str = "_"

    def __post_init__(self) -> None:
        states, alphabet = set(self.states), set(self.alphabet)
        for need in ("0", "1", SEP, self.blank):
            if need not in alphabet:
                raise InvalidMachine(f"alphabet lacks {need!r}")
        for q in (self.initial, self.accept, self.reject):
            if q not in states:
                raise InvalidMachine(f"unknown state {q!r}")
        if self.accept == self.reject:
            raise InvalidMachine("accept and reject states coincide")
        halting = {self.accept, self.reject}
        for (q, a), (r, b, d) in self.delta.items():
            if q in halting:
                raise InvalidMachine(f"halting state {q} has a transition")
            if q not in states or r not in states or a not in alphabet or b not in alphabet:
                raise InvalidMachine(f"transition ({q}, {a}) uses unknown names")
            if d not in (LEFT, RIGHT):
                raise InvalidMachine(f"bad direction {d}")
        for q in self.states:
            if q in halting:
                continue
            for a in self.alphabet:
                if (q, a) not in self.delta:
                    raise InvalidMachine(f"no transition for ({q}, {a})")

    @property
    def working_states(self) -> list[str]:
        return [q for q in self.states if q not in (self.accept, self.reject)]

    def transitions(self) -> list[tuple[str, str, str, str, int]]:
        """(q, a, r, b, d) in state order, then alphabet order."""
        out = []
        for q in self.working_states:
            for a in self.alphabet:
                r, b, d = self.delta[(q, a)]
                out.append((q, a, r, b, d))
        return out


class Configuration(NamedTuple):
    tape: tuple[str, ...]
    head: int
    state: str


class TMResult(NamedTuple):
    status: str
    config: Configuration
    steps: int

    @property
    def accepted(self) -> bool:
        return self.status == ACCEPT


def tokenize_word(text: str, blank: str = "_") -> list[str]:
    """Split ``@ed|1|10|`` (or ``ed|1|10|``) into tape symbols.

    Whitespace-separated input is split on whitespace instead, which allows
    arbitrary work symbols.
    """
    if any(ch.isspace() for ch in text.strip()):
        return text.split()
    out = []
    for m in re.finditer(r"@?[A-Za-z][A-Za-z0-9_]*|.", text):
        tok = m.group(0)
        if tok[0].isalpha():
            tok = "@" + tok
        out.append(tok)
    return out


def format_word(word: Iterable[str]) -> str:
    return "".join(word)


def run_tm(m: TuringMachine, word: Sequence[str] | str, step_cap: int = 10**6) -> TMResult:
    if isinstance(word, str):
        word = tokenize_word(word, m.blank)
    alphabet = set(m.alphabet)
    for s in word:
        if s not in alphabet:
            raise InvalidMachine(f"input symbol {s!r} not in the tape alphabet")
    tape = list(word)
    head, state, steps = 0, m.initial, 0
    delta = m.delta
    while state != m.accept and state != m.reject:
        if steps >= step_cap:
            return TMResult(STEP_CAP, Configuration(tuple(tape), head, state), steps)
        if head == len(tape):
            tape.append(m.blank)
        state, tape[head], d = delta[(state, tape[head])]
        if head == 0 and d == LEFT:
            raise MachineViolation(f"left move at cell 0 after {steps} steps")
        head += d
        steps += 1
    status = ACCEPT if state == m.accept else REJECT
    return TMResult(status, Configuration(tuple(tape), head, state), steps)


def padded_run(m: TuringMachine, word: Sequence[str], max_steps: int = 10**6) -> list[Configuration]:
    """Run where the tape starts with one trailing blank and gains one blank per step.

    This is the configuration sequence the compiled rules reproduce.
    """
    tape = list(word) + [m.blank]
    head, state = 0, m.initial
    out = [Configuration(tuple(tape), head, state)]
    while state not in (m.accept, m.reject) and len(out) <= max_steps:
        state, tape[head], d = m.delta[(state, tape[head])]
        if head == 0 and d == LEFT:
            raise MachineViolation("left move at cell 0")
        head += d
        tape.append(m.blank)
        out.append(Configuration(tuple(tape), head, state))
    return out


# serialisations

def _check_db(db: Iterable, schema: Schema) -> dict[str, int]:
    arity = {p.name: p.arity for p in schema}
    for pred, args in db:
        if arity.get(pred) != len(args):
            raise SchemaMismatch(f"fact {pred}{tuple(args)} is not over the schema")
    return arity


def serialize_with(facts: Sequence, words: Mapping[int, str]) -> tuple[str, ...]:
    out: list[str] = []
    for pred, args in facts:
        out.append(pred_symbol(pred))
        out.append(SEP)
        for a in args:
            out.extend(words[a])
            out.append(SEP)
    return tuple(out)


def serialize_db(db: Iterable, schema: Schema) -> tuple[str, ...]:
    """Canonical serialisation: canonical null numbering, MSB-first binary."""
    db = Interpretation(db)
    _check_db(db, schema)
    canon = canonicalize(db)
    words = {n: format(n, "b") for n in canon.nulls()}
    return serialize_with(sorted(canon), words)


def random_serialisation(db: Iterable, schema: Schema, rng: random.Random,
                         duplicates: bool = False) -> tuple[str, ...]:
    """Some valid serialisation: random injective words, random fact order,
    and optionally a repeated fact."""
    db = Interpretation(db)
    _check_db(db, schema)
    nulls = sorted(db.nulls())
    words: dict[int, str] = {}
    used: set[str] = set()
    for n in nulls:
        while True:
            w = "".join(rng.choice("01") for _ in range(rng.randint(1, 4)))
            if w not in used:
                break
        used.add(w)
        words[n] = w
    facts = sorted(db)
    rng.shuffle(facts)
    if duplicates and facts and rng.random() < 0.3:
        facts.append(rng.choice(facts))
    return serialize_with(facts, words)


def deserialize(word: Sequence[str] | str, schema: Schema) -> Interpretation:
    if isinstance(word, str):
        word = tokenize_word(word)
    arity = {pred_symbol(p.name): (p.name, p.arity) for p in schema}
    ids: dict[str, int] = {}
    atoms = []
    i, n = 0, len(word)
    while i < n:
        sym = word[i]
        if sym not in arity:
            raise MalformedSerialisation(f"expected a predicate symbol at {i}, got {sym!r}")
        pred, k = arity[sym]
        i += 1
        if i >= n or word[i] != SEP:
            raise MalformedSerialisation(f"missing separator after {sym} at {i}")
        i += 1
        args = []
        for _ in range(k):
            j = i
            while j < n and word[j] in ("0", "1"):
                j += 1
            if j == i:
                raise MalformedSerialisation(f"empty or missing binary block at {i}")
            if j >= n or word[j] != SEP:
                raise MalformedSerialisation(f"unterminated binary block at {i}")
            w = "".join(word[i:j])
            args.append(ids.setdefault(w, len(ids) + 1))
            i = j + 1
        atoms.append((pred, tuple(args)))
    return Interpretation(atoms)


def order_facts(facts: Iterable, depth: Mapping[int, int], pred_order: Sequence[str]) -> list:
    """Sort facts by predicate rank, then arguments with deeper nulls first."""
    rank = {p: k for k, p in enumerate(pred_order)}
    return sorted(facts, key=lambda a: (rank[a[0]], tuple(-depth[t] for t in a[1])))


def predicate_order(schema: Schema) -> list[str]:
    """Arity first, then declaration order within an arity."""
    return [p.name for p in sorted(schema, key=lambda p: (p.arity, list(schema).index(p)))]


# text format

def format_tm(m: TuringMachine) -> str:
    lines = [
        "states: " + " ".join(m.states),
        f"initial: {m.initial}",
        f"accept: {m.accept}",
        f"reject: {m.reject}",
        f"blank: {m.blank}",
        "alphabet: " + " ".join(m.alphabet),
        "delta:",
    ]
    for q, a, r, b, d in m.transitions():
        lines.append(f"{q} {a} -> {r} {b} {'R' if d == RIGHT else 'L'}")
    return "\n".join(lines) + "\n"


def parse_tm(text: str) -> TuringMachine:
    fields: dict[str, str] = {}
    delta: dict[tuple[str, str], tuple[str, str, int]] = {}
    in_delta = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip() if not raw.strip().startswith("#") else ""
        if not line:
            continue
        m = re.match(r"(states|initial|accept|reject|blank|alphabet|delta)\s*:\s*(.*)\Z", line)
        if m:
            key, rest = m.group(1), m.group(2).strip()
            if key == "delta":
                in_delta = True
                if not rest:
                    continue
                line = rest
            else:
                fields[key] = rest
                continue
        if not in_delta:
            raise InvalidMachine(f"line {lineno}: unexpected {line!r}")
        parts = line.split()
        if len(parts) != 6 or parts[2] != "->" or parts[5] not in ("L", "R"):
            raise InvalidMachine(f"line {lineno}: bad transition {line!r}")
        q, a, _, r, b, d = parts
        if (q, a) in delta:
            raise InvalidMachine(f"line {lineno}: duplicate transition for ({q}, {a})")
        delta[(q, a)] = (r, b, RIGHT if d == "R" else LEFT)
    for key in ("states", "initial", "accept", "reject", "alphabet"):
        if key not in fields:
            raise InvalidMachine(f"missing '{key}:' line")
    return TuringMachine(
        states=tuple(fields["states"].split()),
        alphabet=tuple(fields["alphabet"].split()),
        delta=delta,
        initial=fields["initial"],
        accept=fields["accept"],
        reject=fields["reject"],
        blank=fields.get("blank", "_"),
    )


# sample machines

def _base_alphabet(schema: Schema, blank: str = "_") -> list[str]:
    return ["0", "1", SEP, blank] + [pred_symbol(p) for p in predicate_order(schema)]


def nonempty_machine(schema: Schema) -> TuringMachine:
    """Accepts iff cell 0 is not blank, i.e. the database has a fact."""
    alphabet = _base_alphabet(schema)
    delta = {}
    for a in alphabet:
        delta[("qs", a)] = ("qr" if a == "_" else "qa", a, RIGHT)
    return TuringMachine(("qs", "qa", "qr"), tuple(alphabet), delta, "qs", "qa", "qr")


def selfloop_machine(schema: Schema, pred: str = "ed") -> TuringMachine:
    """Accepts iff some ``pred`` fact has two equal binary blocks.

    Each fact is checked by zig-zag marking: the next unmarked bit of the
    first block is marked (0 -> X, 1 -> Y), carried to the second block and
    compared with its next unmarked bit. Facts of other predicates are
    skipped.
    """
    if schema.arity(pred) != 2:
        raise InvalidMachine(f"{pred} must be binary")
    alphabet = _base_alphabet(schema) + ["X", "Y"]
    target = pred_symbol(pred)
    others = [s for s in alphabet if s.startswith("@") and s != target]
    mark = {"0": "X", "1": "Y"}
    states = ("scan", "skip", "hdr", "pick", "carry0", "carry1", "find0", "find1",
              "back2", "back1", "rest", "qa", "qr")
    delta: dict[tuple[str, str], tuple[str, str, int]] = {}

    def at_fact_start(q: str, a: str) -> None:
        # what skip does on a fact boundary symbol
        if a == "_":
            delta[(q, a)] = ("qr", a, RIGHT)
        elif a == target:
            delta[(q, a)] = ("hdr", a, RIGHT)
        else:
            delta[(q, a)] = ("skip", a, RIGHT)

    for q in ("scan", "skip"):
        for a in alphabet:
            if a == "_" or a.startswith("@"):
                at_fact_start(q, a)
            else:
                delta[(q, a)] = ("skip", a, RIGHT)
    for a in alphabet:
        if a == SEP:
            delta[("hdr", a)] = ("pick", a, RIGHT)
        elif a == "_" or a.startswith("@"):
            at_fact_start("hdr", a)
        else:
            delta[("hdr", a)] = ("skip", a, RIGHT)
        # pick the next unmarked bit of the first block
        if a in ("X", "Y"):
            delta[("pick", a)] = ("pick", a, RIGHT)
        elif a in ("0", "1"):
            delta[("pick", a)] = ("carry" + a, mark[a], RIGHT)
        elif a == SEP:
            delta[("pick", a)] = ("rest", a, RIGHT)
        else:
            at_fact_start("pick", a)
        for bit in "01":
            carry, find = "carry" + bit, "find" + bit
            if a in ("0", "1", "X", "Y"):
                delta[(carry, a)] = (carry, a, RIGHT)
            elif a == SEP:
                delta[(carry, a)] = (find, a, RIGHT)
            else:
                at_fact_start(carry, a)
            if a in ("X", "Y"):
                delta[(find, a)] = (find, a, RIGHT)
            elif a == bit:
                delta[(find, a)] = ("back2", mark[a], LEFT)
            elif a in ("0", "1", SEP):
                delta[(find, a)] = ("skip", a, RIGHT)
            else:
                at_fact_start(find, a)
        # walk back to the start of the first block
        if a in ("0", "1", "X", "Y"):
            delta[("back2", a)] = ("back2", a, LEFT)
            delta[("back1", a)] = ("back1", a, LEFT)
        elif a == SEP:
            delta[("back2", a)] = ("back1", a, LEFT)
            delta[("back1", a)] = ("pick", a, RIGHT)
        else:
            delta[("back2", a)] = ("qr", a, RIGHT)
            delta[("back1", a)] = ("qr", a, RIGHT)
        # first block used up: the second must be used up too
        if a in ("X", "Y"):
            delta[("rest", a)] = ("rest", a, RIGHT)
        elif a == SEP:
            delta[("rest", a)] = ("qa", a, RIGHT)
        elif a in ("0", "1"):
            delta[("rest", a)] = ("skip", a, RIGHT)
        else:
            at_fact_start("rest", a)
    assert not others or all(("scan", s) in delta for s in others)
    return TuringMachine(states, tuple(alphabet), delta, "scan", "qa", "qr")


def exactly_one_fact_machine(schema: Schema) -> TuringMachine:
    """Accepts iff the tape holds exactly one fact; not closed under homomorphisms."""
    alphabet = _base_alphabet(schema)
    delta = {}
    for a in alphabet:
        is_pred = a.startswith("@")
        delta[("c0", a)] = ("c1" if is_pred else "c0", a, RIGHT) if a != "_" else ("qr", a, RIGHT)
        if a == "_":
            delta[("c1", a)] = ("qa", a, RIGHT)
        else:
            delta[("c1", a)] = ("qr" if is_pred else "c1", a, RIGHT)
    return TuringMachine(("c0", "c1", "qa", "qr"), tuple(alphabet), delta, "c0", "qa", "qr")
