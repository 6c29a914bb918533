"""Rule syntax tree, text format, schemas.

Text format::

    # comment
    @label: body1(x, y), body2(y) -> exists z . head(y, z); other(x).
    -> exists y . first(y), dbdom(y).

A rule without an ``@label:`` prefix gets ``r<index>`` (1-based).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

from .model import Atom, Predicate, display_pred, internal_pred, is_var


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    pass


def atom(pred: str, *args: str) -> Atom:
    return Atom(pred, tuple(args))


def _vars(atoms: Iterable) -> list[str]:
    seen: dict[str, None] = {}
    for _, args in atoms:
        for t in args:
            if is_var(t):
                seen.setdefault(t)
    return list(seen)


@dataclass(frozen=True)
class Disjunct:
    exists: tuple[str, ...]
    atoms: tuple[Atom, ...]

    @staticmethod
    def of(atoms: Iterable, exists: Iterable[str] = ()) -> "Disjunct":
        return Disjunct(tuple(exists), tuple(Atom(p, tuple(a)) for p, a in atoms))


@dataclass(frozen=True)
class Rule:
    body: tuple[Atom, ...]
    disjuncts: tuple[Disjunct, ...]
    label: str = ""

    def __post_init__(self) -> None:
        validate_rule(self)

    @staticmethod
    def make(body: Iterable, *heads: Disjunct | Sequence, label: str = "") -> "Rule":
        ds = []
        for h in heads:
            ds.append(h if isinstance(h, Disjunct) else Disjunct.of(h))
        return Rule(tuple(Atom(p, tuple(a)) for p, a in body), tuple(ds), label)

    def body_vars(self) -> list[str]:
        return _vars(self.body)

    def frontier(self, i: int) -> list[str]:
        """Body variables used in disjunct i, in body order."""
        used = set(_vars(self.disjuncts[i].atoms))
        return [v for v in self.body_vars() if v in used]

    @property
    def is_disjunctive(self) -> bool:
        return len(self.disjuncts) > 1

    @property
    def is_existential(self) -> bool:
        return any(d.exists for d in self.disjuncts)

    @property
    def is_datalog(self) -> bool:
        """Deterministic and existential-free."""
        return not self.is_disjunctive and not self.is_existential

    def atoms(self) -> Iterator[Atom]:
        yield from self.body
        for d in self.disjuncts:
            yield from d.atoms

    def relabel(self, label: str) -> "Rule":
        return Rule(self.body, self.disjuncts, label)

    def __str__(self) -> str:
        return format_rule(self)


def validate_rule(rule: Rule) -> None:
    if not rule.disjuncts:
        raise ValidationError(f"rule {rule.label!r} has no head disjunct")
    for a in rule.body:
        if not all(is_var(t) for t in a.args):
            raise ValidationError(f"rule {rule.label!r}: body atom {a} has a non-variable argument")
    body = set(_vars(rule.body))
    for d in rule.disjuncts:
        if not d.atoms:
            raise ValidationError(f"rule {rule.label!r}: empty head disjunct")
        if len(set(d.exists)) != len(d.exists):
            raise ValidationError(f"rule {rule.label!r}: repeated existential variable")
        clash = body & set(d.exists)
        if clash:
            raise ValidationError(
                f"rule {rule.label!r}: existential {sorted(clash)} also occurs in the body")
        for a in d.atoms:
            for t in a.args:
                if not is_var(t):
                    raise ValidationError(f"rule {rule.label!r}: head atom {a} has a non-variable argument")
                if t not in body and t not in d.exists:
                    raise ValidationError(f"rule {rule.label!r}: head variable {t} is unbound")


class RuleSet:
    """Ordered rules with unique labels."""

    def __init__(self, rules: Iterable[Rule] = ()) -> None:
        out = []
        for k, r in enumerate(rules, 1):
            out.append(r if r.label else r.relabel(f"r{k}"))
        labels = [r.label for r in out]
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise ValidationError(f"duplicate rule labels {dup}")
        self.rules: tuple[Rule, ...] = tuple(out)
        self._by_label = {r.label: r for r in out}
        arities: dict[str, int] = {}
        for r in out:
            for a in r.atoms():
                if arities.setdefault(a.pred, len(a.args)) != len(a.args):
                    raise ValidationError(f"predicate {display_pred(a.pred)} used with two arities")
        self.arities = arities

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self._by_label[key]
        return self.rules[key]

    def __contains__(self, item) -> bool:
        if isinstance(item, str):
            return item in self._by_label
        return item in self.rules

    def __eq__(self, other) -> bool:
        return isinstance(other, RuleSet) and self.rules == other.rules

    def __hash__(self) -> int:
        return hash(self.rules)

    def __add__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(list(self.rules) + list(other.rules))

    def __repr__(self) -> str:
        return f"RuleSet({len(self.rules)} rules)"

    def labels(self) -> list[str]:
        return [r.label for r in self.rules]

    def head_predicates(self) -> set[str]:
        return {a.pred for r in self.rules for d in r.disjuncts for a in d.atoms}

    def predicates(self) -> dict[str, int]:
        return dict(self.arities)


class Schema(tuple):
    """Ordered tuple of Predicates with unique names."""

    def __new__(cls, preds: Iterable = ()):
        items = tuple(Predicate(p, a) for p, a in preds)
        names = [p.name for p in items]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate predicate name in schema")
        for p in items:
            if p.arity < 0:
                raise ValidationError(f"negative arity for {p.name}")
        return super().__new__(cls, items)

    def arity(self, name: str) -> int:
        for p in self:
            if p.name == name:
                return p.arity
        raise KeyError(name)

    def names(self) -> list[str]:
        return [p.name for p in self]

    def by_arity(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for p in self:
            out.setdefault(p.arity, []).append(p.name)
        return out

    def __repr__(self) -> str:
        return "Schema(" + ", ".join(str(p) for p in self) + ")"


def parse_schema(text: str) -> Schema:
    preds = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*/\s*(\d+)", line)
        if not m:
            raise ParseError(f"expected name/arity, got {line!r}", lineno, 1)
        preds.append((internal_pred(m.group(1)), int(m.group(2))))
    return Schema(preds)


def format_schema(schema: Schema) -> str:
    return "".join(f"{display_pred(p.name)}/{p.arity}\n" for p in schema)


def input_schema(rs: RuleSet) -> Schema:
    heads = rs.head_predicates()
    return Schema(sorted((p, a) for p, a in rs.predicates().items() if p not in heads))


def validate_decider_inputs(schema: Schema) -> bool:
    if not schema or any(p.arity == 0 for p in schema):
        return False
    m = max(p.arity for p in schema)
    counts = {i: 0 for i in range(1, m + 1)}
    for p in schema:
        counts[p.arity] += 1
    n = counts[1]
    return n > 0 and all(c == n for c in counts.values())


# printing

def _fmt_atom(a: Atom) -> str:
    return f"{display_pred(a.pred)}({', '.join(a.args)})"


def format_rule(rule: Rule) -> str:
    body = ", ".join(_fmt_atom(a) for a in rule.body)
    heads = []
    for d in rule.disjuncts:
        conj = ", ".join(_fmt_atom(a) for a in d.atoms)
        heads.append(f"exists {', '.join(d.exists)} . {conj}" if d.exists else conj)
    lhs = f"{body} -> " if body else "-> "
    return f"@{rule.label}: {lhs}{'; '.join(heads)}."


def format_rules(rs: Iterable[Rule], header: str = "") -> str:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines += [format_rule(r) for r in rs]
    return "\n".join(lines) + "\n"


# parsing

class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"\s+|#[^\n]*|->|[A-Za-z_][A-Za-z0-9_]*|[(),;.@:]")


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        s = m.group(0)
        if not (s[0].isspace() or s[0] == "#"):
            kind = "id" if (s[0].isalpha() or s[0] == "_") else s
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str) -> _Tok:
        t = self.tok
        if t.kind != kind:
            want = "identifier" if kind == "id" else repr(kind)
            got = "end of input" if t.kind == "eof" else repr(t.text)
            raise ParseError(f"expected {want}, got {got}", t.line, t.col)
        self.i += 1
        return t

    def rules(self) -> list[Rule]:
        out = []
        while self.tok.kind != "eof":
            out.append(self.rule())
        return out

    def rule(self) -> Rule:
        start = self.tok
        label = ""
        if self.tok.kind == "@":
            self.i += 1
            label = self.take("id").text
            self.take(":")
        body = [] if self.tok.kind == "->" else self.conj()
        self.take("->")
        heads = [self.disjunct()]
        while self.tok.kind == ";":
            self.i += 1
            heads.append(self.disjunct())
        self.take(".")
        try:
            return Rule(tuple(body), tuple(heads), label)
        except ValidationError as e:
            raise ValidationError(f"line {start.line}: {e}") from None

    def disjunct(self) -> Disjunct:
        exists: list[str] = []
        if self.tok.kind == "id" and self.tok.text == "exists":
            self.i += 1
            exists.append(self.take("id").text)
            while self.tok.kind == ",":
                self.i += 1
                exists.append(self.take("id").text)
            self.take(".")
        return Disjunct(tuple(exists), tuple(self.conj()))

    def conj(self) -> list[Atom]:
        atoms = [self.atom()]
        while self.tok.kind == ",":
            self.i += 1
            atoms.append(self.atom())
        return atoms

    def atom(self) -> Atom:
        name = self.take("id")
        if name.text == "exists":
            raise ParseError("'exists' is reserved", name.line, name.col)
        args: list[str] = []
        if self.tok.kind == "(":
            self.i += 1
            if self.tok.kind != ")":
                args.append(self.take("id").text)
                while self.tok.kind == ",":
                    self.i += 1
                    args.append(self.take("id").text)
            self.take(")")
        return Atom(internal_pred(name.text), tuple(args))


def parse_rules(text: str) -> RuleSet:
    return RuleSet(_Parser(text).rules())
