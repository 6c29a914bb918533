"""Core vocabulary: atoms over nulls and variables, interpretations,
substitutions, canonical forms.

Nulls are ints and variables are strs, so an atom's arguments say by
their type which kind of term they are. Predicate names starting with
``$`` are reserved for generated predicates and print as ``g_``.
"""
from __future__ import annotations

import itertools
import re
from collections import defaultdict
from typing import Iterable, Iterator, Mapping, NamedTuple, Union

Term = Union[int, str]

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
RESERVED = "$"
RESERVED_TEXT = "g_"


class UnboundVariable(KeyError):
    pass


class DatabaseParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class Predicate(NamedTuple):
    name: str
    arity: int

    def __str__(self) -> str:
        return f"{display_pred(self.name)}/{self.arity}"


class Atom(NamedTuple):
    pred: str
    args: tuple

    def is_ground(self) -> bool:
        return all(isinstance(a, int) for a in self.args)

    def __str__(self) -> str:
        return format_atom(self)


def is_var(t: Term) -> bool:
    return isinstance(t, str)


def display_pred(name: str) -> str:
    if name.startswith(RESERVED):
        return RESERVED_TEXT + name[1:]
    return name


def internal_pred(text: str) -> str:
    if text.startswith(RESERVED_TEXT):
        return RESERVED + text[len(RESERVED_TEXT):]
    return text


def format_atom(atom, names: "Names | None" = None) -> str:
    pred, args = atom
    out = []
    for a in args:
        if isinstance(a, int):
            out.append(names.name(a) if names else f"n{a}")
        else:
            out.append(a)
    return f"{display_pred(pred)}({', '.join(out)})"


class Names:
    """Side table of display names for nulls."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: dict[int, str] = {}

    def intern(self, name: str) -> int:
        if name not in self._ids:
            n = len(self._ids) + 1
            self._ids[name] = n
            self._names[n] = name
        return self._ids[name]

    def name(self, null: int) -> str:
        return self._names.get(null, f"n{null}")

    def __len__(self) -> int:
        return len(self._ids)


class NullFactory:
    """Serialized source of fresh nulls; never hands out the same id twice."""

    def __init__(self, start: int = 1) -> None:
        self._counter = itertools.count(start)

    def fresh(self) -> int:
        return next(self._counter)


class Interpretation(frozenset):
    """Immutable set of ground atoms."""

    def __new__(cls, atoms: Iterable = ()):
        items = []
        for a in atoms:
            pred, args = a
            args = tuple(args)
            for t in args:
                if not isinstance(t, int) or isinstance(t, bool):
                    raise ValueError(f"non-ground atom {pred}{args}")
            items.append(Atom(pred, args))
        return super().__new__(cls, items)

    def nulls(self) -> set[int]:
        return {t for _, args in self for t in args}

    def predicates(self) -> set[tuple[str, int]]:
        return {(p, len(args)) for p, args in self}

    def with_pred(self, pred: str) -> list[Atom]:
        return sorted(a for a in self if a[0] == pred)

    def restrict(self, preds: Iterable[str]) -> "Interpretation":
        keep = set(preds)
        return Interpretation(a for a in self if a[0] in keep)

    def __repr__(self) -> str:
        return "{" + ", ".join(format_atom(a) for a in sorted(self)) + "}"


def apply_substitution(s: Mapping[str, int], atoms: Iterable) -> set[Atom]:
    out = set()
    for pred, args in atoms:
        new = []
        for t in args:
            if isinstance(t, str):
                if t not in s:
                    raise UnboundVariable(t)
                new.append(s[t])
            else:
                new.append(t)
        out.add(Atom(pred, tuple(new)))
    return out


_FACT = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(([^)]*)\))?\s*\.?\s*\Z")


def parse_db(text: str, names: Names | None = None) -> Interpretation:
    """Parse ``pred(a, b).`` lines; null names are interned in ``names``."""
    if names is None:
        names = Names()
    atoms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for chunk in _split_facts(line):
            m = _FACT.match(chunk)
            if not m:
                raise DatabaseParseError(f"bad fact {chunk!r}", lineno)
            pred, argtext = m.group(1), m.group(2)
            args = []
            if argtext and argtext.strip():
                for tok in argtext.split(","):
                    tok = tok.strip()
                    if not IDENT.match(tok):
                        raise DatabaseParseError(f"bad null name {tok!r}", lineno)
                    args.append(names.intern(tok))
            atoms.append((internal_pred(pred), tuple(args)))
    return Interpretation(atoms)


def _split_facts(line: str) -> list[str]:
    # several facts may share a line: "p(a). q(b)."
    parts, depth, cur = [], 0, []
    for ch in line:
        cur.append(ch)
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "." and depth == 0:
            parts.append("".join(cur))
            cur = []
    if "".join(cur).strip():
        parts.append("".join(cur))
    return parts


def format_db(db: Iterable, names: Names | None = None) -> str:
    return "".join(format_atom(a, names) + ".\n" for a in sorted(db))


# canonical forms

def _refine(atoms: list, colour: dict[int, int]) -> dict[int, int]:
    classes = len(set(colour.values()))
    while True:
        occ: dict[int, list] = defaultdict(list)
        for pred, args in atoms:
            cols = tuple(colour[a] for a in args)
            for pos, a in enumerate(args):
                occ[a].append((pred, pos, cols))
        keys = {n: (colour[n], tuple(sorted(occ[n]))) for n in colour}
        rank = {k: i for i, k in enumerate(sorted(set(keys.values())))}
        new = {n: rank[keys[n]] for n in colour}
        if len(rank) == classes:
            return new
        colour, classes = new, len(rank)


def _certificate(atoms: list, colour: dict[int, int]) -> list:
    return sorted((p, tuple(colour[a] for a in args)) for p, args in atoms)


def _search(atoms: list, colour: dict[int, int], best: list) -> None:
    colour = _refine(atoms, colour)
    cells: dict[int, list[int]] = defaultdict(list)
    for n, c in colour.items():
        cells[c].append(n)
    target = min((c for c, members in cells.items() if len(members) > 1), default=None)
    if target is None:
        cert = _certificate(atoms, colour)
        if not best or cert < best[0]:
            best[:] = [cert]
        return
    for m in sorted(cells[target]):
        split = {n: 2 * c + (1 if c == target and n != m else 0) for n, c in colour.items()}
        _search(atoms, split, best)


def canonicalize(i: Iterable) -> Interpretation:
    """Rename nulls to 1..n so that isomorphic inputs give equal outputs.

    Uses colour refinement with individualization; the final numbering is
    first occurrence in the sorted atom list.
    """
    atoms = sorted(set((p, tuple(a)) for p, a in i))
    nulls = sorted({t for _, args in atoms for t in args})
    if not nulls:
        return Interpretation(atoms)
    best: list = []
    _search(atoms, {n: 0 for n in nulls}, best)
    cert = best[0]
    order: dict[int, int] = {}
    for _, args in cert:
        for a in args:
            if a not in order:
                order[a] = len(order) + 1
    return Interpretation((p, tuple(order[a] for a in args)) for p, args in cert)


def isomorphic(i: Iterable, j: Iterable) -> bool:
    a, b = Interpretation(i), Interpretation(j)
    if len(a) != len(b) or len(a.nulls()) != len(b.nulls()):
        return False
    if sorted(p for p, _ in a) != sorted(p for p, _ in b):
        return False
    return canonicalize(a) == canonicalize(b)


def iter_nulls(atoms: Iterable) -> Iterator[int]:
    seen = set()
    for _, args in atoms:
        for t in args:
            if isinstance(t, int) and t not in seen:
                seen.add(t)
                yield t
