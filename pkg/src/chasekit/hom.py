"""Homomorphisms between interpretations and body-match enumeration."""
from __future__ import annotations

from collections import defaultdict
from typing import Callable, Iterable, Iterator, Mapping

from .model import is_var


class AtomIndex:
    """Per-predicate and per-(predicate, position, null) atom lists, sorted."""

    def __init__(self, atoms: Iterable) -> None:
        self.by_pred: dict[str, list[tuple]] = defaultdict(list)
        self.by_key: dict[tuple, list[tuple]] = defaultdict(list)
        for pred, args in sorted(set((p, tuple(a)) for p, a in atoms)):
            self.by_pred[pred].append(args)
            for pos, t in enumerate(args):
                self.by_key[(pred, pos, t)].append(args)

    def candidates(self, pred: str, args: tuple, binding: Mapping, var: Callable) -> list[tuple]:
        best = None
        for pos, t in enumerate(args):
            if var(t):
                if t not in binding:
                    continue
                t = binding[t]
            lst = self.by_key.get((pred, pos, t), [])
            if best is None or len(lst) < len(best):
                best = lst
        if best is None:
            return self.by_pred.get(pred, [])
        return best


def _backtrack(patterns: list, index: AtomIndex, binding: dict, var: Callable) -> Iterator[dict]:
    if not patterns:
        yield dict(binding)
        return
    choice = None
    for k, (pred, args) in enumerate(patterns):
        cands = index.candidates(pred, args, binding, var)
        if not cands:
            return
        if choice is None or len(cands) < len(choice[1]):
            choice = (k, cands)
    k, cands = choice
    pred, args = patterns[k]
    rest = patterns[:k] + patterns[k + 1:]
    for cand in cands:
        newly = []
        ok = True
        for t, v in zip(args, cand):
            if var(t):
                bound = binding.get(t)
                if bound is None:
                    binding[t] = v
                    newly.append(t)
                elif bound != v:
                    ok = False
                    break
            elif t != v:
                ok = False
                break
        if ok:
            yield from _backtrack(rest, index, binding, var)
        for t in newly:
            del binding[t]


def match_patterns(patterns: Iterable, index: AtomIndex, binding: Mapping | None = None,
                   var: Callable = is_var) -> Iterator[dict]:
    """Yield every extension of ``binding`` mapping ``patterns`` into the index."""
    pats = [(p, tuple(a)) for p, a in patterns]
    yield from _backtrack(pats, index, dict(binding or {}), var)


def find_homomorphism(src: Iterable, dst: Iterable) -> dict[int, int] | None:
    """Return a null mapping sending every atom of src into dst, or None."""
    index = dst if isinstance(dst, AtomIndex) else AtomIndex(dst)
    for h in match_patterns(src, index, var=lambda t: True):
        return h
    return None


def is_homomorphism(h: Mapping[int, int], src: Iterable, dst: Iterable) -> bool:
    target = set((p, tuple(a)) for p, a in dst)
    try:
        return all((p, tuple(h[t] for t in args)) in target for p, args in src)
    except KeyError:
        return False


def entails(src: Iterable, query: Iterable) -> bool:
    """True iff the query (read as a Boolean conjunctive query) maps into src."""
    return find_homomorphism(query, src) is not None


def enumerate_matches(body: Iterable, i: Iterable) -> list[dict[str, int]]:
    """All substitutions mapping the body's variables into i, deterministically ordered."""
    body = list(body)
    index = i if isinstance(i, AtomIndex) else AtomIndex(i)
    matches = list(match_patterns(body, index))
    keys = sorted({v for _, args in body for v in args if is_var(v)})
    matches.sort(key=lambda s: tuple(s[k] for k in keys))
    return matches
