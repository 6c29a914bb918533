"""Disjunctive restricted chase.

The engine walks the chase tree depth first over a single mutable fact
store with an undo log, so sibling branches share everything above the
split. Rule bodies are compiled into join plans keyed by trigger
predicate; every inserted atom looks up the body positions it can fill and
joins the rest against per-(predicate, position, null) indexes. A match
is queued only if it is applicable when found (satisfaction is monotone
along a branch) and is re-checked when it is dequeued.
"""
from __future__ import annotations

import heapq
import io
import json
import os
import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

from .hom import AtomIndex, enumerate_matches, match_patterns
from .model import Atom, Interpretation, format_atom
from .rules import Rule, RuleSet

GOAL = ("Goal", ())

FIFO = "fifo"
DATALOG_FIRST = "datalog-first"
RULE_ORDER = "rule-order"
STRATEGIES = (FIFO, DATALOG_FIRST, RULE_ORDER)

TERMINATED = "Terminated"
NODE_CAP = "NodeCapExceeded"
STEP_CAP = "StepCapExceeded"
TIME_CAP = "TimeCapExceeded"
# internal: a probe run stopped at its first split
FORKED = "Forked"


class PreconditionViolated(ValueError):
    pass


class NotTerminated(RuntimeError):
    pass


class Strategy(NamedTuple):
    kind: str = FIFO
    seed: int = 0


def default_max_nodes() -> int:
    env = os.environ.get("CHASEKIT_MAX_NODES")
    return int(env) if env else 10**6


@dataclass
class Caps:
    max_nodes: int = field(default_factory=default_max_nodes)
    max_steps: int = 10**7
    # per-branch limit on rule applications; a branch hitting it is left open
    max_branch_steps: int | None = None
    max_seconds: float | None = None
    # RuleOrderPriority serves a pending match once it has waited this many
    # applications on the current branch, which keeps the strategy fair
    patience: int = 4096


@dataclass
class Stats:
    nodes: int = 1
    applications: int = 0
    max_depth: int = 0
    leaves: int = 0
    goal_leaves: int = 0
    open_branches: int = 0
    pruned_branches: int = 0
    seconds: float = 0.0


class ChaseNode:
    """Tree node storing only the atoms its parent's application added."""

    __slots__ = ("delta", "parent", "children", "applied", "kind")

    def __init__(self, delta: tuple, parent: "ChaseNode | None" = None) -> None:
        self.delta = delta
        self.parent = parent
        self.children: list[ChaseNode] = []
        self.applied: tuple[str, dict] | None = None
        self.kind = ""  # for leaves: terminated, goal, open, cap

    @property
    def label(self) -> Interpretation:
        atoms = []
        node = self
        while node is not None:
            atoms.extend(node.delta)
            node = node.parent
        return Interpretation(atoms)

    def walk(self):
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))

    def leaves(self) -> list["ChaseNode"]:
        return [n for n in self.walk() if not n.children]


@dataclass
class ChaseOutcome:
    status: str
    tree: ChaseNode | None
    leaves: list[Interpretation]
    stats: Stats
    leaf_goal: list[bool] = field(default_factory=list)
    counterexample: Interpretation | None = None
    # how each kept leaf was closed: terminated, goal, open
    leaf_kinds: list[str] = field(default_factory=list)

    @property
    def terminated(self) -> bool:
        return self.status == TERMINATED and self.stats.open_branches == 0


# compiled plans

def _compile_join(atoms: list, bound: set[int]) -> tuple:
    """Order atoms greedily by bound slots; emit (pred, key_pos, key_slot, checks, binds)."""
    bound = set(bound)
    todo = list(range(len(atoms)))
    steps = []
    while todo:
        best = max(todo, key=lambda k: (sum(1 for s in atoms[k][1] if s in bound),
                                         -len(atoms[k][1]), -k))
        todo.remove(best)
        pred, slots = atoms[best]
        key_pos, key_slot = -1, -1
        for pos, s in enumerate(slots):
            if s in bound:
                key_pos, key_slot = pos, s
                break
        checks, binds = [], []
        local = set()
        for pos, s in enumerate(slots):
            if s in bound or s in local:
                if pos != key_pos:
                    checks.append((pos, s))
            else:
                binds.append((pos, s))
                local.add(s)
        bound |= local
        steps.append((pred, key_pos, key_slot, tuple(checks), tuple(binds)))
    return tuple(steps)


class _Plan:
    __slots__ = ("index", "rule", "label", "vars", "nbody", "body", "disj", "datalog", "width")

    def __init__(self, index: int, rule: Rule) -> None:
        self.index = index
        self.rule = rule
        self.label = rule.label
        self.vars = rule.body_vars()
        slot = {v: k for k, v in enumerate(self.vars)}
        self.nbody = len(self.vars)
        self.body = [(a.pred, tuple(slot[t] for t in a.args)) for a in rule.body]
        self.datalog = rule.is_datalog
        self.disj = []
        width = self.nbody
        for d in rule.disjuncts:
            local = dict(slot)
            ex = []
            for y in d.exists:
                local[y] = len(local)
                ex.append(local[y])
            atoms = [(a.pred, tuple(local[t] for t in a.args)) for a in d.atoms]
            check = _compile_join(atoms, set(range(self.nbody))) if ex else None
            self.disj.append((tuple(ex), atoms, check))
            width = max(width, len(local))
        self.width = width

    def triggers(self):
        for i, (pred, slots) in enumerate(self.body):
            first: dict[int, int] = {}
            binds, checks = [], []
            for pos, s in enumerate(slots):
                if s in first:
                    checks.append((pos, s))
                else:
                    first[s] = pos
                    binds.append((pos, s))
            rest = [a for k, a in enumerate(self.body) if k != i]
            steps = _compile_join(rest, set(first))
            yield pred, (self, tuple(binds), tuple(checks), steps)


# queues

class _FifoQueue:
    def __init__(self, items=()):
        self.q = deque(items)

    def push(self, plan, key, depth):
        self.q.append((plan, key))

    def pop(self, depth):
        return self.q.popleft() if self.q else None

    def copy(self):
        return _FifoQueue(self.q)


class _DatalogFirstQueue:
    def __init__(self, fast=(), slow=()):
        self.fast = deque(fast)
        self.slow = deque(slow)

    def push(self, plan, key, depth):
        (self.fast if plan.datalog else self.slow).append((plan, key))

    def pop(self, depth):
        if self.fast:
            return self.fast.popleft()
        return self.slow.popleft() if self.slow else None

    def copy(self):
        return _DatalogFirstQueue(self.fast, self.slow)


class _RuleOrderQueue:
    """Priority by rule position, with aging so that no match waits forever."""

    def __init__(self, patience: int, heap=None, fifo=None, served=None, seq=0):
        self.patience = patience
        self.heap = heap if heap is not None else []
        self.fifo = fifo if fifo is not None else deque()
        self.served = served if served is not None else set()
        self.seq = seq

    def push(self, plan, key, depth):
        self.seq += 1
        item = (plan.index, self.seq, depth, plan, key)
        heapq.heappush(self.heap, item)
        self.fifo.append(item)

    def _drop_served_heads(self):
        while self.fifo and self.fifo[0][1] in self.served:
            self.served.discard(self.fifo.popleft()[1])
        while self.heap and self.heap[0][1] in self.served:
            self.served.discard(heapq.heappop(self.heap)[1])

    def pop(self, depth):
        self._drop_served_heads()
        if not self.heap:
            return None
        if depth - self.fifo[0][2] > self.patience:
            item = self.fifo.popleft()
        else:
            item = heapq.heappop(self.heap)
        self.served.add(item[1])
        self._drop_served_heads()
        return item[3], item[4]

    def copy(self):
        return _RuleOrderQueue(self.patience, list(self.heap), deque(self.fifo),
                               set(self.served), self.seq)


def _make_queue(kind: str, caps: Caps):
    if kind == FIFO:
        return _FifoQueue()
    if kind == DATALOG_FIRST:
        return _DatalogFirstQueue()
    if kind == RULE_ORDER:
        return _RuleOrderQueue(caps.patience)
    raise ValueError(f"unknown strategy {kind!r}")


class _Frame:
    __slots__ = ("node", "plan", "key", "next", "queue", "mark", "depth", "rng_state")

    def __init__(self, node, plan, key, queue, mark, depth, rng_state=None):
        self.node = node
        self.plan = plan
        self.key = key
        self.next = 1
        self.queue = queue
        self.mark = mark
        self.depth = depth
        # every child of a split starts from the same random state, so a
        # subtree does not depend on how much randomness its siblings used
        self.rng_state = rng_state


class ChaseEngine:
    """One chase run; use :func:`run_chase` unless you need the knobs."""

    def __init__(self, rs: RuleSet, db: Iterable, strategy: Strategy = Strategy(),
                 caps: Caps | None = None, *, record_tree: bool = True, keep_leaves: bool = True,
                 stop_on_goal: bool = False, stop_on_counterexample: bool = False,
                 reverse_children: bool = False, defer_on: tuple | None = None,
                 shadows: Mapping[str, Rule] | None = None,
                 only_branch: int | None = None, probe: bool = False) -> None:
        self.rs = rs
        self.db = Interpretation(db)
        self.strategy = strategy
        self.caps = caps or Caps()
        self.record_tree = record_tree
        self.keep_leaves = keep_leaves
        self.stop_on_goal = stop_on_goal
        self.stop_on_counterexample = stop_on_counterexample
        self.reverse_children = reverse_children
        # a branch that derives this atom is set aside and resumed only after
        # every other branch has been explored
        self.defer_on = defer_on
        self._hit_defer = False
        # label -> rule with the same leading body variables; at a split of the
        # labelled rule, children whose shadow disjunct already holds go first
        self.shadows = {}
        for label, r in (shadows or {}).items():
            self.shadows[label] = _Plan(-1, r)
        self.rng = random.Random(strategy.seed) if strategy.seed else None
        # parallel support: stop at the first split (probe), or explore only
        # one child of it (only_branch); fork records where that split was
        self.only_branch = only_branch
        self.probe = probe
        self.fork: dict | None = None

        self.plans = [_Plan(k, r) for k, r in enumerate(rs)]
        self.trig: dict[str, list] = {}
        for p in self.plans:
            for pred, t in p.triggers():
                self.trig.setdefault(pred, []).append(t)

        self.facts: set = set()
        self.by_pred: dict[str, list] = {}
        self.idx: dict[tuple, list] = {}
        self.log: list = []
        self.next_null = max(self.db.nulls(), default=0) + 1
        self.stats = Stats()

    # fact store

    def _insert(self, a) -> None:
        self.facts.add(a)
        self.log.append(a)
        pred, args = a
        lst = self.by_pred.get(pred)
        if lst is None:
            self.by_pred[pred] = [args]
        else:
            lst.append(args)
        idx = self.idx
        for pos, t in enumerate(args):
            key = (pred, pos, t)
            lst = idx.get(key)
            if lst is None:
                idx[key] = [args]
            else:
                lst.append(args)

    def _undo(self, mark: int) -> None:
        log, idx = self.log, self.idx
        while len(log) > mark:
            a = log.pop()
            self.facts.discard(a)
            pred, args = a
            self.by_pred[pred].pop()
            for pos, t in enumerate(args):
                idx[(pred, pos, t)].pop()

    # joins

    def _join(self, steps, k, b, emit) -> bool:
        if k == len(steps):
            return emit(b)
        pred, kpos, kslot, checks, binds = steps[k]
        if kpos >= 0:
            cands = self.idx.get((pred, kpos, b[kslot]))
        else:
            cands = self.by_pred.get(pred)
        if not cands:
            return False
        for args in cands:
            # bind first: a check may refer to a slot bound earlier in this atom
            for p, s in binds:
                b[s] = args[p]
            for p, s in checks:
                if args[p] != b[s]:
                    break
            else:
                if self._join(steps, k + 1, b, emit):
                    return True
        return False

    def _satisfied(self, plan: _Plan, key: tuple) -> bool:
        facts = self.facts
        for ex, atoms, check in plan.disj:
            if check is None:
                for p, slots in atoms:
                    if (p, tuple([key[s] for s in slots])) not in facts:
                        break
                else:
                    return True
            else:
                b = list(key) + [None] * (plan.width - plan.nbody)
                if self._join(check, 0, b, lambda _b: True):
                    return True
        return False

    def _matches_for(self, atoms: list) -> list:
        found = []
        seen = set()
        for pred, args in atoms:
            for plan, binds, checks, steps in self.trig.get(pred, ()):
                b = [None] * plan.width
                for pos, s in binds:
                    b[s] = args[pos]
                if any(args[pos] != b[s] for pos, s in checks):
                    continue
                nb = plan.nbody

                def emit(bb, plan=plan, nb=nb):
                    key = tuple(bb[:nb])
                    tag = (plan.index, key)
                    if tag not in seen:
                        seen.add(tag)
                        found.append((plan, key))
                    return False

                self._join(steps, 0, b, emit)
        return found

    def _enqueue(self, queue, matches: list, depth: int) -> None:
        if self.rng is not None and len(matches) > 1:
            self.rng.shuffle(matches)
        for plan, key in matches:
            if not self._satisfied(plan, key):
                queue.push(plan, key, depth)

    def _next(self, queue, depth: int):
        while True:
            item = queue.pop(depth)
            if item is None:
                return None
            if not self._satisfied(*item):
                return item

    def _holds(self, plan: _Plan, key: tuple, i: int) -> bool:
        ex, atoms, check = plan.disj[i]
        if check is None:
            return all((p, tuple([key[s] for s in slots])) in self.facts for p, slots in atoms)
        b = list(key) + [None] * (plan.width - plan.nbody)
        return self._join(check, 0, b, lambda _b: True)

    def _child_order(self, plan: _Plan, key: tuple, k: int) -> list[int]:
        order = list(range(k))
        if self.reverse_children:
            order.reverse()
        shadow = self.shadows.get(plan.label)
        if shadow is not None and len(shadow.disj) == k:
            skey = key[:shadow.nbody]
            order.sort(key=lambda i: not self._holds(shadow, skey, i))
        return order

    def _apply(self, plan: _Plan, key: tuple, di: int) -> list:
        ex, atoms, _ = plan.disj[di]
        b = list(key) + [None] * (plan.width - plan.nbody)
        for s in ex:
            b[s] = self.next_null
            self.next_null += 1
        new = []
        for p, slots in atoms:
            a = (p, tuple([b[s] for s in slots]))
            if a not in self.facts:
                self._insert(a)
                new.append(a)
        return new

    # driver

    def run(self) -> ChaseOutcome:
        t0 = time.perf_counter()
        deadline = t0 + self.caps.max_seconds if self.caps.max_seconds else None
        caps, stats = self.caps, self.stats
        queue = _make_queue(self.strategy.kind, caps)

        root_atoms = sorted(self.db)
        for a in root_atoms:
            self._insert((a[0], a[1]))
        initial = [(p, ()) for p in self.plans if not p.body]
        initial += self._matches_for([(a[0], a[1]) for a in root_atoms])
        self._enqueue(queue, initial, 0)
        root = ChaseNode(tuple(root_atoms)) if self.record_tree else None

        leaves: list[Interpretation] = []
        leaf_goal: list[bool] = []
        self.leaf_kinds: list[str] = []
        stack: list[_Frame] = []
        root_mark = len(self.log)
        deferred: deque = deque()
        node, depth = root, 0
        status = TERMINATED
        counterexample = None
        check_every = 256

        def enter(parent, plan, key, di, q, d):
            new = self._apply(plan, key, di)
            if self.defer_on is not None and self.defer_on in new:
                self._hit_defer = True
            child = None
            if self.record_tree:
                if parent.applied is None:
                    parent.applied = (plan.label, dict(zip(plan.vars, key)))
                child = ChaseNode(tuple(Atom(p, a) for p, a in new), parent)
                parent.children.append(child)
            self._enqueue(q, self._matches_for(new), d + 1)
            stats.nodes += 1
            return child

        while True:
            closed = None
            if stats.nodes > caps.max_nodes:
                status = NODE_CAP
                break
            if stats.applications >= caps.max_steps:
                status = STEP_CAP
                break
            if deadline is not None and stats.applications % check_every == 0 \
                    and time.perf_counter() > deadline:
                status = TIME_CAP
                break
            if self.stop_on_goal and GOAL in self.facts:
                closed = "goal"
                self._hit_defer = False
            elif self._hit_defer:
                closed = "deferred"
                self._hit_defer = False
            elif caps.max_branch_steps is not None and depth >= caps.max_branch_steps:
                closed = "open"
            else:
                item = self._next(queue, depth)
                if item is None:
                    closed = "terminated"
                else:
                    plan, key = item
                    stats.applications += 1
                    k = len(plan.disj)
                    if k == 1:
                        node = enter(node, plan, key, 0, queue, depth)
                        depth += 1
                    else:
                        order = self._child_order(plan, key, k)
                        if self.fork is None and not stack:
                            self.fork = {"arity": k, "depth": depth, "next_null": self.next_null}
                            if self.probe:
                                status = FORKED
                                break
                            if self.only_branch is not None:
                                order = order[self.only_branch:self.only_branch + 1]
                                if not order:
                                    break
                        rng_state = self.rng.getstate() if self.rng is not None else None
                        frame = _Frame(node, plan, key, queue.copy(), len(self.log), depth, rng_state)
                        frame.next = order  # remaining disjunct indices
                        stack.append(frame)
                        di = order.pop(0)
                        node = enter(node, plan, key, di, queue, depth)
                        depth += 1
                    if depth > stats.max_depth:
                        stats.max_depth = depth
                    continue

            if closed == "deferred":
                deferred.append((tuple(self.log[root_mark:]), queue, node, depth))
            else:
                counterexample = self._close(closed, node, leaves, leaf_goal)
                if counterexample is not None:
                    break

            # backtrack to the nearest split with an unexplored disjunct
            while stack:
                frame = stack[-1]
                if not frame.next:
                    stack.pop()
                    continue
                self._undo(frame.mark)
                if frame.rng_state is not None:
                    self.rng.setstate(frame.rng_state)
                di = frame.next.pop(0)
                if frame.next:
                    queue = frame.queue.copy()
                else:
                    queue = frame.queue
                    stack.pop()
                node = enter(frame.node, frame.plan, frame.key, di, queue, frame.depth)
                depth = frame.depth + 1
                break
            else:
                if not deferred:
                    break
                atoms, queue, node, depth = deferred.popleft()
                self._undo(root_mark)
                for a in atoms:
                    self._insert(a)

        stats.seconds = time.perf_counter() - t0
        return ChaseOutcome(status, root, leaves, stats, leaf_goal, counterexample, self.leaf_kinds)

    def _close(self, closed, node, leaves, leaf_goal):
        """Record a finished branch; return its label if it refutes Goal and the run should stop."""
        stats = self.stats
        stats.leaves += 1
        has_goal = GOAL in self.facts
        if closed == "goal":
            stats.pruned_branches += 1
        elif closed == "open":
            stats.open_branches += 1
        if has_goal:
            stats.goal_leaves += 1
        if node is not None:
            node.kind = closed
        if self.keep_leaves:
            leaves.append(Interpretation(self.facts))
            leaf_goal.append(has_goal)
            self.leaf_kinds.append(closed)
        if closed == "terminated" and not has_goal and self.stop_on_counterexample:
            return Interpretation(self.facts)
        return None


def run_chase(rs: RuleSet, db: Iterable, strategy: Strategy = Strategy(),
              caps: Caps | None = None, **options) -> ChaseOutcome:
    """Run the restricted chase and return the (possibly capped) tree."""
    return ChaseEngine(rs, db, strategy, caps, **options).run()


def _flatten(root: ChaseNode | None) -> list:
    out: list = []
    if root is None:
        return out
    index = {}
    for n in root.walk():
        index[id(n)] = len(out)
        parent = index[id(n.parent)] if n.parent is not None else -1
        out.append((parent, n.delta, n.applied, n.kind))
    return out


def _unflatten(flat: list, shift) -> ChaseNode | None:
    nodes: list[ChaseNode] = []
    for parent, delta, applied, kind in flat:
        p = nodes[parent] if parent >= 0 else None
        n = ChaseNode(tuple(Atom(q, tuple(shift(t) for t in args)) for q, args in delta), p)
        if applied is not None:
            n.applied = (applied[0], {v: shift(t) for v, t in applied[1].items()})
        n.kind = kind
        if p is not None:
            p.children.append(n)
        nodes.append(n)
    return nodes[0] if nodes else None


def _branch_worker(args):
    rs, db, strategy, caps, options, branch = args
    engine = ChaseEngine(rs, db, strategy, caps, only_branch=branch, **options)
    out = engine.run()
    return (out.status, _flatten(out.tree), list(out.leaves), out.leaf_goal, out.leaf_kinds,
            out.stats, engine.fork, engine.next_null)


def parallel_chase(rs: RuleSet, db: Iterable, strategy: Strategy = Strategy(),
                   caps: Caps | None = None, jobs: int = 2, **options) -> ChaseOutcome:
    """Explore the children of the first split in separate processes.

    Each worker replays the deterministic prefix and then keeps one child.
    Subtree k's nulls are shifted past those used by subtrees before it, so
    a run that hits no cap gives the same tree, leaves and statistics as the
    single-process run (apart from timings). Caps apply per worker.
    """
    from concurrent.futures import ProcessPoolExecutor

    caps = caps or Caps()
    if options.get("defer_on") is not None or options.get("stop_on_counterexample"):
        raise ValueError("parallel runs support neither deferral nor early counterexamples")
    t0 = time.perf_counter()
    probe = ChaseEngine(rs, db, strategy, caps, probe=True, record_tree=False, keep_leaves=False,
                        **{k: v for k, v in options.items() if k not in ("record_tree", "keep_leaves")})
    first = probe.run()
    if first.status != FORKED or jobs <= 1:
        return run_chase(rs, db, strategy, caps, **options)
    k = probe.fork["arity"]
    work = [(rs, Interpretation(db), strategy, caps, options, i) for i in range(k)]
    with ProcessPoolExecutor(max_workers=min(jobs, k)) as pool:
        parts = list(pool.map(_branch_worker, work))
    fork = probe.fork
    n0, depth = fork["next_null"], fork["depth"]
    stats = Stats(nodes=0)
    status = TERMINATED
    leaves, leaf_goal, kinds = [], [], []
    root = None
    offset = 0
    for i, (st, flat, lv, lg, lk, s, _, next_null) in enumerate(parts):
        def shift(t, off=offset):
            return t + off if isinstance(t, int) and t >= n0 else t

        if status == TERMINATED and st != TERMINATED:
            status = st
        tree = _unflatten(flat, shift)
        if tree is not None:
            split = tree
            for _ in range(depth):
                split = split.children[0]
            if root is None:
                root, split0 = tree, split
            else:
                for child in split.children:
                    child.parent = split0
                    split0.children.append(child)
        leaves += [Interpretation(Atom(p, tuple(shift(t) for t in a)) for p, a in leaf) for leaf in lv]
        leaf_goal += lg
        kinds += lk
        prefix = 0 if i == 0 else depth + 1
        stats.nodes += s.nodes - prefix
        stats.applications += s.applications - prefix
        stats.max_depth = max(stats.max_depth, s.max_depth)
        for f in ("leaves", "goal_leaves", "open_branches", "pruned_branches"):
            setattr(stats, f, getattr(stats, f) + getattr(s, f))
        offset += next_null - n0
    if status == TERMINATED and stats.nodes > caps.max_nodes:
        status = NODE_CAP
    stats.seconds = time.perf_counter() - t0
    return ChaseOutcome(status, root, leaves, stats, leaf_goal, None, kinds)


def goal_entailed(outcome: ChaseOutcome) -> bool:
    if not outcome.terminated:
        raise NotTerminated(outcome.status)
    if outcome.leaf_goal:
        return all(outcome.leaf_goal)
    return outcome.stats.goal_leaves == outcome.stats.leaves


# verdict search

ENTAILED = "ENTAILED"
NOT_ENTAILED = "NOT-ENTAILED"
UNKNOWN = "UNKNOWN"


@dataclass
class Verdict:
    status: str
    outcome: ChaseOutcome

    @property
    def decided(self) -> bool:
        return self.status != UNKNOWN


def decide_goal(rs: RuleSet, db: Iterable, strategy: Strategy = Strategy(),
                caps: Caps | None = None, reverse_children: bool = True,
                defer_on: tuple | None = None, shadows: Mapping[str, Rule] | None = None) -> Verdict:
    """Decide Goal entailment without building the whole tree.

    Branches stop as soon as Goal appears (Goal persists along a branch), and
    the search stops at the first finished branch without Goal, whose label is
    a model of the rules and the database that refutes Goal. Branches cut by
    ``caps.max_branch_steps`` leave the verdict UNKNOWN unless a refuting
    branch turns up elsewhere. Branches deriving ``defer_on`` are explored
    last and ``shadows`` reorders children (see ChaseEngine); both only
    change how soon a refuting branch is found, never the verdict.
    """
    out = run_chase(rs, db, strategy, caps, record_tree=False, keep_leaves=False,
                    stop_on_goal=True, stop_on_counterexample=True,
                    reverse_children=reverse_children, defer_on=defer_on, shadows=shadows)
    if out.counterexample is not None:
        return Verdict(NOT_ENTAILED, out)
    if out.status == TERMINATED and out.stats.open_branches == 0:
        return Verdict(ENTAILED, out)
    return Verdict(UNKNOWN, out)


# generic semantics, independent of the engine

def is_applicable(rule: Rule, s: Mapping[str, int], i: Iterable) -> bool:
    index = i if isinstance(i, AtomIndex) else AtomIndex(i)
    facts = {(p, a) for p, lst in index.by_pred.items() for a in lst}
    if set(s) != set(rule.body_vars()):
        raise PreconditionViolated("substitution must cover exactly the body variables")
    for p, args in rule.body:
        if (p, tuple(s[t] for t in args)) not in facts:
            raise PreconditionViolated(f"body atom {p}{args} not matched")
    for d in rule.disjuncts:
        for _ in match_patterns(d.atoms, index, s):
            return False
    return True


def applicable_pairs(rs: RuleSet, i: Iterable) -> list[tuple[str, dict]]:
    index = i if isinstance(i, AtomIndex) else AtomIndex(i)
    out = []
    for r in rs:
        for s in enumerate_matches(r.body, index):
            if is_applicable(r, s, index):
                out.append((r.label, s))
    return out


def check_model(i: Iterable, rs: RuleSet) -> bool:
    return not applicable_pairs(rs, i)


# tree export

def write_tree_json(root: ChaseNode, fh) -> None:
    """Stream the tree as nested JSON without recursion."""
    def head(n: ChaseNode) -> str:
        rec = {"label_delta": [format_atom(a) for a in n.delta]}
        if n.applied:
            rec["applied_rule"] = n.applied[0]
            rec["substitution"] = n.applied[1]
        else:
            rec["applied_rule"] = None
            rec["substitution"] = None
        if n.kind:
            rec["leaf"] = n.kind
        return json.dumps(rec, sort_keys=True)[:-1] + ', "children": ['

    stack: list = [(root, 0)]
    fh.write(head(root))
    while stack:
        n, k = stack.pop()
        if k < len(n.children):
            if k:
                fh.write(", ")
            stack.append((n, k + 1))
            child = n.children[k]
            fh.write(head(child))
            stack.append((child, 0))
        else:
            fh.write("]}")
    fh.write("\n")


def tree_json(root: ChaseNode) -> str:
    buf = io.StringIO()
    write_tree_json(root, buf)
    return buf.getvalue()
