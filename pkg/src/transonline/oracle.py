"""Exact game values by exhaustive minimax search on tiny instances.

Alive sets are Python-int bitsets over the class members (see ``BitTable``);
memo tables key on them directly, so equality is checked by the dict itself
on every hash collision.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .engine import AdversaryStrategy
from .errors import BudgetExceeded, ProbeNondeterminism
from .hypotheses import BitTable, VersionSpace, _default_domain, as_version_space
from .treebits import NodeId


@dataclass
class OracleBudget:
    max_hypotheses: int = 1 << 12
    max_domain: int = 64
    max_rounds: int = 8
    max_nodes_expanded: int = 10**8

    def __post_init__(self):
        for name in ("max_hypotheses", "max_domain", "max_rounds", "max_nodes_expanded"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class OracleStats:
    nodes: int = 0
    memo_hits: int = 0


class _Search:
    def __init__(self, budget: OracleBudget | None, memo: bool = True):
        self.budget = budget or OracleBudget()
        self.stats = OracleStats()
        self.use_memo = memo

    def tick(self) -> None:
        self.stats.nodes += 1
        if self.stats.nodes > self.budget.max_nodes_expanded:
            raise BudgetExceeded(f"search expanded more than {self.budget.max_nodes_expanded} nodes")

    def check_class(self, vs: VersionSpace, domain_size: int, rounds: int, check_rounds: bool = True) -> None:
        b = self.budget
        if len(vs) > b.max_hypotheses:
            raise BudgetExceeded(f"{len(vs)} hypotheses exceed the limit {b.max_hypotheses}")
        if domain_size > b.max_domain:
            raise BudgetExceeded(f"{domain_size} domain points exceed the limit {b.max_domain}")
        if check_rounds and rounds > b.max_rounds:
            raise BudgetExceeded(f"{rounds} rounds exceed the limit {b.max_rounds}")


def _round_value(table: BitTable, alive: int, p: int, rest) -> int:
    """min over predictions of max over feasible labels of mistake + continuation."""
    a1 = alive & table.ones[p]
    a0 = alive & ~table.ones[p]
    if not a0 and not a1:
        raise AssertionError("empty version space inside the search")
    if not a1:
        return rest(a0)
    if not a0:
        return rest(a1)
    v0, v1 = rest(a0), rest(a1)
    # predicting y_hat costs 1 when the adversary answers 1 - y_hat
    return min(max(v0, 1 + v1), max(1 + v0, v1))


def trans_value_fixed_seq(
    cls, x: Sequence[NodeId], budget: OracleBudget | None = None, memo: bool = True, stats: OracleStats | None = None
) -> int:
    """Value of the transductive game on the announced sequence x."""
    vs = as_version_space(cls)
    x = list(x)
    search = _Search(budget, memo)
    points = sorted(set(x))
    search.check_class(vs, len(points), len(x), check_rounds=False)
    if not vs:
        raise ValueError("empty class")
    table = BitTable(vs, points)
    where = {p: i for i, p in enumerate(points)}
    seq = [where[p] for p in x]
    cache: dict[tuple[int, int], int] = {}

    def value(i: int, alive: int) -> int:
        if i == len(seq):
            return 0
        key = (i, alive)
        if search.use_memo and key in cache:
            search.stats.memo_hits += 1
            return cache[key]
        search.tick()
        v = _round_value(table, alive, seq[i], lambda a: value(i + 1, a))
        if search.use_memo:
            cache[key] = v
        return v

    out = value(0, table.full)
    if stats is not None:
        stats.nodes, stats.memo_hits = search.stats.nodes, search.stats.memo_hits
    return out


def trans_value(
    cls,
    n: int,
    domain: Sequence[NodeId] | None = None,
    budget: OracleBudget | None = None,
    memo: bool = True,
    stats: OracleStats | None = None,
) -> int:
    """max over all sequences in domain^n of the fixed-sequence value.

    Sequences are enumerated plainly; the memo on (suffix, alive) shares the
    work between sequences with a common tail.
    """
    vs = as_version_space(cls)
    domain = _default_domain(vs) if domain is None else list(domain)
    search = _Search(budget, memo)
    search.check_class(vs, len(domain), n)
    if n == 0:
        return 0
    if not vs:
        raise ValueError("empty class")
    table = BitTable(vs, domain)
    cache: dict[tuple[int, int], int] = {}

    def fixed(suffix: tuple[int, ...], alive: int) -> int:
        if not suffix:
            return 0
        key = (suffix, alive)
        if search.use_memo and key in cache:
            search.stats.memo_hits += 1
            return cache[key]
        search.tick()
        v = _round_value(table, alive, suffix[0], lambda a: fixed(suffix[1:], a))
        if search.use_memo:
            cache[key] = v
        return v

    best = 0
    for seq in itertools.product(range(len(domain)), repeat=n):
        best = max(best, fixed(seq, table.full))
        if best == n:
            break
    if stats is not None:
        stats.nodes, stats.memo_hits = search.stats.nodes, search.stats.memo_hits
    return best


def std_value(
    cls,
    n: int,
    domain: Sequence[NodeId] | None = None,
    budget: OracleBudget | None = None,
    memo: bool = True,
    stats: OracleStats | None = None,
) -> int:
    """Value of the standard game with n rounds, instances chosen adaptively."""
    vs = as_version_space(cls)
    domain = _default_domain(vs) if domain is None else list(domain)
    search = _Search(budget, memo)
    search.check_class(vs, len(domain), n)
    if not vs:
        raise ValueError("empty class")
    table = BitTable(vs, domain)
    cache: dict[tuple[int, int], int] = {}

    def value(alive: int, left: int) -> int:
        if left == 0:
            return 0
        key = (alive, left)
        if search.use_memo and key in cache:
            search.stats.memo_hits += 1
            return cache[key]
        search.tick()
        best = 0
        for p in range(len(domain)):
            v = _round_value(table, alive, p, lambda a: value(a, left - 1))
            if v > best:
                best = v
                if best == left:
                    break
        if search.use_memo:
            cache[key] = best
        return best

    out = value(table.full, n)
    if stats is not None:
        stats.nodes, stats.memo_hits = search.stats.nodes, search.stats.memo_hits
    return out


def forced_mistakes(
    adv: AdversaryStrategy,
    sequence: Sequence[NodeId] | None = None,
    n: int | None = None,
    budget: OracleBudget | None = None,
    memo: bool = True,
    stats: OracleStats | None = None,
) -> int:
    """Fewest mistakes any prediction sequence makes against a fixed deterministic adversary.

    The adversary is cloned at every node and asked for its label under both
    predictions; each answer is requested twice to catch nondeterminism.
    """
    root = adv.clone()
    announced = root.announce()
    if sequence is None:
        sequence = announced
    n = len(sequence) if n is None else n
    search = _Search(budget, memo)
    cache: dict = {}

    def answer(state: AdversaryStrategy, t: int, y_hat: int) -> tuple[int, AdversaryStrategy]:
        a, b = state.clone(), state.clone()
        ya, yb = a.label(t, y_hat), b.label(t, y_hat)
        if ya != yb:
            raise ProbeNondeterminism(f"adversary answered {ya} and {yb} to prediction {y_hat} at round {t}")
        return ya, a

    def value(state: AdversaryStrategy, t: int) -> int:
        if t > n:
            return 0
        skey = state.state_key() if search.use_memo else None
        key = None if skey is None else (t, skey)
        if key is not None and key in cache:
            search.stats.memo_hits += 1
            return cache[key]
        search.tick()
        best = None
        for y_hat in (0, 1):
            y, nxt = answer(state, t, y_hat)
            v = (y != y_hat) + value(nxt, t + 1)
            best = v if best is None else min(best, v)
            if best == 0:
                break
        if key is not None:
            cache[key] = best
        return best

    out = value(root, 1)
    if stats is not None:
        stats.nodes, stats.memo_hits = search.stats.nodes, search.stats.memo_hits
    return out
