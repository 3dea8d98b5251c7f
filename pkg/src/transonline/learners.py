"""Learner strategies.

The splitting-experts learner keeps a pool of experts ``(S, u, H)``: a danger
zone ``S`` of prefix instances that might still be on the target's path, the
deepest node ``u`` known or assumed to be on that path, and a version space
``H``.  Prediction is a weighted majority over the pool.  Every weight is a
power of two (an erring expert loses half its mass, split evenly between the
one or two experts it turns into), so weights are stored as exponents and all
bookkeeping is exact.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .engine import LearnerStrategy
from .errors import ExpertCapExceeded
from .hypotheses import BitTable, HypothesisClass, VersionSpace, _ldim_bits, as_version_space, ldim
from .treebits import ROOT, NodeId, descendant_side, is_ancestor, iter_nodes

DEFAULT_EXPERT_CAP = 1 << 20


# --------------------------------------------------------------------------- halving


def halving_predict(vs: VersionSpace, x: NodeId) -> int:
    if not vs:
        return 0
    return int(2 * vs.count_ones(x) >= len(vs))


def halving_update(vs: VersionSpace, x: NodeId, y: int) -> VersionSpace:
    return vs.restrict(x, y)


class HalvingLearner(LearnerStrategy):
    def __init__(self, cls_or_vs):
        self.initial = as_version_space(cls_or_vs)
        self.vs = self.initial

    def begin(self, sequence):
        self.vs = self.initial

    def predict(self, t, x):
        return halving_predict(self.vs, x)

    def observe(self, t, x, y):
        self.vs = halving_update(self.vs, x, y)


# --------------------------------------------------------------------------- SOA


def soa_predict(vs: VersionSpace, domain: Sequence[NodeId], x: NodeId) -> int:
    """Label whose restriction keeps the larger Littlestone dimension (ties go to 1)."""
    zeros, ones = vs.split(x)
    score0 = ldim(zeros, domain)
    score1 = ldim(ones, domain)
    return int(score1 >= score0)


class SOALearner(LearnerStrategy):
    """Standard optimal algorithm on small explicit instances.

    Works on a bitset view of the class so every ldim query shares one memo.
    """

    def __init__(self, cls_or_vs, domain: Sequence[NodeId] | None = None):
        vs = as_version_space(cls_or_vs)
        self.domain = list(iter_nodes(vs.cls.d)) if domain is None else list(domain)
        ldim(vs, self.domain)  # budget guard
        points = list(self.domain)
        self._table = BitTable(vs, points)
        self._memo: dict[int, int] = {}
        self._extra: dict[NodeId, int] = {}
        self.alive = self._table.full

    def _ones(self, x: NodeId) -> int:
        if x in self._extra:
            return self._extra[x]
        try:
            return self._table.ones[self._table.points.index(x)]
        except ValueError:
            from .hypotheses import _bits_to_int

            self._extra[x] = _bits_to_int(self._table.vs.labels(x))
            return self._extra[x]

    def _score(self, alive: int) -> int:
        return -1 if alive == 0 else _ldim_bits(self._table, alive, self._memo)

    def begin(self, sequence):
        self.alive = self._table.full

    def predict(self, t, x):
        ones = self._ones(x)
        return int(self._score(self.alive & ones) >= self._score(self.alive & ~ones))

    def observe(self, t, x, y):
        ones = self._ones(x)
        self.alive = self.alive & ones if y else self.alive & ~ones


# --------------------------------------------------------------------------- experts


@dataclass(frozen=True)
class ExpertState:
    S: frozenset
    u: NodeId
    H: VersionSpace
    weight_exp: int = 0  # weight is 2 ** -weight_exp
    # instrumentation: path assumptions made along the ancestry, and mistakes made by it
    assumptions: tuple = ()
    lineage_mistakes: int = 0

    @property
    def weight(self) -> Fraction:
        return Fraction(1, 1 << self.weight_exp)


def expert_prediction(e: ExpertState, x: NodeId, halving_threshold: int) -> int:
    if len(e.H) <= halving_threshold:
        return halving_predict(e.H, x)
    side = descendant_side(x, e.u)
    if side is not None:
        return side
    ones = sum(1 for v in e.S if descendant_side(x, v) == 1)
    return int(3 * ones > len(e.S))


def expert_basic_update(e: ExpertState, x: NodeId, y: int) -> ExpertState:
    return replace(e, H=halving_update(e.H, x, y))


def expert_extended_update(e: ExpertState, x: NodeId, y: int, halving_threshold: int) -> tuple[ExpertState, ...]:
    """Update an expert that just erred on (x, y); returns one or two experts.

    Weights are left to the caller.
    """
    if len(e.H) <= halving_threshold:
        return (e,)
    sides = {v: descendant_side(x, v) for v in e.S}
    wrong_side = [v for v, b in sides.items() if b == 1 - y]
    if 3 * len(wrong_side) > len(e.S):
        return (replace(e, S=e.S.difference(wrong_side)),)
    h_off, h_on = e.H.on_path_split(x)
    e_off = replace(e, H=h_off, assumptions=e.assumptions + ((x, False),))
    e_on = replace(
        e,
        S=frozenset(v for v, b in sides.items() if b is not None),
        u=x if is_ancestor(e.u, x) else e.u,
        H=h_on,
        assumptions=e.assumptions + ((x, True),),
    )
    return (e_off, e_on)


def default_halving_threshold(d: int) -> int:
    return 1 << math.ceil(math.sqrt(d))


def default_tmax(d: int, n: int) -> int:
    return min(n, 2 * default_halving_threshold(d))


@dataclass
class RoundStats:
    t: int
    mistake: bool
    weight_before: Fraction
    weight_after: Fraction
    pool_size: int
    consistent_experts: int | None = None
    violations: list = field(default_factory=list)


class TransductiveLearner(LearnerStrategy):
    """Weighted majority over splitting experts.

    If ``target`` (a member index of the class) is given, every round checks the
    assumption-consistent expert invariants against that hypothesis and records
    violations in ``stats``.
    """

    def __init__(
        self,
        cls: HypothesisClass,
        tmax: int | None = None,
        halving_threshold: int | None = None,
        expert_cap: int = DEFAULT_EXPERT_CAP,
        target: int | None = None,
    ):
        self.cls = cls
        self.d = cls.d
        self.tmax_param = tmax
        self.halving_threshold = default_halving_threshold(cls.d) if halving_threshold is None else halving_threshold
        self.expert_cap = expert_cap
        if self.halving_threshold < 0 or expert_cap < 1 or (tmax is not None and tmax < 1):
            raise ValueError("learner parameters must be positive")
        self.target = target
        self._target_path = None
        if target is not None:
            path = cls.path_node_codes
            idx = np.array([target], dtype=np.int64)
            self._target_path = {NodeId(k, int(path(k, idx)[0])) for k in range(cls.d + 1)}
        self.pool: list[ExpertState] = []
        self.stats: list[RoundStats] = []
        self._preds: list[int] = []

    def begin(self, sequence):
        if sequence is None:
            raise ValueError("the transductive learner needs the sequence up front")
        self.sequence = tuple(sequence)
        n = len(self.sequence)
        self.tmax = default_tmax(self.d, n) if self.tmax_param is None else min(self.tmax_param, n)
        first = ExpertState(frozenset(self.sequence[: self.tmax]), ROOT, self.cls.version_space())
        self.pool = [first]
        self.stats = []
        self.max_pool = 1
        self.initial_weight = Fraction(1)
        if self._target_path is not None:
            self._check_target(0)

    def total_weight(self) -> Fraction:
        return _weight_sum(self.pool)

    def predict(self, t, x):
        self._preds = [expert_prediction(e, x, self.halving_threshold) for e in self.pool]
        if len(self.pool) == 1:
            return self._preds[0]
        top = max(e.weight_exp for e in self.pool)
        total = ones = 0
        for e, p in zip(self.pool, self._preds):
            w = 1 << (top - e.weight_exp)
            total += w
            if p:
                ones += w
        return int(2 * ones >= total)

    def observe(self, t, x, y):
        if not self._preds:
            self.predict(t, x)
        before = self.total_weight()
        new_pool: list[ExpertState] = []
        ones_weight = Fraction(0)
        for e, p in zip(self.pool, self._preds):
            if p:
                ones_weight += e.weight
            e = expert_basic_update(e, x, y)
            if p == y:
                new_pool.append(e)
                continue
            updated = expert_extended_update(e, x, y, self.halving_threshold)
            extra = 1 if len(updated) == 1 else 2
            for child in updated:
                new_pool.append(
                    replace(child, weight_exp=child.weight_exp + extra, lineage_mistakes=child.lineage_mistakes + 1)
                )
        y_hat = int(2 * ones_weight >= before)
        if len(new_pool) > self.expert_cap:
            raise ExpertCapExceeded(f"expert pool reached {len(new_pool)} at round {t} (cap {self.expert_cap})")
        self.pool = new_pool
        self.max_pool = max(self.max_pool, len(new_pool))
        self._preds = []
        self.stats.append(RoundStats(t, y_hat != y, before, self.total_weight(), len(new_pool)))
        if self._target_path is not None:
            self._check_target(t)

    def best_expert(self) -> ExpertState:
        return min(self.pool, key=lambda e: e.weight_exp)

    def consistent_experts(self) -> list[ExpertState]:
        """Experts whose path assumptions all hold for the target (instrumented runs only)."""
        path = self._target_path
        if path is None:
            raise ValueError("no target was given")
        return [e for e in self.pool if all((v in path) == on for v, on in e.assumptions)]

    def _check_target(self, t: int) -> None:
        path = self._target_path
        consistent = self.consistent_experts()
        problems = []
        if len(consistent) != 1:
            problems.append(f"{len(consistent)} assumption-consistent experts")
        for e in consistent:
            if e.u not in path:
                problems.append(f"u={str(e.u)!r} is off the target path")
            future = self.sequence[t : self.tmax]
            missing = [v for v in future if v in path and not is_ancestor(v, e.u) and v not in e.S]
            if missing:
                problems.append(f"danger zone misses on-path nodes {[str(v) for v in missing]}")
        if t == 0:
            self.initial_problems = problems
            self.initial_consistent = len(consistent)
            return
        self.stats[-1].consistent_experts = len(consistent)
        self.stats[-1].violations = problems


def _weight_sum(pool: Sequence[ExpertState]) -> Fraction:
    if not pool:
        return Fraction(0)
    top = max(e.weight_exp for e in pool)
    return Fraction(sum(1 << (top - e.weight_exp) for e in pool), 1 << top)


def transductive_learner(cls: HypothesisClass, d: int | None = None, sequence=None, **params) -> TransductiveLearner:
    learner = TransductiveLearner(cls, **params)
    if sequence is not None:
        learner.begin(sequence)
    return learner


# --------------------------------------------------------------------------- baselines


class ConstantLearner(LearnerStrategy):
    def __init__(self, bit: int):
        self.bit = bit

    def predict(self, t, x):
        return self.bit


class RandomLearner(LearnerStrategy):
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def begin(self, sequence):
        self.rng = random.Random(self.seed)

    def predict(self, t, x):
        return self.rng.getrandbits(1)


class LazyConsistentLearner(LearnerStrategy):
    """Majority vote of a private version space that is only pruned on mistakes."""

    def __init__(self, cls_or_vs):
        self.initial = as_version_space(cls_or_vs)
        self.vs = self.initial

    def begin(self, sequence):
        self.vs = self.initial
        self._last = None

    def predict(self, t, x):
        self._last = halving_predict(self.vs, x)
        return self._last

    def observe(self, t, x, y):
        if self._last != y:
            self.vs = self.vs.restrict(x, y)


BASELINES = ("zero", "one", "random", "lazy")
LEARNER_NAMES = ("halving", "soa", "transductive") + BASELINES


def make_baseline(kind: str, seed: int = 0, cls: HypothesisClass | None = None) -> LearnerStrategy:
    kind = kind.lower()
    if kind in ("zero", "alwayszero"):
        return ConstantLearner(0)
    if kind in ("one", "alwaysone"):
        return ConstantLearner(1)
    if kind in ("random", "seededrandom"):
        return RandomLearner(seed)
    if kind in ("lazy", "lazyconsistent"):
        if cls is None:
            raise ValueError("the lazy consistent learner needs a class")
        return LazyConsistentLearner(cls)
    raise ValueError(f"unknown baseline {kind!r}")


def make_learner(name: str, cls: HypothesisClass, seed: int = 0, **params) -> LearnerStrategy:
    if name == "halving":
        return HalvingLearner(cls)
    if name == "soa":
        return SOALearner(cls, params.get("domain"))
    if name == "transductive":
        keep = {k: v for k, v in params.items() if k in ("tmax", "halving_threshold", "expert_cap") and v is not None}
        return TransductiveLearner(cls, **keep)
    if name in BASELINES:
        return make_baseline(name, seed, cls)
    raise ValueError(f"unknown learner {name!r}; choose from {', '.join(LEARNER_NAMES)}")
