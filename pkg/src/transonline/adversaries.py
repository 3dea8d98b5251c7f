"""Adversary strategies.

``BalancedRatioAdversary`` announces a sequence built by ``construct_sequence``
and labels it greedily: it forces a mistake whenever the live version space is
not too unbalanced at the current node (ratio of 1-labels inside
``[epsilon, 1 - epsilon]``), and otherwise answers with the majority label.
``construct_sequence`` simulates every way that labeling can unfold (branching
only on the first ``M`` balanced nodes) and queues the child of each node that
is on the path of every function in a simulated version space.
"""
from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .engine import AdversaryStrategy
from .hypotheses import BitTable, HypothesisClass, VersionSpace, VersionSpaceSet, _ldim_bits, ldim
from .treebits import ROOT, NodeId, iter_nodes


@dataclass(frozen=True)
class BalancedRatioParams:
    epsilon: Fraction
    M: int
    lower_bound_factor: Fraction = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if not 0 < self.epsilon < Fraction(1, 2):
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.M < 1:
            raise ValueError("M must be at least 1")

    @classmethod
    def default(cls, d: int, lower_bound_factor=2) -> "BalancedRatioParams":
        c = Fraction(lower_bound_factor)
        # 2^(-sqrt(d)/2) rounded to a multiple of 2^-16, kept below 1/2
        eps = Fraction(round(2 ** (-math.sqrt(d) / 2) * (1 << 16)), 1 << 16)
        eps = min(max(eps, Fraction(1, 1 << 16)), Fraction(1, 2) - Fraction(1, 1 << 16))
        return cls(eps, max(1, math.ceil(math.sqrt(d) / c)), c)

    def balanced(self, ones: int, size: int) -> bool:
        """Whether ones/size lies in [epsilon, 1 - epsilon]."""
        p, q = self.epsilon.numerator, self.epsilon.denominator
        return ones * q >= p * size and ones * q <= (q - p) * size


def majority(ones: int, size: int) -> int:
    return int(2 * ones >= size)


@dataclass
class SequencePlan:
    nodes: list[NodeId]
    # per step t (1-based; index 0 is the initial collection): keys of the tracked classes
    tracked: list[frozenset] | None = None
    # branch index string of every tracked class, per step (parallel to `tracked`)
    tracked_branches: list[dict] | None = None
    enqueued: list[NodeId] = field(default_factory=list)


def construct_sequence(
    cls: HypothesisClass,
    d: int | None = None,
    params: BalancedRatioParams | None = None,
    trace: bool = False,
) -> list[NodeId] | SequencePlan:
    d = cls.d if d is None else d
    params = BalancedRatioParams.default(d) if params is None else params
    full = cls.version_space()
    tracked = VersionSpaceSet()
    tracked.add(full, "")
    queue = deque([ROOT])
    in_queue = {ROOT}
    nodes: list[NodeId] = []
    plan = SequencePlan(nodes, [] if trace else None, [] if trace else None)
    plan.enqueued.append(ROOT)

    def snapshot():
        if trace:
            plan.tracked.append(frozenset(vs.key for vs, _ in tracked))
            plan.tracked_branches.append({vs.key: b for vs, b in tracked})

    snapshot()
    while queue:
        x = queue.popleft()
        in_queue.discard(x)
        nodes.append(x)
        nxt = VersionSpaceSet()
        for hb, b in tracked:
            zeros, ones = hb.split(x)
            if params.balanced(len(ones), len(hb)) and len(b) < params.M:
                choices = ((0, b + "0", zeros), (1, b + "1", ones))
            else:
                y = majority(len(ones), len(hb))
                choices = ((y, b, ones if y else zeros),)
            for y, b2, h2 in choices:
                if not h2:
                    continue
                nxt.add(h2, b2)
                if x.depth < d and h2.all_on_path(x):
                    c = NodeId(x.depth + 1, (x.bits << 1) | y)
                    if c not in in_queue:
                        queue.append(c)
                        in_queue.add(c)
                        plan.enqueued.append(c)
        tracked = nxt
        snapshot()
    return plan if trace else nodes


def is_ancestry_closed(sequence: Sequence[NodeId]) -> bool:
    """Every node's ancestors appear no later than the node itself."""
    seen: set[NodeId] = set()
    for x in sequence:
        seen.add(x)
        if any(x.prefix(k) not in seen for k in range(x.depth)):
            return False
    return True


@dataclass
class LabelRecord:
    size_before: int
    size_after: int
    ones: int
    forced: bool
    on_path: bool | None = None


class BalancedRatioAdversary(AdversaryStrategy):
    def __init__(
        self,
        cls: HypothesisClass,
        d: int | None = None,
        params: BalancedRatioParams | None = None,
        sequence: Sequence[NodeId] | None = None,
        track_paths: bool = False,
    ):
        self.cls = cls
        self.d = cls.d if d is None else d
        self.params = BalancedRatioParams.default(self.d) if params is None else params
        self.sequence = list(construct_sequence(cls, self.d, self.params) if sequence is None else sequence)
        self.track_paths = track_paths
        self.reset()

    def reset(self) -> None:
        self.vs = self.cls.version_space()
        self.t = 0
        self.forced_count = 0
        self.records: list[LabelRecord] = []

    def clone(self) -> "BalancedRatioAdversary":
        twin = copy.copy(self)
        twin.records = list(self.records)
        return twin

    def state_key(self):
        return (self.t, self.vs.key)

    def announce(self):
        self.reset()
        return list(self.sequence)

    def next_instance(self, t):
        return self.sequence[t - 1]

    def label(self, t, y_hat):
        x = self.sequence[t - 1]
        zeros, ones = self.vs.split(x)
        size = len(self.vs)
        forced = self.params.balanced(len(ones), size)
        y = 1 - y_hat if forced else majority(len(ones), size)
        on_path = self.vs.all_on_path(x) if self.track_paths else None
        self.vs = ones if y else zeros
        self.t = t
        self.forced_count += forced
        self.records.append(LabelRecord(size, len(self.vs), len(ones), forced, on_path))
        return y


def balanced_ratio_adversary(cls, d=None, params=None, **kw) -> BalancedRatioAdversary:
    return BalancedRatioAdversary(cls, d, params, **kw)


def shrinkage_holds(records: Sequence[LabelRecord], epsilon: Fraction) -> bool:
    """Per-round and cumulative version-space lower bounds, in exact arithmetic."""
    if not records:
        return True
    eps = Fraction(epsilon)
    for r in records:
        factor = eps if r.forced else 1 - eps
        if r.size_after < factor * r.size_before:
            return False
    forced = sum(r.forced for r in records)
    bound = eps**forced * (1 - eps) ** (len(records) - forced) * records[0].size_before
    return records[-1].size_after >= bound


class LittlestoneTreeAdversary(AdversaryStrategy):
    """Standard-game adversary walking a maximal shattered tree.

    While the live Littlestone dimension is positive it presents a point whose
    two restrictions both keep dimension one less, and contradicts the learner.
    """

    def __init__(self, cls_or_vs, domain: Sequence[NodeId] | None = None, n: int | None = None):
        from .hypotheses import as_version_space

        vs = as_version_space(cls_or_vs)
        self.domain = list(iter_nodes(vs.cls.d)) if domain is None else list(domain)
        ldim(vs, self.domain)  # budget guard
        self.n = n
        self._table = BitTable(vs, self.domain)
        self._memo: dict[int, int] = {}
        self.alive = self._table.full
        self.forced_count = 0
        self._current: tuple[int, bool] | None = None

    def _ld(self, alive: int) -> int:
        return -1 if alive == 0 else _ldim_bits(self._table, alive, self._memo)

    def state_key(self):
        return (self.alive, self._current)

    def next_instance(self, t):
        level = self._ld(self.alive)
        if level > 0:
            for p, ones in enumerate(self._table.ones):
                a1, a0 = self.alive & ones, self.alive & ~ones
                if a1 and a0 and min(self._ld(a0), self._ld(a1)) == level - 1:
                    self._current = (p, True)
                    return self.domain[p]
        self._current = (0, False)
        return self.domain[0]

    def label(self, t, y_hat):
        p, forced = self._current
        ones = self._table.ones[p]
        if forced:
            y = 1 - y_hat
            self.forced_count += 1
        else:
            y = int(self.alive & ones != 0)
        self.alive = self.alive & ones if y else self.alive & ~ones
        self._current = None
        return y


def littlestone_tree_adversary(cls, domain=None, n=None) -> LittlestoneTreeAdversary:
    return LittlestoneTreeAdversary(cls, domain, n)


STAR = "*"


class ScriptedAdversary(AdversaryStrategy):
    """Replays a fixed sequence with one of three labeling rules.

    * fixed labels, optionally contradicting the learner on the first ``flip_first`` rounds;
    * a rigid table ``f`` mapping the label history (a bitstring) to ``"0"``,
      ``"1"`` or ``"*"`` (contradict the prediction); ``default`` covers
      histories missing from the table.
    """

    def __init__(
        self,
        sequence: Sequence[NodeId],
        labels: Sequence[int] | None = None,
        flip_first: int = 0,
        table: Mapping[str, str] | None = None,
        default: str | None = None,
    ):
        self.sequence = list(sequence)
        if (labels is None) == (table is None and default is None):
            raise ValueError("give either fixed labels or a rigid table")
        if labels is not None and len(labels) != len(self.sequence):
            raise ValueError("label script and sequence differ in length")
        self.labels = None if labels is None else [int(v) for v in labels]
        self.flip_first = flip_first
        self.table = None if labels is not None else dict(table or {})
        self.default = default
        self.history = ""

    def clone(self):
        return copy.copy(self)

    def state_key(self):
        return (len(self.history), self.history if self.table is not None else None)

    def announce(self):
        self.history = ""
        return list(self.sequence)

    def next_instance(self, t):
        return self.sequence[t - 1]

    def symbol(self, history: str) -> str:
        sym = self.table.get(history, self.default)
        if sym is None:
            raise KeyError(f"rigid table has no entry for history {history!r}")
        return sym

    def label(self, t, y_hat):
        if self.labels is not None:
            y = 1 - y_hat if t <= self.flip_first else self.labels[t - 1]
        else:
            sym = self.symbol(self.history)
            y = 1 - y_hat if sym == STAR else int(sym)
        self.history += str(y)
        return y


def scripted_adversary(sequence, labeling) -> ScriptedAdversary:
    """``labeling``: a label list, ``("flip", k, labels)``, or a mapping for a rigid table."""
    if isinstance(labeling, Mapping):
        return ScriptedAdversary(sequence, table=labeling)
    if isinstance(labeling, tuple) and labeling and labeling[0] == "flip":
        return ScriptedAdversary(sequence, labels=labeling[2], flip_first=labeling[1])
    return ScriptedAdversary(sequence, labels=labeling)


def parse_scripted(text: str) -> ScriptedAdversary:
    """Parse the two-line script format (optional third line ``flip=<k>``)."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise ValueError("scripted adversary needs a sequence line and a labeling line")
    sequence = [NodeId.parse(tok) for tok in lines[0].split(",")]
    spec = lines[1].strip()
    flip = 0
    for extra in lines[2:]:
        extra = extra.strip()
        if extra.startswith("flip="):
            flip = int(extra[5:])
    if spec.startswith("f:"):
        table: dict[str, str] = {}
        default = None
        for tok in spec[2:].replace(",", " ").split():
            hist, sym = tok.rsplit(":", 1) if ":" in tok else tok.split("=", 1)
            if sym not in ("0", "1", STAR):
                raise ValueError(f"bad rigid-table symbol {sym!r}")
            if hist == "default":
                default = sym
            else:
                table["" if hist in ("λ", "-") else hist] = sym
        return ScriptedAdversary(sequence, table=table, default=default)
    labels = [int(c) for c in spec.replace(",", "").replace(" ", "")]
    return ScriptedAdversary(sequence, labels=labels, flip_first=flip)


def format_scripted(adv: ScriptedAdversary) -> str:
    head = ",".join(str(x) for x in adv.sequence)
    if adv.labels is not None:
        body = "".join(map(str, adv.labels))
        return f"{head}\n{body}\n" + (f"flip={adv.flip_first}\n" if adv.flip_first else "")
    pairs = [f"{h}:{s}" for h, s in sorted(adv.table.items(), key=lambda kv: (len(kv[0]), kv[0]))]
    if adv.default is not None:
        pairs.append(f"default:{adv.default}")
    return f"{head}\nf: {' '.join(pairs)}\n"


def load_scripted(path) -> ScriptedAdversary:
    with open(path, encoding="utf-8") as fh:
        return parse_scripted(fh.read())
