"""Shrinking the sequence an adversary needs to force M mistakes.

A rigid adversary answers every round with a label that depends only on the
label history, except at ``*`` entries where it contradicts the prediction.
Any deterministic adversary is turned into one by a middle-man that probes it
with both predictions.  Only the rounds holding a ``*`` reachable with fewer
than M earlier ``*``'s matter for forcing M mistakes; the minimal adversary
plays those rounds and silently feeds prediction 0 to the rigid adversary on
all the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .engine import AdversaryStrategy
from .errors import ProbeNondeterminism
from .treebits import NodeId

STAR = "*"


@dataclass
class RigidTable:
    """Map from reachable label histories (bitstrings shorter than n) to 0, 1 or ``*``."""

    n: int
    entries: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, history: str) -> str:
        return self.entries[history]

    def __contains__(self, history: str) -> bool:
        return history in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def children(self, history: str) -> list[str]:
        if len(history) + 1 >= self.n:
            return []
        sym = self.entries[history]
        nxt = ("0", "1") if sym == STAR else (sym,)
        return [history + b for b in nxt if history + b in self.entries]

    def stars(self) -> int:
        return sum(1 for s in self.entries.values() if s == STAR)

    def is_closed(self) -> bool:
        """Every stored history other than the root has a stored parent that allows it."""
        for h in self.entries:
            if not h:
                continue
            parent = self.entries.get(h[:-1])
            if parent is None or (parent != STAR and parent != h[-1]):
                return False
        return True

    def format(self) -> str:
        rows = sorted(self.entries.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return "\n".join(f"{h or 'λ'} -> {s}" for h, s in rows)


def _probe(adv: AdversaryStrategy, t: int, y_hat: int) -> int:
    a, b = adv.clone(), adv.clone()
    ya, yb = a.label(t, y_hat), b.label(t, y_hat)
    if ya != yb:
        raise ProbeNondeterminism(f"inner adversary answered {ya} and {yb} to the same history at round {t}")
    return ya


def _rigid_symbol(adv: AdversaryStrategy, t: int) -> str:
    if _probe(adv, t, 0) == 0:
        return "0"
    if _probe(adv, t, 1) == 1:
        return "1"
    return STAR


class RigidAdversary(AdversaryStrategy):
    """Middle-man around a deterministic adversary that makes it rigid.

    The inner adversary is asked what it would answer to predictions 0 and 1;
    if it accepts one of them, that prediction is forwarded regardless of what
    the learner said, otherwise the learner's prediction is forwarded.
    """

    def __init__(self, inner: AdversaryStrategy, sequence: Sequence[NodeId]):
        self.inner = inner
        self.sequence = list(sequence)
        self.history = ""
        self.forwarded: list[int] = []

    def clone(self):
        other = RigidAdversary.__new__(RigidAdversary)
        other.inner = self.inner.clone()
        other.sequence = self.sequence
        other.history = self.history
        other.forwarded = list(self.forwarded)
        return other

    def state_key(self):
        # the inner state is a function of the label history alone
        return self.history

    def announce(self):
        self.history = ""
        self.forwarded = []
        return list(self.sequence)

    def next_instance(self, t):
        return self.sequence[t - 1]

    def symbol(self) -> str:
        return _rigid_symbol(self.inner, len(self.history) + 1)

    def label(self, t, y_hat):
        sym = self.symbol()
        y_tilde = y_hat if sym == STAR else int(sym)
        y = self.inner.label(t, y_tilde)
        self.forwarded.append(y_tilde)
        self.history += str(y)
        return y


def extract_table(rigid: RigidAdversary, n: int, star_budget: int | None = None) -> RigidTable:
    """DFS over reachable label histories, not descending past `star_budget` stars."""
    table = RigidTable(n)
    stack = [(rigid.clone(), 0)]
    while stack:
        node, stars = stack.pop()
        h = node.history
        if len(h) >= n:
            continue
        sym = node.symbol()
        table.entries[h] = sym
        below = stars + (sym == STAR)
        if star_budget is not None and below >= star_budget:
            continue
        if sym == STAR:
            for y_hat in (1, 0):
                child = node.clone()
                child.label(len(h) + 1, y_hat)
                stack.append((child, below))
        else:
            child = node.clone()
            child.label(len(h) + 1, int(sym))
            stack.append((child, below))
    return table


def rigidify(
    adv: AdversaryStrategy, sequence: Sequence[NodeId], n: int | None = None, star_budget: int | None = None
) -> tuple[RigidAdversary, RigidTable]:
    """Wrap a deterministic adversary so it becomes rigid, and tabulate its f."""
    sequence = list(sequence)
    n = len(sequence) if n is None else n
    inner = adv.clone()
    inner.announce()
    rigid = RigidAdversary(inner, sequence)
    return rigid, extract_table(rigid, n, star_budget)


def essential_indices(f: RigidTable, M: int) -> list[int]:
    """Rounds t (1-based) with a reachable history of length t-1 at a star and fewer than M stars before it."""
    found: set[int] = set()
    if M <= 0 or "" not in f:
        return []
    stack = [("", 0)]
    while stack:
        h, stars = stack.pop()
        sym = f.entries.get(h)
        if sym is None:
            continue
        if sym == STAR:
            found.add(len(h) + 1)
            stars += 1
            if stars >= M:
                continue
        for c in f.children(h):
            stack.append((c, stars))
    return sorted(found)


def essential_witnesses(f: RigidTable, M: int) -> list[str]:
    """The witness histories themselves; they form a subtree of depth at most M-1."""
    out = []
    stack = [("", 0)]
    while stack:
        h, stars = stack.pop()
        sym = f.entries.get(h)
        if sym is None or stars >= M:
            continue
        if sym == STAR:
            out.append(h)
            stars += 1
        stack.extend((c, stars) for c in f.children(h))
    return sorted(out, key=lambda h: (len(h), h))


class MinimalAdversary(AdversaryStrategy):
    """Plays only the essential rounds of a rigid adversary.

    Round j of the short game is round ``indices[j-1]`` of the long one; the
    rounds skipped in between are answered by the rigid adversary after being
    fed prediction 0.
    """

    def __init__(self, rigid: RigidAdversary, sequence: Sequence[NodeId], indices: Sequence[int]):
        self.base = rigid
        self.full_sequence = list(sequence)
        self.indices = list(indices)
        self.rigid = rigid.clone()
        self.pos = 0

    def clone(self):
        other = MinimalAdversary.__new__(MinimalAdversary)
        other.base = self.base
        other.full_sequence = self.full_sequence
        other.indices = self.indices
        other.rigid = self.rigid.clone()
        other.pos = self.pos
        return other

    def state_key(self):
        return (self.pos, self.rigid.state_key())

    @property
    def sequence(self) -> list[NodeId]:
        return [self.full_sequence[i - 1] for i in self.indices]

    def announce(self):
        self.rigid = self.base.clone()
        self.pos = 0
        return self.sequence

    def next_instance(self, t):
        return self.full_sequence[self.indices[t - 1] - 1]

    def label(self, t, y_hat):
        target = self.indices[t - 1]
        while self.pos + 1 < target:
            self.pos += 1
            self.rigid.label(self.pos, 0)
        self.pos += 1
        return self.rigid.label(self.pos, y_hat)


def minimalize(
    adv: AdversaryStrategy, sequence: Sequence[NodeId], M: int
) -> tuple[list[NodeId], MinimalAdversary]:
    """Subsequence of at most 2^M - 1 instances and an adversary playing it."""
    rigid, table = rigidify(adv, sequence, len(sequence), star_budget=M)
    indices = essential_indices(table, M)
    minimal = MinimalAdversary(rigid, sequence, indices)
    return minimal.sequence, minimal
