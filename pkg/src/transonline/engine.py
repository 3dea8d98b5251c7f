"""Referee for the standard and transductive online games.

Rounds are numbered from 1.  Strategies are plain objects driven by blocking
calls from the referee:

* learner: ``begin(sequence)`` once (``None`` in the standard game), then per
  round ``predict(t, x)`` followed by ``observe(t, x, y)``;
* adversary: ``announce()`` once in the transductive game or
  ``next_instance(t)`` per round in the standard game, then ``label(t, y_hat)``.

Adversaries must be deterministic and deep-copyable; search routines clone
them to probe alternative predictions.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import RealizabilityViolation, SequenceLengthMismatch
from .hypotheses import HypothesisClass, VersionSpace, class_from_descriptor
from .treebits import NodeId

STANDARD = "standard"
TRANSDUCTIVE = "transductive"


class LearnerStrategy:
    def begin(self, sequence: Sequence[NodeId] | None) -> None:
        pass

    def predict(self, t: int, x: NodeId) -> int:
        raise NotImplementedError

    def observe(self, t: int, x: NodeId, y: int) -> None:
        pass


class AdversaryStrategy:
    def announce(self) -> list[NodeId]:
        raise NotImplementedError

    def next_instance(self, t: int) -> NodeId:
        raise NotImplementedError

    def label(self, t: int, y_hat: int) -> int:
        raise NotImplementedError

    def clone(self) -> "AdversaryStrategy":
        return copy.deepcopy(self)

    def state_key(self):
        """Hashable summary of everything that influences future labels, or None if unknown."""
        return None


@dataclass(frozen=True)
class Round:
    x: NodeId
    y_hat: int
    y: int


@dataclass
class Transcript:
    setting: str
    d: int
    rounds: list[Round] = field(default_factory=list)
    sequence: list[NodeId] | None = None
    class_descriptor: dict | None = None
    # not serialized
    version_space: VersionSpace | None = field(default=None, compare=False, repr=False)
    forced: int | None = field(default=None, compare=False)

    @property
    def mistakes(self) -> int:
        return count_mistakes(self)

    def to_dict(self) -> dict:
        out: dict = {"setting": self.setting, "d": self.d}
        if self.sequence is not None:
            out["sequence"] = [str(x) for x in self.sequence]
        out["rounds"] = [{"x": str(r.x), "yhat": r.y_hat, "y": r.y} for r in self.rounds]
        out["mistakes"] = self.mistakes
        out["class"] = self.class_descriptor
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        seq = data.get("sequence")
        rounds = [Round(NodeId.parse(r["x"]), int(r["yhat"]), int(r["y"])) for r in data["rounds"]]
        tr = cls(
            setting=data["setting"],
            d=int(data["d"]),
            rounds=rounds,
            sequence=None if seq is None else [NodeId.parse(s) for s in seq],
            class_descriptor=data.get("class"),
        )
        if "mistakes" in data and data["mistakes"] != tr.mistakes:
            raise ValueError("transcript mistake count does not match its rounds")
        return tr

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))


def count_mistakes(transcript: Transcript) -> int:
    return sum(r.y_hat != r.y for r in transcript.rounds)


def _bit(value, who: str, t: int) -> int:
    if value not in (0, 1):
        raise ValueError(f"{who} produced non-bit {value!r} at round {t}")
    return int(value)


class _Referee:
    def __init__(self, cls: HypothesisClass, strict: bool):
        self.strict = strict
        self.vs = cls.version_space() if strict else None
        self.forced = 0

    def check(self, t: int, x: NodeId, y_hat: int, y: int) -> None:
        if not self.strict:
            return
        zeros, ones = self.vs.split(x)
        if len(zeros) and len(ones) and y != y_hat:
            self.forced += 1
        self.vs = ones if y else zeros
        if not self.vs:
            raise RealizabilityViolation(t)


def play_standard(
    cls: HypothesisClass,
    learner: LearnerStrategy,
    adversary: AdversaryStrategy,
    n: int,
    strict: bool = True,
) -> Transcript:
    if n < 1:
        raise ValueError("a game needs at least one round")
    ref = _Referee(cls, strict)
    tr = Transcript(STANDARD, cls.d, class_descriptor=cls.descriptor())
    learner.begin(None)
    for t in range(1, n + 1):
        x = adversary.next_instance(t)
        y_hat = _bit(learner.predict(t, x), "learner", t)
        y = _bit(adversary.label(t, y_hat), "adversary", t)
        ref.check(t, x, y_hat, y)
        learner.observe(t, x, y)
        tr.rounds.append(Round(x, y_hat, y))
    tr.version_space = ref.vs
    tr.forced = getattr(adversary, "forced_count", ref.forced if strict else None)
    return tr


def play_transductive(
    cls: HypothesisClass,
    learner: LearnerStrategy,
    adversary: AdversaryStrategy,
    n: int | None = None,
    strict: bool = True,
) -> Transcript:
    sequence = list(adversary.announce())
    if n is None:
        n = len(sequence)
    if n < 1:
        raise ValueError("a game needs at least one round")
    if len(sequence) != n:
        raise SequenceLengthMismatch(f"adversary announced {len(sequence)} instances, expected {n}")
    ref = _Referee(cls, strict)
    tr = Transcript(TRANSDUCTIVE, cls.d, sequence=sequence, class_descriptor=cls.descriptor())
    learner.begin(tuple(sequence))
    for t, x in enumerate(sequence, start=1):
        y_hat = _bit(learner.predict(t, x), "learner", t)
        y = _bit(adversary.label(t, y_hat), "adversary", t)
        ref.check(t, x, y_hat, y)
        learner.observe(t, x, y)
        tr.rounds.append(Round(x, y_hat, y))
    tr.version_space = ref.vs
    tr.forced = getattr(adversary, "forced_count", ref.forced if strict else None)
    return tr


def replay_version_space(cls: HypothesisClass, transcript: Transcript) -> VersionSpace:
    vs = cls.version_space()
    for r in transcript.rounds:
        vs = vs.restrict(r.x, r.y)
    return vs


def transcript_class(transcript: Transcript) -> HypothesisClass:
    return class_from_descriptor(transcript.class_descriptor)
