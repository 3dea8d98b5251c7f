"""Sweep runner, strategy factories and bit-exact result emission."""
from __future__ import annotations

import csv
import io
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .adversaries import BalancedRatioAdversary, BalancedRatioParams, ScriptedAdversary, load_scripted
from .engine import Transcript, play_transductive
from .hypotheses import (
    HypothesisClass,
    SparseClass,
    eval_hypothesis,
    full_class,
    domain_nodes,
    random_explicit_class,
    read_explicit_table,
)
from .learners import LEARNER_NAMES, make_learner
from .treebits import NodeId, iter_nodes, node_from_index

CSV_HEADER = ("d", "seed", "learner", "adversary", "n", "mistakes", "forced", "sqrt_d", "ratio", "wall_ms", "error")
TARGET_ADVERSARIES = ("target-path", "target-bfs", "target-random")
ADVERSARY_NAMES = ("balanced",) + TARGET_ADVERSARIES


# --------------------------------------------------------------------------- factories


def parse_params(text: str) -> dict[str, str]:
    """``"a=1,b=x"`` -> ``{"a": "1", "b": "x"}``."""
    out = {}
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_class_spec(spec: str) -> tuple[HypothesisClass, list[NodeId]]:
    """Build a class from a generator spec and return it with its domain.

    ``sparse:d=4,seed=1[,bias=2]``, ``random:points=5,members=12,seed=3``,
    ``full:points=3`` or ``file:<path>`` (explicit table).
    """
    kind, _, rest = spec.partition(":")
    if kind == "file":
        cls = read_explicit_table(rest)
        return cls, list(iter_nodes(cls.d))
    p = parse_params(rest)
    if kind == "sparse":
        bias = p.get("bias")
        cls = SparseClass(int(p["d"]), None if bias is None else int(bias), int(p.get("seed", 0)))
        return cls, list(iter_nodes(cls.d))
    if kind == "random":
        rng = random.Random(int(p.get("seed", 0)))
        return random_explicit_class(rng, int(p["points"]), int(p["members"]))
    if kind == "full":
        d, points = domain_nodes(int(p["points"]))
        return full_class(points, d), points
    raise ValueError(f"unknown class generator {kind!r}; use sparse, random, full or file")


def pick_target(cls: HypothesisClass, seed: int) -> int:
    return random.Random(f"target:{seed}").randrange(len(cls))


def target_sequence(cls: HypothesisClass, kind: str, seed: int, n: int | None = None) -> list[NodeId]:
    """Instance sequences for the scripted realizable adversaries.

    * ``target-path``: the target's root-to-leaf path, each node followed by its sibling;
    * ``target-bfs``: the first n nodes of the tree in breadth-first order;
    * ``target-random``: n nodes drawn uniformly from the tree.
    """
    d = cls.d
    h = cls[pick_target(cls, seed)]
    rng = random.Random(f"{kind}:{seed}")
    size = (1 << (d + 1)) - 1
    if kind == "target-path":
        seq = []
        u = NodeId(0, 0)
        for _ in range(d + 1):
            seq.append(u)
            if u.depth:
                seq.append(NodeId(u.depth, u.bits ^ 1))
            if u.depth == d:
                break
            u = NodeId(u.depth + 1, (u.bits << 1) | eval_hypothesis(h, u))
        return seq if n is None else seq[:n]
    n = 4 * (d + 1) if n is None else n
    if kind == "target-bfs":
        return [node_from_index(i) for i in range(min(n, size))]
    if kind == "target-random":
        return [node_from_index(rng.randrange(size)) for _ in range(n)]
    raise ValueError(f"unknown scripted adversary {kind!r}")


def target_adversary(cls: HypothesisClass, kind: str, seed: int, n: int | None = None) -> ScriptedAdversary:
    """Scripted adversary labeling a fixed sequence by a seeded class member."""
    h = cls[pick_target(cls, seed)]
    seq = target_sequence(cls, kind, seed, n)
    return ScriptedAdversary(seq, labels=[eval_hypothesis(h, x) for x in seq])


def balanced_params(d: int, params: dict) -> BalancedRatioParams:
    base = BalancedRatioParams.default(d, Fraction(params.get("c", 2)))
    eps = Fraction(params["eps"]) if "eps" in params else base.epsilon
    M = int(params["M"]) if "M" in params else base.M
    return BalancedRatioParams(eps, M, base.lower_bound_factor)


def make_adversary(name: str, cls: HypothesisClass, seed: int = 0, **params):
    """``balanced`` (params eps, M, c), ``target-*`` (param n) or ``scripted:<file>``."""
    if name == "balanced":
        return BalancedRatioAdversary(cls, cls.d, balanced_params(cls.d, params))
    if name in TARGET_ADVERSARIES:
        n = params.get("n")
        return target_adversary(cls, name, seed, None if n is None else int(n))
    if name.startswith("scripted:"):
        return load_scripted(name.split(":", 1)[1])
    raise ValueError(f"unknown adversary {name!r}; choose from {', '.join(ADVERSARY_NAMES)} or scripted:<file>")


def split_named(text: str) -> tuple[str, dict]:
    """``"balanced(eps=1/4,M=1)"`` -> ``("balanced", {"eps": "1/4", "M": "1"})``."""
    text = text.strip()
    if text.endswith(")") and "(" in text:
        name, _, rest = text[:-1].partition("(")
        return name, parse_params(rest)
    return text, {}


def _learner_params(params: dict) -> dict:
    return {k: int(v) for k, v in params.items()}


# --------------------------------------------------------------------------- sweep


@dataclass
class SweepSpec:
    d_values: list[int]
    seeds: list[int]
    learners: list[str] = field(default_factory=lambda: ["transductive"])
    adversaries: list[str] = field(default_factory=lambda: ["balanced"])
    repetitions: int = 1
    workers: int = 1
    strict: bool = False
    out: str | None = None

    def __post_init__(self):
        if not self.d_values or not self.seeds:
            raise ValueError("a sweep needs at least one d and one seed")
        if self.repetitions < 1 or self.workers < 1:
            raise ValueError("repetitions and workers must be positive")
        for text in self.learners:
            name, _ = split_named(text)
            if name not in LEARNER_NAMES:
                raise ValueError(f"unknown learner {name!r}")
        for text in self.adversaries:
            name, _ = split_named(text)
            if name not in ADVERSARY_NAMES and not name.startswith("scripted:"):
                raise ValueError(f"unknown adversary {name!r}")

    def cells(self) -> list[tuple[int, int, str, str]]:
        return [
            (d, seed, lrn, adv)
            for d in self.d_values
            for seed in self.seeds
            for lrn in self.learners
            for adv in self.adversaries
        ]


@dataclass
class ResultRow:
    d: int
    seed: int
    learner: str
    adversary: str
    n: int | None = None
    mistakes: int | None = None
    forced: int | None = None
    sqrt_d: str = ""
    ratio: str = ""
    wall_ms: int = 0
    error: str = ""

    def sort_key(self):
        return (self.d, self.seed, self.learner, self.adversary)

    def as_list(self) -> list[str]:
        return ["" if v is None else str(v) for v in (getattr(self, f.name) for f in fields(self))]


def _fmt6(x: float) -> str:
    return f"{x:.6f}"


def play_cell(d: int, seed: int, learner: str, adversary: str, strict: bool = False) -> tuple[Transcript, HypothesisClass]:
    cls = SparseClass(d, seed=seed)
    lname, lparams = split_named(learner)
    aname, aparams = split_named(adversary)
    adv = make_adversary(aname, cls, seed, **aparams)
    lrn = make_learner(lname, cls, seed, **_learner_params(lparams))
    return play_transductive(cls, lrn, adv, strict=strict), cls


def run_cell(cell: tuple[int, int, str, str], strict: bool = False, repetitions: int = 1) -> ResultRow:
    d, seed, learner, adversary = cell
    row = ResultRow(d, seed, learner, adversary, sqrt_d=_fmt6(math.sqrt(d)))
    times = []
    try:
        for _ in range(repetitions):
            start = time.perf_counter()
            tr, _ = play_cell(d, seed, learner, adversary, strict)
            times.append((time.perf_counter() - start) * 1000)
        row.n = len(tr.rounds)
        row.mistakes = tr.mistakes
        row.forced = tr.forced
        row.ratio = _fmt6(tr.mistakes / math.sqrt(d)) if d else ""
    except Exception as exc:  # a failing cell becomes an error row
        row.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    times.sort()
    row.wall_ms = round(times[len(times) // 2]) if times else 0
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec) -> list[ResultRow]:
    jobs = [(cell, spec.strict, spec.repetitions) for cell in spec.cells()]
    if spec.workers == 1 or len(jobs) <= 1:
        rows = [_run_cell_args(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_cell_args, jobs))
    return sorted(rows, key=ResultRow.sort_key)


# --------------------------------------------------------------------------- emission


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def strip_wall_ms(text: str) -> str:
    """CSV text with the wall_ms column blanked, for determinism comparisons."""
    col = CSV_HEADER.index("wall_ms")
    out = []
    for rec in csv.reader(io.StringIO(text)):
        if rec and rec[0] != "d":
            rec[col] = ""
        out.append(rec)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(out)
    return buf.getvalue()


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(rows: Sequence[ResultRow], path) -> None:
    _write_text(path, rows_to_csv(rows))


def emit_transcript_json(transcript: Transcript, path) -> None:
    _write_text(path, transcript.to_json() + "\n")


def read_transcript_json(path) -> Transcript:
    return Transcript.from_json(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------- config


def parse_int_list(text: str) -> list[int]:
    """``"1,3,5-7"`` -> ``[1, 3, 5, 6, 7]`` (nonnegative values only)."""
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok:
            lo, hi = tok.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return out


def split_list(text: str) -> list[str]:
    """Comma-separated names; commas inside parentheses do not split."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            if cur.strip():
                out.append(cur.strip())
            cur = ""
            continue
        depth += (ch == "(") - (ch == ")")
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def read_config(path) -> dict[str, str]:
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored, dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def sweep_spec_from(values: dict) -> SweepSpec:
    """Build a SweepSpec from string-or-typed values (config file merged with CLI flags)."""

    def get(key, conv, default=None):
        v = values.get(key)
        if v is None:
            return default
        return conv(v) if isinstance(v, str) else v

    strict = values.get("strict", False)
    if isinstance(strict, str):
        strict = strict.lower() in ("1", "true", "yes", "on")
    return SweepSpec(
        d_values=get("d_values", parse_int_list, []),
        seeds=get("seeds", parse_int_list, []),
        learners=get("learners", split_list, ["transductive"]),
        adversaries=get("adversaries", split_list, ["balanced"]),
        repetitions=get("repetitions", int, 1),
        workers=get("workers", int, 1),
        strict=strict,
        out=values.get("out"),
    )


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
