"""Hypothesis classes over B_d, version spaces and Littlestone dimension.

Two kinds of class are supported:

* ``SparseClass`` -- the randomized sparse class: member ``i`` is the hypothesis
  ``h_b`` whose branch ``b`` is the (d+1)-bit binary expansion of ``i``.  On its
  own path ``h_b`` follows ``b``; every off-path label is 1 with probability
  exactly ``2**-bias_exp``, drawn from a keyed hash so nothing is stored.
* ``ExplicitClass`` -- a label table with one row per member and one column per
  node (breadth-first order).

Off-path labels use ``prf(seed, branch, node)``::

    mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
             return z ^ (z >> 31)                      (all mod 2**64)
    prf  = mix(mix(mix(seed + 0x9E3779B97F4A7C15) ^ branch) ^ (node.index + 1))
    label = 1  iff  prf % 2**bias_exp == 0
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import BudgetExceeded, DepthOverflow
from .treebits import ROOT, NodeId, check_depth, iter_nodes, node_from_index, tree_size

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

CHUNK = 1 << 22
LDIM_MAX_MEMBERS = 1 << 14
LDIM_MAX_DOMAIN = 1 << 10


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & M64
    z = ((z ^ (z >> 27)) * MIX2) & M64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _mix_jit(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _sparse_label_jit(b, key, d, depth, bits, code, mask):
    if (b >> np.uint64(d + 1 - depth)) == bits:
        return np.uint8((b >> np.uint64(d - depth)) & np.uint64(1))
    z = _mix_jit(_mix_jit(b ^ key) ^ code)
    return np.uint8((z & mask) == np.uint64(0))


@numba.njit(cache=True)
def _sparse_labels_jit(idx, key, d, depth, bits, code, mask, out):
    for i in range(idx.shape[0]):
        out[i] = _sparse_label_jit(np.uint64(idx[i]), key, d, depth, bits, code, mask)
    return out


@numba.njit(cache=True)
def _path_mismatches_jit(lo, hi, key, d, mask):
    bad = 0
    for i in range(lo, hi):
        b = np.uint64(i)
        for k in range(d + 1):
            prefix = b >> np.uint64(d + 1 - k)
            code = np.uint64((1 << k) - 1) + prefix + np.uint64(1)
            if _sparse_label_jit(b, key, d, k, prefix, code, mask) != ((b >> np.uint64(d - k)) & np.uint64(1)):
                bad += 1
                break
    return bad


def prf(seed: int, branch: int, node: NodeId) -> int:
    key = _mix((seed + GOLDEN) & M64)
    return _mix(_mix(key ^ branch) ^ (node.index + 1))


def prf_array(seed: int, branches: np.ndarray, node: NodeId) -> np.ndarray:
    key = np.uint64(_mix((seed + GOLDEN) & M64))
    z = _mix_array(branches.astype(np.uint64) ^ key)
    return _mix_array(z ^ np.uint64(node.index + 1))


def default_bias_exp(d: int) -> int:
    return max(1, round(math.sqrt(d)))


def sparse_thresholds(d: int) -> tuple[int, int]:
    """Default (size threshold for H, size threshold for X) of the class properties."""
    r = math.ceil(math.sqrt(d))
    return 1 << r, r


# --------------------------------------------------------------------------- hypotheses


@dataclass(frozen=True)
class LazyHypothesis:
    d: int
    branch: int
    seed: int
    bias_exp: int

    @property
    def branch_string(self) -> str:
        return format(self.branch, f"0{self.d + 1}b")


@dataclass(frozen=True)
class ExplicitHypothesis:
    d: int
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != tree_size(self.d):
            raise ValueError(f"explicit hypothesis needs {tree_size(self.d)} labels, got {len(self.labels)}")


Hypothesis = LazyHypothesis | ExplicitHypothesis


def eval_hypothesis(h: Hypothesis, x: NodeId) -> int:
    if x.depth > h.d:
        raise DepthOverflow(f"node {str(x)!r} is outside B_{h.d}")
    if isinstance(h, ExplicitHypothesis):
        return h.labels[x.index]
    if (h.branch >> (h.d + 1 - x.depth)) == x.bits:
        return (h.branch >> (h.d - x.depth)) & 1
    return int(prf(h.seed, h.branch, x) & ((1 << h.bias_exp) - 1) == 0)


def path_of(h: Hypothesis) -> tuple[NodeId, ...]:
    u = ROOT
    path = [u]
    for _ in range(h.d):
        u = NodeId(u.depth + 1, (u.bits << 1) | eval_hypothesis(h, u))
        path.append(u)
    return tuple(path)


def materialize(h: Hypothesis) -> ExplicitHypothesis:
    if isinstance(h, ExplicitHypothesis):
        return h
    return ExplicitHypothesis(h.d, tuple(eval_hypothesis(h, x) for x in iter_nodes(h.d)))


# --------------------------------------------------------------------------- classes


class HypothesisClass:
    """Immutable, indexable collection of hypotheses over B_d."""

    d: int

    def __len__(self) -> int:
        raise NotImplementedError

    def __getitem__(self, i: int) -> Hypothesis:
        raise NotImplementedError

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __deepcopy__(self, memo):
        return self

    def labels(self, x: NodeId, idx: np.ndarray) -> np.ndarray:
        """Labels (uint8) of members ``idx`` at node x."""
        raise NotImplementedError

    def path_node_codes(self, depth: int, idx: np.ndarray) -> np.ndarray:
        """``bits`` of the depth-`depth` node on each member's path."""
        raise NotImplementedError

    def on_path(self, x: NodeId, idx: np.ndarray) -> np.ndarray:
        return self.path_node_codes(x.depth, idx) == x.bits

    def all_on_path(self, x: NodeId, idx: np.ndarray) -> bool:
        """Whether x lies on the path of every member in the sorted index array."""
        return bool(np.all(self.on_path(x, idx)))

    def descriptor(self) -> dict:
        raise NotImplementedError

    def version_space(self) -> "VersionSpace":
        return VersionSpace(self, np.arange(len(self), dtype=_index_dtype(len(self))))

    def materialize(self) -> "ExplicitClass":
        table = np.zeros((len(self), tree_size(self.d)), dtype=np.uint8)
        idx = np.arange(len(self), dtype=np.int64)
        for x in iter_nodes(self.d):
            table[:, x.index] = self.labels(x, idx)
        return ExplicitClass(self.d, table)


def _index_dtype(n: int):
    return np.uint32 if n <= (1 << 32) else np.int64


class SparseClass(HypothesisClass):
    def __init__(self, d: int, bias_exp: int | None = None, seed: int = 0):
        check_depth(d)
        if d < 1:
            raise DepthOverflow("the sparse class needs d >= 1")
        if d + 1 > 62:
            raise DepthOverflow("branch strings must fit in a machine word")
        self.d = d
        self.bias_exp = default_bias_exp(d) if bias_exp is None else int(bias_exp)
        if self.bias_exp < 1:
            raise ValueError("bias_exp must be positive")
        self.seed = int(seed) & M64
        self._mask = np.uint64((1 << self.bias_exp) - 1)
        self._key = np.uint64(_mix((self.seed + GOLDEN) & M64))

    def __len__(self) -> int:
        return 1 << (self.d + 1)

    def __getitem__(self, i: int) -> LazyHypothesis:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return LazyHypothesis(self.d, i, self.seed, self.bias_exp)

    def __repr__(self) -> str:
        return f"SparseClass(d={self.d}, bias_exp={self.bias_exp}, seed={self.seed})"

    def labels(self, x: NodeId, idx: np.ndarray) -> np.ndarray:
        if x.depth > self.d:
            raise DepthOverflow(f"node {str(x)!r} is outside B_{self.d}")
        out = np.empty(len(idx), dtype=np.uint8)
        return _sparse_labels_jit(
            idx, self._key, self.d, x.depth, np.uint64(x.bits), np.uint64(x.index + 1), self._mask, out
        )

    def labels_numpy(self, x: NodeId, idx: np.ndarray) -> np.ndarray:
        """Vectorized numpy evaluation, kept as a cross-check for the compiled kernel."""
        if x.depth > self.d:
            raise DepthOverflow(f"node {str(x)!r} is outside B_{self.d}")
        out = np.empty(len(idx), dtype=np.uint8)
        shift_on = np.uint64(self.d + 1 - x.depth)
        shift_bit = np.uint64(self.d - x.depth)
        for lo in range(0, len(idx), CHUNK):
            b = idx[lo:lo + CHUNK].astype(np.uint64)
            off = (prf_array(self.seed, b, x) & self._mask) == 0
            on = (b >> shift_on) == np.uint64(x.bits)
            out[lo:lo + CHUNK] = np.where(on, (b >> shift_bit) & np.uint64(1), off)
        return out

    def path_node_codes(self, depth: int, idx: np.ndarray) -> np.ndarray:
        return idx.astype(np.uint64) >> np.uint64(self.d + 1 - depth)

    def _prefix_range(self, x: NodeId) -> tuple[int, int]:
        shift = self.d + 1 - x.depth
        return x.bits << shift, (x.bits + 1) << shift

    def all_on_path(self, x: NodeId, idx: np.ndarray) -> bool:
        # members whose branch extends x form one contiguous block of indices
        if len(idx) == 0:
            return True
        lo, hi = self._prefix_range(x)
        return lo <= int(idx[0]) and int(idx[-1]) < hi

    def on_path_bounds(self, x: NodeId, idx: np.ndarray) -> tuple[int, int]:
        lo, hi = self._prefix_range(x)
        return int(np.searchsorted(idx, lo)), int(np.searchsorted(idx, hi))

    def path_mismatches(self, lo: int = 0, hi: int | None = None) -> int:
        """Members in [lo, hi) whose labels along their own path differ from their branch.

        Zero means every branch is realized, i.e. the class shatters B_d.
        """
        hi = len(self) if hi is None else hi
        return int(_path_mismatches_jit(lo, hi, self._key, self.d, self._mask))

    def descriptor(self) -> dict:
        return {"kind": "sparse", "d": self.d, "bias_exp": self.bias_exp, "seed": self.seed}


class ExplicitClass(HypothesisClass):
    def __init__(self, d: int, table):
        check_depth(d)
        table = np.asarray(table, dtype=np.uint8)
        if table.ndim != 2 or table.shape[1] != tree_size(d):
            raise ValueError(f"label table must have {tree_size(d)} columns")
        if len(table) < 1:
            raise ValueError("a class needs at least one member")
        if table.max(initial=0) > 1:
            raise ValueError("labels must be bits")
        self.d = d
        self.table = table
        self.table.setflags(write=False)
        paths = np.zeros((len(table), d + 1), dtype=np.int64)
        rows = np.arange(len(table))
        for k in range(d):
            # child bits = parent bits * 2 + label at parent
            parent_index = (1 << k) - 1 + paths[:, k]
            paths[:, k + 1] = paths[:, k] * 2 + table[rows, parent_index]
        self._paths = paths

    def __len__(self) -> int:
        return len(self.table)

    def __getitem__(self, i: int) -> ExplicitHypothesis:
        return ExplicitHypothesis(self.d, tuple(int(v) for v in self.table[i]))

    def __repr__(self) -> str:
        return f"ExplicitClass(d={self.d}, members={len(self)})"

    def labels(self, x: NodeId, idx: np.ndarray) -> np.ndarray:
        if x.depth > self.d:
            raise DepthOverflow(f"node {str(x)!r} is outside B_{self.d}")
        return self.table[idx.astype(np.int64), x.index]

    def path_node_codes(self, depth: int, idx: np.ndarray) -> np.ndarray:
        return self._paths[idx.astype(np.int64), depth]

    def branch_of(self, i: int) -> int:
        """Labels along the member's own path, read as a (d+1)-bit number."""
        b = 0
        for k in range(self.d + 1):
            node_index = (1 << k) - 1 + int(self._paths[i, k])
            b = (b << 1) | int(self.table[i, node_index])
        return b

    def descriptor(self) -> dict:
        return {
            "kind": "explicit",
            "d": self.d,
            "members": ["".join(map(str, row)) for row in self.table.tolist()],
        }


def build_random_class(d: int, bias_exp: int | None = None, seed: int = 0) -> SparseClass:
    return SparseClass(d, bias_exp, seed)


def class_from_descriptor(desc: dict) -> HypothesisClass:
    if desc["kind"] == "sparse":
        return SparseClass(desc["d"], desc["bias_exp"], desc["seed"])
    if desc["kind"] == "explicit":
        rows = [[int(c) for c in row] for row in desc["members"]]
        return ExplicitClass(desc["d"], rows)
    raise ValueError(f"unknown class kind {desc['kind']!r}")


def class_over_points(d: int, points: Sequence[NodeId], label_rows: Iterable[Sequence[int]]) -> ExplicitClass:
    """Explicit class whose members are given on `points` and are 0 elsewhere."""
    rows = []
    for labs in label_rows:
        row = np.zeros(tree_size(d), dtype=np.uint8)
        for p, v in zip(points, labs, strict=True):
            row[p.index] = v
        rows.append(row)
    return ExplicitClass(d, np.array(rows))


def full_class(points: Sequence[NodeId], d: int) -> ExplicitClass:
    """All 2^k labelings of the given k points."""
    k = len(points)
    return class_over_points(d, points, ([(m >> j) & 1 for j in range(k)] for m in range(1 << k)))


def domain_nodes(k: int) -> tuple[int, list[NodeId]]:
    """The smallest tree holding k points, and its first k nodes in BFS order."""
    d = max(0, (k).bit_length() - 1)
    return d, [node_from_index(i) for i in range(k)]


def random_explicit_class(rng: random.Random, n_points: int, n_members: int) -> tuple[ExplicitClass, list[NodeId]]:
    """Random class of distinct labelings over the first `n_points` nodes."""
    d, points = domain_nodes(n_points)
    n_members = min(n_members, 1 << n_points)
    codes = rng.sample(range(1 << n_points), n_members)
    rows = ([(c >> j) & 1 for j in range(n_points)] for c in codes)
    return class_over_points(d, points, rows), points


# --------------------------------------------------------------------------- version spaces


class VersionSpace:
    """Members of a class still alive; restriction never adds members."""

    __slots__ = ("cls", "alive", "_key")

    def __init__(self, cls: HypothesisClass, alive: np.ndarray):
        self.cls = cls
        alive.setflags(write=False)
        self.alive = alive
        self._key = None

    def __len__(self) -> int:
        return len(self.alive)

    def __bool__(self) -> bool:
        return len(self.alive) > 0

    def __deepcopy__(self, memo):
        return self

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VersionSpace)
            and other.cls is self.cls
            and np.array_equal(other.alive, self.alive)
        )

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"VersionSpace({self.cls!r}, alive={len(self)})"

    @property
    def fingerprint(self) -> tuple[int, int, int]:
        """Cheap summary; equal version spaces share it, the converse needs ``==``."""
        if not len(self.alive):
            return (0, -1, -1)
        return (len(self.alive), int(self.alive[0]), int(self.alive[-1]))

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = self.alive.astype(np.int64).tobytes()
        return self._key

    def members(self) -> list[int]:
        return [int(i) for i in self.alive]

    def labels(self, x: NodeId) -> np.ndarray:
        return self.cls.labels(x, self.alive)

    def count_ones(self, x: NodeId) -> int:
        return int(np.count_nonzero(self.labels(x)))

    def restrict(self, x: NodeId, y: int) -> "VersionSpace":
        return VersionSpace(self.cls, self.alive[self.labels(x) == y])

    def split(self, x: NodeId) -> tuple["VersionSpace", "VersionSpace"]:
        labs = self.labels(x)
        return VersionSpace(self.cls, self.alive[labs == 0]), VersionSpace(self.cls, self.alive[labs == 1])

    def on_path_split(self, x: NodeId) -> tuple["VersionSpace", "VersionSpace"]:
        """(members with x off their path, members with x on their path)."""
        if isinstance(self.cls, SparseClass):
            lo, hi = self.cls.on_path_bounds(x, self.alive)
            off = np.concatenate([self.alive[:lo], self.alive[hi:]])
            return VersionSpace(self.cls, off), VersionSpace(self.cls, self.alive[lo:hi].copy())
        on = self.cls.on_path(x, self.alive)
        return VersionSpace(self.cls, self.alive[~on]), VersionSpace(self.cls, self.alive[on])

    def all_on_path(self, x: NodeId) -> bool:
        return self.cls.all_on_path(x, self.alive)

    def subset(self, members: Iterable[int]) -> "VersionSpace":
        arr = np.array(sorted(set(members)), dtype=self.alive.dtype)
        if len(arr) and not np.all(np.isin(arr, self.alive)):
            raise ValueError("subset must only contain alive members")
        return VersionSpace(self.cls, arr)


class VersionSpaceSet:
    """Insertion-ordered set of version spaces with exact duplicate detection."""

    def __init__(self):
        self._buckets: dict[tuple, list] = {}
        self.items: list = []

    def add(self, vs: VersionSpace, payload=None) -> bool:
        bucket = self._buckets.setdefault(vs.fingerprint, [])
        if any(other == vs for other, _ in bucket):
            return False
        bucket.append((vs, payload))
        self.items.append((vs, payload))
        return True

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def restrict(vs: VersionSpace, x: NodeId, y: int) -> VersionSpace:
    return vs.restrict(x, y)


def as_version_space(obj) -> VersionSpace:
    return obj if isinstance(obj, VersionSpace) else obj.version_space()


# --------------------------------------------------------------------------- bitset tables


class BitTable:
    """Alive sets as Python-int bitsets over a fixed member list, for exhaustive search.

    Bit j of a set refers to ``members[j]``; ``ones[p]`` is the set of members
    labeling ``points[p]`` with 1.
    """

    def __init__(self, vs: VersionSpace, points: Sequence[NodeId]):
        self.vs = vs
        self.points = list(points)
        self.full = (1 << len(vs)) - 1
        self.ones = [_bits_to_int(vs.labels(p)) for p in self.points]

    def restrict(self, alive: int, p: int, y: int) -> int:
        return alive & self.ones[p] if y else alive & ~self.ones[p]


def _bits_to_int(labels: np.ndarray) -> int:
    packed = np.packbits(labels.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _default_domain(vs: VersionSpace) -> list[NodeId]:
    return list(iter_nodes(vs.cls.d))


def ldim(obj, domain: Sequence[NodeId] | None = None) -> int:
    """Littlestone dimension of the alive set over `domain` (all of B_d by default).

    Returns the largest L such that a mistake tree of depth L-1 with internal
    nodes from `domain` is shattered; a single hypothesis has dimension 0 and the
    empty set is reported as -1.
    """
    vs = as_version_space(obj)
    domain = _default_domain(vs) if domain is None else list(domain)
    if len(vs) > LDIM_MAX_MEMBERS or len(domain) > LDIM_MAX_DOMAIN:
        raise BudgetExceeded(f"ldim guard: {len(vs)} members, {len(domain)} points")
    if not vs:
        return -1
    table = BitTable(vs, domain)
    return _ldim_bits(table, table.full, {})


def _ldim_bits(table: BitTable, alive: int, memo: dict[int, int]) -> int:
    got = memo.get(alive)
    if got is not None:
        return got
    ceiling = alive.bit_count().bit_length() - 1  # floor(log2 |alive|)
    best = 0
    if ceiling > 0:
        for p in range(len(table.points)):
            a1 = alive & table.ones[p]
            if a1 == 0 or a1 == alive:
                continue
            a0 = alive & ~table.ones[p]
            # cheap bound before recursing
            if min(a0.bit_count(), a1.bit_count()).bit_length() - 1 + 1 <= best:
                continue
            v = 1 + min(_ldim_bits(table, a0, memo), _ldim_bits(table, a1, memo))
            if v > best:
                best = v
                if best == ceiling:
                    break
    memo[alive] = best
    return best


# --------------------------------------------------------------------------- class properties


@dataclass(frozen=True)
class Counterexample:
    members: tuple[int, ...]
    nodes: tuple[NodeId, ...]
    target_label: int


def verify_counterexample(cls: HypothesisClass, cex: Counterexample) -> bool:
    """Re-check every (member, node) pair one at a time."""
    for i in cex.members:
        h = cls[i]
        path = set(path_of(h))
        for x in cex.nodes:
            if x in path or eval_hypothesis(h, x) != cex.target_label:
                return False
    return True


def falsify_class_properties(
    cls: HypothesisClass,
    size_H: int,
    size_X: int,
    target_label: int,
    trials: int = 200,
    seed: int = 0,
) -> Counterexample | None:
    """Randomized search for members H and nodes X, all of X off-path with the target label.

    Any returned counterexample has been re-verified exhaustively; returning
    None proves nothing.
    """
    rng = random.Random(seed)
    n_nodes = tree_size(cls.d)
    everyone = np.arange(len(cls), dtype=np.int64)
    if size_H > len(cls) or size_X > n_nodes:
        return None
    for trial in range(trials):
        if trial % 2 == 0 or size_X == 0:
            nodes = [node_from_index(i) for i in rng.sample(range(n_nodes), size_X)]
        else:
            # grow X from one member's off-path nodes carrying the target label
            h = cls[rng.randrange(len(cls))]
            path = set(path_of(h))
            pool = [node_from_index(i) for i in rng.sample(range(n_nodes), min(n_nodes, 64 * max(size_X, 1)))]
            nodes = [x for x in pool if x not in path and eval_hypothesis(h, x) == target_label][:size_X]
            if len(nodes) < size_X:
                continue
        good = np.ones(len(cls), dtype=bool)
        for x in nodes:
            good &= (cls.labels(x, everyone) == target_label) & ~cls.on_path(x, everyone)
        candidates = np.flatnonzero(good)
        if len(candidates) < size_H:
            continue
        chosen = sorted(int(i) for i in rng.sample(list(candidates), size_H))
        cex = Counterexample(tuple(chosen), tuple(nodes), target_label)
        if verify_counterexample(cls, cex):
            return cex
    return None


# --------------------------------------------------------------------------- table files


def write_explicit_table(cls: HypothesisClass, path) -> None:
    explicit = cls if isinstance(cls, ExplicitClass) else cls.materialize()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"d={explicit.d}\n")
        for i, row in enumerate(explicit.table.tolist()):
            branch = format(explicit.branch_of(i), f"0{explicit.d + 1}b")
            fh.write(f"{branch} {''.join(map(str, row))}\n")


def read_explicit_table(path) -> ExplicitClass:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("d="):
            raise ValueError(f"{path}: expected 'd=<depth>' header")
        d = int(header[2:])
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, labels = line.split()
            rows.append([int(c) for c in labels])
    return ExplicitClass(d, rows)
