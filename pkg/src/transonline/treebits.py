"""Nodes of the perfect binary tree B_d, identified with bitstrings.

A node is a pair ``(depth, bits)`` where ``bits`` holds the node's bitstring
read as a binary number (first bit most significant).  The root is the empty
string and serializes as ``""``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import DepthOverflow

MAX_DEPTH = 62


@dataclass(frozen=True, slots=True, order=True)
class NodeId:
    depth: int
    bits: int = 0

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_DEPTH:
            raise DepthOverflow(f"node depth {self.depth} outside [0, {MAX_DEPTH}]")
        if self.bits < 0 or self.bits >> self.depth:
            # keep only the meaningful low `depth` bits so equality is structural
            object.__setattr__(self, "bits", self.bits & ((1 << self.depth) - 1))

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        text = text.strip()
        if text in ("", "λ"):
            return ROOT
        if set(text) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {text!r}")
        return cls(len(text), int(text, 2))

    def __str__(self) -> str:
        return format(self.bits, f"0{self.depth}b") if self.depth else ""

    def __repr__(self) -> str:
        return f"NodeId({str(self)!r})"

    @property
    def index(self) -> int:
        """Position of the node in breadth-first order (root = 0)."""
        return (1 << self.depth) - 1 + self.bits

    def bit(self, i: int) -> int:
        """The i-th bit of the string, 1-based."""
        return (self.bits >> (self.depth - i)) & 1

    def prefix(self, k: int) -> "NodeId":
        return NodeId(k, self.bits >> (self.depth - k))

    def parent(self) -> "NodeId":
        if self.depth == 0:
            raise ValueError("the root has no parent")
        return NodeId(self.depth - 1, self.bits >> 1)


ROOT = NodeId(0, 0)


def node_from_index(index: int) -> NodeId:
    depth = (index + 1).bit_length() - 1
    return NodeId(depth, index + 1 - (1 << depth))


def tree_size(d: int) -> int:
    return (1 << (d + 1)) - 1


def check_depth(d: int) -> int:
    if not 0 <= d <= MAX_DEPTH:
        raise DepthOverflow(f"tree depth {d} outside [0, {MAX_DEPTH}]")
    return d


def child(u: NodeId, b: int, d: int) -> NodeId:
    if u.depth >= d:
        raise DepthOverflow(f"node {str(u)!r} is a leaf of B_{d}")
    return NodeId(u.depth + 1, (u.bits << 1) | (b & 1))


def is_ancestor(u: NodeId, v: NodeId) -> bool:
    """True iff u is a prefix of v (reflexive)."""
    return u.depth <= v.depth and (v.bits >> (v.depth - u.depth)) == u.bits


def is_b_descendant(u: NodeId, b: int, v: NodeId) -> bool:
    """True iff v lies in the subtree of the b-child of u."""
    if u.depth >= MAX_DEPTH or v.depth <= u.depth:
        return False
    return (v.bits >> (v.depth - u.depth - 1)) == ((u.bits << 1) | b)


def descendant_side(u: NodeId, v: NodeId) -> int | None:
    """The b with ``is_b_descendant(u, b, v)``, or None if v is not strictly below u."""
    if v.depth <= u.depth or (v.bits >> (v.depth - u.depth)) != u.bits:
        return None
    return (v.bits >> (v.depth - u.depth - 1)) & 1


def path_to(u: NodeId) -> tuple[NodeId, ...]:
    return tuple(u.prefix(k) for k in range(u.depth + 1))


def iter_nodes(d: int) -> Iterator[NodeId]:
    """All nodes of B_d in breadth-first order."""
    for depth in range(d + 1):
        for bits in range(1 << depth):
            yield NodeId(depth, bits)
