"""Planted clique-cover instances.

Undirected simple graphs together with a partition of the vertices into
cliques.  Instances are generated by making every block a clique and adding
each cross-block edge independently with probability p.  This module also
measures how far an instance is from a disjoint union of cliques (the
cross-clique sparsity parameter c), evaluates the recovery threshold and the
tail bound used to predict when random instances stay below it, and reads /
writes the JSON graph file format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import exp
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "Graph",
    "CliquePartition",
    "PlantedInstance",
    "GraphFileError",
    "generate_planted",
    "complement",
    "cross_edge_count",
    "scc_parameter",
    "recovery_threshold",
    "recovery_threshold_fraction",
    "hoeffding_bound",
    "HoeffdingBound",
    "write_graph",
    "read_graph",
]


class GraphFileError(ValueError):
    """Raised for malformed or inconsistent graph files."""


def _normalize_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices 0..n-1.

    Edges are stored as a frozenset of (i, j) pairs with i < j; no self
    loops, no duplicates, all endpoints < n.
    """

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"vertex count must be >= 1, got {self.n}")
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self loop at vertex {i}")
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range or not normalized")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(n, frozenset(_normalize_edge(i, j) for i, j in edges))

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge(i, j) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self, dtype=float) -> np.ndarray:
        """Dense symmetric adjacency matrix with zero diagonal."""
        a = np.zeros((self.n, self.n), dtype=dtype)
        if self.edges:
            idx = np.asarray(self.sorted_edges())
            a[idx[:, 0], idx[:, 1]] = 1
            a[idx[:, 1], idx[:, 0]] = 1
        return a

    def neighbor_sets(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return nbrs


@dataclass(frozen=True)
class CliquePartition:
    """Ordered partition of 0..n-1 into non-empty disjoint blocks."""

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if len(b) == 0:
                raise ValueError("empty block")
            for v in b:
                if not 0 <= v < self.n:
                    raise ValueError(f"vertex {v} out of range")
                if v in seen:
                    raise ValueError(f"vertex {v} appears in more than one block")
                seen.add(v)
        if len(seen) != self.n:
            missing = sorted(set(range(self.n)) - seen)
            raise ValueError(f"blocks do not cover all vertices, missing {missing[:5]}")

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]]) -> "CliquePartition":
        n = sum(len(b) for b in blocks)
        return cls(n, tuple(tuple(int(v) for v in b) for b in blocks))

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "CliquePartition":
        """Blocks laid out as consecutive index ranges in the given order."""
        blocks = []
        start = 0
        for s in sizes:
            blocks.append(tuple(range(start, start + s)))
            start += s
        return cls(start, tuple(blocks))

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def block_of(self) -> np.ndarray:
        """Vector mapping each vertex to its block index."""
        out = np.empty(self.n, dtype=int)
        for l, b in enumerate(self.blocks):
            out[list(b)] = l
        return out

    def indicator(self) -> np.ndarray:
        """n x k 0/1 matrix whose columns are block indicator vectors."""
        ind = np.zeros((self.n, self.k))
        for l, b in enumerate(self.blocks):
            ind[list(b), l] = 1.0
        return ind


def _check_blocks_are_cliques(graph: Graph, part: CliquePartition) -> None:
    for b in part.blocks:
        for x in range(len(b)):
            for y in range(x + 1, len(b)):
                if not graph.has_edge(b[x], b[y]):
                    raise ValueError(
                        f"block pair ({b[x]},{b[y]}) is not an edge; "
                        "partition is not a clique partition of the graph"
                    )


@dataclass(frozen=True)
class PlantedInstance:
    """A generated graph plus the partition it was planted from."""

    graph: Graph
    partition: CliquePartition
    p: float
    seed: int

    def __post_init__(self):
        if self.graph.n != self.partition.n:
            raise ValueError("graph and partition disagree on vertex count")
        _check_blocks_are_cliques(self.graph, self.partition)


def generate_planted(sizes: Sequence[int], p: float, seed: int) -> PlantedInstance:
    """Generate a planted instance with contiguous blocks of the given sizes.

    Every within-block pair becomes an edge; each cross-block pair becomes an
    edge independently with probability p.  Cross-pair decisions are drawn in
    lexicographic pair order from a PCG64 stream seeded with `seed`, so equal
    inputs give bit-identical graphs.
    """
    if len(sizes) == 0:
        raise ValueError("need at least one block size")
    if any(s < 1 for s in sizes):
        raise ValueError(f"block sizes must be >= 1, got {list(sizes)}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")

    part = CliquePartition.contiguous(sizes)
    n = part.n
    block_of = part.block_of()

    iu, ju = np.triu_indices(n, k=1)  # lexicographic (i, j), i < j
    cross = block_of[iu] != block_of[ju]
    rng = np.random.default_rng(seed)
    draws = rng.random(int(cross.sum()))
    keep = draws < p

    edges = set()
    for s_i, s_j in zip(iu[~cross], ju[~cross]):
        edges.add((int(s_i), int(s_j)))
    for s_i, s_j in zip(iu[cross][keep], ju[cross][keep]):
        edges.add((int(s_i), int(s_j)))
    graph = Graph(n, frozenset(edges))
    return PlantedInstance(graph, part, float(p), int(seed))


def complement(g: Graph) -> Graph:
    """Graph with exactly the missing pairs of g as edges."""
    iu, ju = np.triu_indices(g.n, k=1)
    all_pairs = {(int(i), int(j)) for i, j in zip(iu, ju)}
    return Graph(g.n, frozenset(all_pairs - g.edges))


def cross_edge_count(g: Graph, part: CliquePartition, v: int, l: int) -> int:
    """Number of neighbors of v inside the foreign block l."""
    block = part.blocks[l]
    if v in block:
        raise ValueError(f"vertex {v} belongs to block {l}")
    return sum(1 for u in block if g.has_edge(v, u))


def _cross_counts(g: Graph, part: CliquePartition) -> np.ndarray:
    """n x k matrix of neighbor counts of each vertex in each block."""
    a = g.adjacency()
    return a @ part.indicator()


def scc_parameter(g: Graph, part: CliquePartition) -> Fraction:
    """Smallest c for which the instance has the sparse clique-cover property.

    Returns max over vertices v and foreign blocks l of
    |neighbors of v in block l| / |block l|, as an exact rational.  Raises if
    some block is not a clique of g.
    """
    _check_blocks_are_cliques(g, part)
    counts = _cross_counts(g, part).astype(int)
    block_of = part.block_of()
    c = Fraction(0)
    for l, b in enumerate(part.blocks):
        foreign = block_of != l
        if not foreign.any():
            continue
        worst = int(counts[foreign, l].max())
        c = max(c, Fraction(worst, len(b)))
    return c


def recovery_threshold_fraction(part: CliquePartition) -> Fraction:
    """Exact rational form of `recovery_threshold`."""
    inv = [Fraction(1, s) for s in part.sizes]
    ratio = min(inv) / sum(inv)
    return min(ratio * ratio / 4, Fraction(1, 100))


def recovery_threshold(part: CliquePartition) -> float:
    """Sparsity level below which the certificate pipeline is guaranteed.

    min{ (1/4) * (min_l 1/|C_l| / sum_l 1/|C_l|)^2, 1/100 }.
    """
    return float(recovery_threshold_fraction(part))


class HoeffdingBound(NamedTuple):
    raw: float
    clamped: float


def hoeffding_bound(sizes: Sequence[int], p: float, c: float) -> HoeffdingBound:
    """Lower bound on the probability that a planted instance is c-sparse.

    raw = 1 - sum_i |C_i| * sum_{j != i} exp(-2 |C_j| (c - p)^2).  The raw
    value can be far below zero at small sizes; `clamped` trims it to [0, 1].
    Requires p < c.
    """
    if not p < c:
        raise ValueError(f"bound needs p < c, got p={p}, c={c}")
    raw = 1.0
    for i, si in enumerate(sizes):
        raw -= si * sum(exp(-2.0 * sj * (c - p) ** 2) for j, sj in enumerate(sizes) if j != i)
    return HoeffdingBound(raw, min(max(raw, 0.0), 1.0))


# ---------------------------------------------------------------------------
# Graph file format: a single JSON document
# {"n": int, "edges": [[i, j], ...] sorted with i < j,
#  "blocks": [[...], ...] optional, "p": float optional, "seed": int optional}


def graph_document(
    g: Graph,
    part: Optional[CliquePartition] = None,
    p: Optional[float] = None,
    seed: Optional[int] = None,
) -> dict:
    doc: dict = {"n": g.n, "edges": [list(e) for e in g.sorted_edges()]}
    if part is not None:
        if part.n != g.n:
            raise ValueError("partition and graph disagree on vertex count")
        doc["blocks"] = [list(b) for b in part.blocks]
    if p is not None:
        doc["p"] = float(p)
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def write_graph(
    path,
    g: Graph,
    part: Optional[CliquePartition] = None,
    p: Optional[float] = None,
    seed: Optional[int] = None,
) -> None:
    """Write the canonical JSON form (edges sorted, i < j, UTF-8)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_document(g, part, p, seed), fh)
        fh.write("\n")


def parse_graph_document(doc: dict) -> tuple[Graph, Optional[CliquePartition]]:
    if not isinstance(doc, dict):
        raise GraphFileError("top-level JSON value must be an object")
    unknown = set(doc) - {"n", "edges", "blocks", "p", "seed"}
    if unknown:
        raise GraphFileError(f"unknown keys {sorted(unknown)}")
    try:
        n = int(doc["n"])
        raw_edges = doc["edges"]
    except KeyError as exc:
        raise GraphFileError(f"missing required key {exc}") from exc
    edges = set()
    for item in raw_edges:
        if len(item) != 2:
            raise GraphFileError(f"edge entry {item} is not a pair")
        i, j = int(item[0]), int(item[1])
        if i == j:
            raise GraphFileError(f"self loop at vertex {i}")
        e = _normalize_edge(i, j)
        if e in edges:
            raise GraphFileError(f"duplicate edge {list(e)}")
        edges.add(e)
    try:
        g = Graph(n, frozenset(edges))
    except ValueError as exc:
        raise GraphFileError(str(exc)) from exc
    part = None
    if "blocks" in doc:
        try:
            part = CliquePartition(n, tuple(tuple(int(v) for v in b) for b in doc["blocks"]))
        except ValueError as exc:
            raise GraphFileError(str(exc)) from exc
    return g, part


def read_graph(path) -> tuple[Graph, Optional[CliquePartition]]:
    """Read and validate a graph file; returns (graph, partition or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            # json.load rejects trailing data after the document itself
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFileError(f"not valid JSON: {exc}") from exc
    return parse_graph_document(doc)
