"""Exact combinatorial ground truth at desk scale.

Clique cover number via exact graph coloring of the complement (a partition
into k independent sets of the complement is a cover by k cliques), maximum
independent set by branch and bound, and the sandwich check against a solved
theta value.  Branching is deterministic (saturation degree, ties by degree
then lowest index) so node counts are reproducible.  Budgets are result
states for the cover solver, and a refusal for the sandwich check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .graphs import Graph, complement

__all__ = [
    "CoverSolution",
    "StabilityResult",
    "SandwichResult",
    "InexactOracleError",
    "clique_cover_number",
    "stability_number",
    "sandwich_check",
]


class InexactOracleError(RuntimeError):
    """An operation demanded exact oracle values but a budget was exhausted."""


class _Budget:
    def __init__(self, max_nodes: Optional[int], max_time: Optional[float]):
        self.max_nodes = max_nodes
        self.deadline = None if max_time is None else time.perf_counter() + max_time
        self.nodes = 0
        self.exhausted = False

    def tick(self) -> bool:
        """Count a search node; True means stop."""
        self.nodes += 1
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            self.exhausted = True
        elif self.deadline is not None and self.nodes % 256 == 0:
            if time.perf_counter() > self.deadline:
                self.exhausted = True
        return self.exhausted


def _adjacency_masks(g: Graph) -> list[int]:
    masks = [0] * g.n
    for i, j in g.edges:
        masks[i] |= 1 << j
        masks[j] |= 1 << i
    return masks


def _greedy_dsatur_coloring(adj: list[int], n: int) -> list[int]:
    """Greedy coloring; returns color per vertex (upper bound witness)."""
    colors = [-1] * n
    neighbor_colors: list[set] = [set() for _ in range(n)]
    degrees = [bin(a).count("1") for a in adj]
    for _ in range(n):
        best_v, best_key = -1, None
        for v in range(n):
            if colors[v] != -1:
                continue
            key = (len(neighbor_colors[v]), degrees[v], -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
        c = 0
        while c in neighbor_colors[best_v]:
            c += 1
        colors[best_v] = c
        mask = adj[best_v]
        while mask:
            u = (mask & -mask).bit_length() - 1
            neighbor_colors[u].add(c)
            mask &= mask - 1
    return colors


def _greedy_clique(adj: list[int], n: int) -> list[int]:
    """Greedy clique (lower bound for the chromatic number of the graph)."""
    order = sorted(range(n), key=lambda v: (-bin(adj[v]).count("1"), v))
    clique: list[int] = []
    cand = (1 << n) - 1
    for v in order:
        if cand >> v & 1:
            clique.append(v)
            cand &= adj[v]
    return clique


def _try_color(adj, n, k, colors, color_masks, used, budget) -> bool:
    """Exact decision: can the remaining vertices be colored with k colors?

    colors / color_masks are mutated in place; on False they are restored.
    Vertex choice: max saturation, tie max degree, tie lowest index.
    """
    best_v, best_key = -1, None
    for v in range(n):
        if colors[v] != -1:
            continue
        sat = 0
        for c in range(used):
            if color_masks[c] & adj[v]:
                sat += 1
        key = (sat, bin(adj[v]).count("1"), -v)
        if best_key is None or key > best_key:
            best_v, best_key = v, key
    if best_v == -1:
        return True
    if budget.tick():
        return False
    limit = min(used + 1, k)  # at most one fresh color (symmetry breaking)
    for c in range(limit):
        if color_masks[c] & adj[best_v]:
            continue
        colors[best_v] = c
        color_masks[c] |= 1 << best_v
        new_used = max(used, c + 1)
        if _try_color(adj, n, k, colors, color_masks, new_used, budget):
            return True
        colors[best_v] = -1
        color_masks[c] &= ~(1 << best_v)
        if budget.exhausted:
            return False
    return False


@dataclass(frozen=True)
class CoverSolution:
    """Best known clique cover; exact=False when a budget was exhausted."""

    value: int
    cover: tuple
    nodes_explored: int
    time: float
    exact: bool


def clique_cover_number(
    g: Graph,
    max_nodes: Optional[int] = None,
    max_time: Optional[float] = None,
) -> CoverSolution:
    """Exact minimum clique cover by branch-and-bound coloring of the
    complement (greedy upper bound, clique lower bound, saturation-degree
    branching).  Budget exhaustion returns the best known cover with
    exact=False."""
    t0 = time.perf_counter()
    comp = complement(g) if g.n > 1 else Graph(g.n, frozenset())
    adj = _adjacency_masks(comp)
    n = g.n
    budget = _Budget(max_nodes, max_time)

    best_colors = _greedy_dsatur_coloring(adj, n)
    ub = max(best_colors) + 1
    lb = max(1, len(_greedy_clique(adj, n)))

    while ub > lb and not budget.exhausted:
        k = ub - 1
        colors = [-1] * n
        color_masks = [0] * (k + 1)
        if _try_color(adj, n, k, colors, color_masks, 0, budget):
            best_colors = colors[:]
            ub = k
        elif not budget.exhausted:
            break  # k is infeasible, so ub is optimal

    exact = not budget.exhausted
    classes: dict[int, list[int]] = {}
    for v, c in enumerate(best_colors):
        classes.setdefault(c, []).append(v)
    cover = tuple(tuple(sorted(block)) for _, block in sorted(classes.items()))
    cover = tuple(sorted(cover, key=lambda b: b[0]))
    return CoverSolution(
        value=ub,
        cover=cover,
        nodes_explored=budget.nodes,
        time=time.perf_counter() - t0,
        exact=exact,
    )


@dataclass(frozen=True)
class StabilityResult:
    value: int
    witness: tuple
    nodes_explored: int
    time: float
    exact: bool


def stability_number(
    g: Graph,
    max_nodes: Optional[int] = None,
    max_time: Optional[float] = None,
) -> StabilityResult:
    """Exact maximum independent set by branch and bound.

    Branches on the highest-degree candidate (ties by lowest index);
    equivalently the maximum clique of the complement.
    """
    t0 = time.perf_counter()
    n = g.n
    adj = _adjacency_masks(g)
    budget = _Budget(max_nodes, max_time)

    best = {"size": 0, "set": 0}

    def popcount(x: int) -> int:
        return bin(x).count("1")

    def recurse(cand: int, current: int, size: int) -> None:
        if budget.exhausted:
            return
        if size > best["size"]:
            best["size"] = size
            best["set"] = current
        if not cand or size + popcount(cand) <= best["size"]:
            return
        if budget.tick():
            return
        # highest degree inside the candidate set, ties by lowest index
        best_v, best_key = -1, None
        m = cand
        while m:
            v = (m & -m).bit_length() - 1
            key = (popcount(adj[v] & cand), -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
            m &= m - 1
        v = best_v
        recurse(cand & ~(adj[v] | (1 << v)), current | (1 << v), size + 1)
        recurse(cand & ~(1 << v), current, size)

    recurse((1 << n) - 1, 0, 0)
    witness = tuple(v for v in range(n) if best["set"] >> v & 1)
    return StabilityResult(
        value=best["size"],
        witness=witness,
        nodes_explored=budget.nodes,
        time=time.perf_counter() - t0,
        exact=not budget.exhausted,
    )


@dataclass(frozen=True)
class SandwichResult:
    ok: bool
    alpha: int
    theta: float
    cover_number: int


def sandwich_check(
    g: Graph,
    theta: float,
    tol: float = 1e-4,
    max_nodes: Optional[int] = None,
    max_time: Optional[float] = None,
) -> SandwichResult:
    """Check alpha <= theta + tol and theta <= cover number + tol.

    Refuses (InexactOracleError) when either combinatorial value is inexact
    under the given budgets.
    """
    stab = stability_number(g, max_nodes, max_time)
    cover = clique_cover_number(g, max_nodes, max_time)
    if not (stab.exact and cover.exact):
        raise InexactOracleError("oracle budget exhausted; sandwich check refused")
    ok = stab.value <= theta + tol and theta <= cover.value + tol
    return SandwichResult(ok, stab.value, theta, cover.value)
