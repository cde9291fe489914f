"""Immutable undirected graphs and their structural metrics.

Graphs are simple (no self-loops, no duplicate edges, unweighted) and
frozen after construction, so they can be shared freely between worker
processes. All metrics here are pure functions of the graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

__all__ = [
    "Graph",
    "StructuralProfile",
    "laplacian",
    "normalized_laplacian",
    "adjacency",
    "structural_profile",
    "edge_density",
    "one_hot_features",
]


@dataclass(frozen=True)
class Graph:
    """An undirected simple graph with integer node labels.

    Attributes:
        node_count: number of nodes, >= 1
        edges: unordered node pairs, each stored once as (i, j) with i < j
        node_labels: one integer label per node
        class_label: binary class in {0, 1}, or None for unlabeled graphs
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    node_labels: tuple[int, ...]
    class_label: int | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise ContractViolation("graph must have at least one node")
        if len(self.node_labels) != self.node_count:
            raise ContractViolation(
                f"{len(self.node_labels)} node labels for {self.node_count} nodes"
            )
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ContractViolation(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ContractViolation(f"edge ({i},{j}) endpoint out of range")
            if i > j:
                raise ContractViolation(f"edge ({i},{j}) not stored as (min,max)")
            if (i, j) in seen:
                raise ContractViolation(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        if self.class_label is not None and self.class_label not in (0, 1):
            raise ContractViolation(f"class label {self.class_label} not in {{0,1}}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbor_lists(self) -> list[list[int]]:
        """Adjacency lists, neighbors in ascending order."""
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        for lst in nbrs:
            lst.sort()
        return nbrs


@dataclass(frozen=True)
class StructuralProfile:
    """Cycle and density summary of one graph.

    cyclomatic = |E| - |V| + component_count (count of independent cycles);
    edge_density = 2|E| / (|V| (|V|-1)), defined as 0 for |V| <= 1.
    """

    cyclomatic: int
    edge_density: float
    component_count: int


def make_graph(node_count, edges, node_labels=None, class_label=None) -> Graph:
    """Build a Graph from an arbitrary edge iterable.

    Edges are normalized to (min, max) order and deduplicated; node labels
    default to all zeros.
    """
    norm = sorted({(min(i, j), max(i, j)) for i, j in edges})
    if node_labels is None:
        node_labels = (0,) * node_count
    return Graph(node_count, tuple(norm), tuple(node_labels), class_label)


def adjacency(g: Graph) -> np.ndarray:
    """Dense symmetric 0/1 adjacency matrix."""
    a = np.zeros((g.node_count, g.node_count))
    for i, j in g.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian: degree matrix minus adjacency.

    Symmetric, positive semidefinite, rows sum to zero.
    """
    a = adjacency(g)
    return np.diag(a.sum(axis=1)) - a


def normalized_laplacian(g: Graph) -> np.ndarray:
    """Symmetric normalized Laplacian, eigenvalues in [0, 2].

    Rows and columns of isolated (degree-zero) nodes are set to the
    identity row, so the operator stays well defined on every graph.
    """
    a = adjacency(g)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(g.node_count) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]
    return lap


def edge_density(g: Graph) -> float:
    """2|E| / (|V| (|V|-1)); zero for graphs with fewer than two nodes."""
    n = g.node_count
    if n <= 1:
        return 0.0
    return 2.0 * g.edge_count / (n * (n - 1))


def component_count(g: Graph) -> int:
    """Number of connected components, by breadth-first traversal."""
    nbrs = g.neighbor_lists()
    seen = [False] * g.node_count
    count = 0
    for start in range(g.node_count):
        if seen[start]:
            continue
        count += 1
        queue = deque([start])
        seen[start] = True
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    return count


def structural_profile(g: Graph) -> StructuralProfile:
    """Cyclomatic number, edge density and component count of a graph."""
    comps = component_count(g)
    cyclo = g.edge_count - g.node_count + comps
    return StructuralProfile(
        cyclomatic=cyclo,
        edge_density=edge_density(g),
        component_count=comps,
    )


def one_hot_features(g: Graph, vocab_size: int) -> np.ndarray:
    """Node features as one-hot encodings of the node labels, shape (n, vocab)."""
    labels = np.asarray(g.node_labels)
    if labels.min() < 0 or labels.max() >= vocab_size:
        raise ContractViolation(
            f"node labels outside one-hot vocabulary of size {vocab_size}"
        )
    x = np.zeros((g.node_count, vocab_size))
    x[np.arange(g.node_count), labels] = 1.0
    return x
