"""Synthetic two-class graph corpora for tests and demos.

Real corpora are large external downloads; these generators produce small
datasets with the same shape of signal: binary classes separable through
node-label statistics plus a mild structural cue, and node counts spread
widely enough that a density-quantile split yields genuinely different
domains. Everything is a pure function of (count, seed).
"""

from __future__ import annotations

import numpy as np

from .datasets import GraphDataset, derive_seed
from .errors import ContractViolation
from .graphs import Graph, make_graph

__all__ = ["make_synthetic_graphs", "make_synthetic_dataset"]

_LABEL_PROBS = {
    0: (0.70, 0.20, 0.10),
    1: (0.10, 0.20, 0.70),
}


def _random_tree_edges(n: int, rng) -> list:
    """Random recursive tree: node v attaches to a uniform earlier node."""
    return [(int(rng.integers(0, v)), v) for v in range(1, n)]


def _synthetic_graph(cls: int, rng) -> Graph:
    n = int(rng.integers(6, 17))
    edges = _random_tree_edges(n, rng)
    present = {(min(a, b), max(a, b)) for a, b in edges}
    # sparse extra chords; class 1 graphs carry one more cycle on average
    extra = int(rng.integers(0, 3)) + cls
    for _ in range(extra * 3):
        if extra == 0:
            break
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        key = (min(a, b), max(a, b))
        if a != b and key not in present:
            present.add(key)
            edges.append(key)
            extra -= 1
    labels = rng.choice(3, size=n, p=_LABEL_PROBS[cls])
    return make_graph(
        node_count=n,
        edges=edges,
        node_labels=[int(v) for v in labels],
        class_label=cls,
    )


def make_synthetic_graphs(count: int, seed: int) -> list:
    """Balanced list of synthetic graphs: floor(count/2) of class 1, the
    rest class 0, in seeded shuffled order."""
    if count < 2:
        raise ContractViolation("need at least two graphs")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "synth")))
    classes = np.array([0] * (count - count // 2) + [1] * (count // 2))
    classes = classes[rng.permutation(count)]
    return [_synthetic_graph(int(c), rng) for c in classes]


def make_synthetic_dataset(count: int, seed: int, name: str = "Synth") -> GraphDataset:
    return GraphDataset(name=name, graphs=tuple(make_synthetic_graphs(count, seed)))
