"""TUDataset-format parsing, quantile domain splits, and split manifests.

A corpus directory holds plain text files:

    <name>_A.txt               comma separated, 1-based global edge list
    <name>_graph_indicator.txt 1-based graph id, one line per node
    <name>_graph_labels.txt    one class label per graph
    <name>_node_labels.txt     one integer per node (optional; zeros if absent)

Domain splits order graphs by a structural statistic and cut the ordering
into k equal quantile blocks (block 0 = smallest statistic). Each domain is
further partitioned into seeded, class-stratified train/test subsets. The
whole split is persisted as a diff-able text manifest with a checksum.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DataError
from .graphs import Graph, edge_density, make_graph

__all__ = [
    "GraphDataset",
    "DomainSplit",
    "SPLIT_STATISTICS",
    "parse_tudataset",
    "write_tudataset",
    "dataset_hash",
    "split_domains",
    "save_split",
    "load_split",
    "verify_split",
]

MANIFEST_VERSION = 1

SPLIT_STATISTICS = ("edge_density", "avg_degree", "node_count")


@dataclass(frozen=True)
class GraphDataset:
    """A named, ordered collection of binary-labeled graphs."""

    name: str
    graphs: tuple[Graph, ...]

    def __post_init__(self):
        if not self.graphs:
            raise ContractViolation("dataset must contain at least one graph")

    @property
    def vocab_size(self) -> int:
        """Size of the contiguous node-label vocabulary."""
        return 1 + max(max(g.node_labels) for g in self.graphs)

    @property
    def class_count(self) -> int:
        return 2

    def summary(self) -> dict:
        nodes = [g.node_count for g in self.graphs]
        edges = [g.edge_count for g in self.graphs]
        return {
            "name": self.name,
            "graphs": len(self.graphs),
            "mean_nodes": float(np.mean(nodes)),
            "mean_edges": float(np.mean(edges)),
            "classes": self.class_count,
            "node_label_vocab": self.vocab_size,
        }


@dataclass(frozen=True)
class DomainSplit:
    """Quantile assignment of every graph to a domain, plus train/test flags.

    domains[i] is the domain index of graph i (0..k-1, ascending statistic);
    is_test[i] marks held-out evaluation graphs within each domain.
    """

    dataset_name: str
    dataset_hash: str
    statistic: str
    k: int
    seed: int
    train_fraction: float
    domains: tuple[int, ...]
    is_test: tuple[bool, ...]

    def domain_indices(self, d: int, partition: str = "all") -> list[int]:
        """Graph indices of domain d; partition is 'train', 'test' or 'all'."""
        out = []
        for i, dom in enumerate(self.domains):
            if dom != d:
                continue
            if partition == "train" and self.is_test[i]:
                continue
            if partition == "test" and not self.is_test[i]:
                continue
            out.append(i)
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _read_lines(root: str, name: str, suffix: str, required: bool = True):
    path = os.path.join(root, name, f"{name}_{suffix}.txt")
    if not os.path.exists(path):
        # Also accept files directly under root, without the <name>/ level.
        flat = os.path.join(root, f"{name}_{suffix}.txt")
        if os.path.exists(flat):
            path = flat
        elif required:
            raise DataError(f"missing dataset file: {path}")
        else:
            return None, path
    with open(path, "r") as fh:
        return fh.read().splitlines(), path


def parse_tudataset(root_path: str, name: str) -> GraphDataset:
    """Parse one TUDataset-format corpus into a GraphDataset.

    Node indices are remapped to 0-based per-graph local indices, the two
    directed entries of each undirected edge are merged, graph labels are
    remapped to {0, 1} preserving their sorted original order, and node
    labels are remapped to a contiguous vocabulary starting at 0.
    """
    indicator_lines, ind_path = _read_lines(root_path, name, "graph_indicator")
    edge_lines, edge_path = _read_lines(root_path, name, "A")
    label_lines, lab_path = _read_lines(root_path, name, "graph_labels")
    node_label_lines, _ = _read_lines(root_path, name, "node_labels", required=False)

    # graph id per node (1-based in the file)
    graph_of_node = []
    for ln, raw in enumerate(indicator_lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            graph_of_node.append(int(raw))
        except ValueError:
            raise DataError(f"{ind_path}:{ln}: bad graph id {raw!r}")
    if not graph_of_node:
        raise DataError(f"{ind_path}: empty graph indicator")
    n_graphs = max(graph_of_node)

    # local node index and node count per graph
    local_index = np.empty(len(graph_of_node), dtype=np.int64)
    counts = [0] * (n_graphs + 1)
    for node, gid in enumerate(graph_of_node):
        local_index[node] = counts[gid]
        counts[gid] += 1

    # graph labels, remapped to {0,1} by sorted original value
    raw_labels = []
    for ln, raw in enumerate(label_lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            raw_labels.append(int(float(raw)))
        except ValueError:
            raise DataError(f"{lab_path}:{ln}: bad graph label {raw!r}")
    if len(raw_labels) != n_graphs:
        raise DataError(
            f"{lab_path}: {len(raw_labels)} labels for {n_graphs} graphs"
        )
    label_values = sorted(set(raw_labels))
    if len(label_values) != 2:
        raise DataError(
            f"{lab_path}: expected 2 distinct graph labels, found {label_values}"
        )
    label_map = {v: i for i, v in enumerate(label_values)}

    # node labels, remapped to a contiguous vocabulary
    if node_label_lines is None:
        node_labels = [0] * len(graph_of_node)
    else:
        node_labels = []
        for raw in node_label_lines:
            raw = raw.strip()
            if not raw:
                continue
            node_labels.append(int(float(raw.split(",")[0])))
        if len(node_labels) != len(graph_of_node):
            raise DataError(
                f"node label count {len(node_labels)} does not match "
                f"node count {len(graph_of_node)}"
            )
        vocab = {v: i for i, v in enumerate(sorted(set(node_labels)))}
        node_labels = [vocab[v] for v in node_labels]

    # undirected edge sets with local indices
    edge_sets: list[set] = [set() for _ in range(n_graphs)]
    for ln, raw in enumerate(edge_lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        parts = raw.replace(",", " ").split()
        if len(parts) != 2:
            raise DataError(f"{edge_path}:{ln}: bad edge line {raw!r}")
        u, v = int(parts[0]) - 1, int(parts[1]) - 1
        if not (0 <= u < len(graph_of_node) and 0 <= v < len(graph_of_node)):
            raise DataError(f"{edge_path}:{ln}: node id out of range")
        gu, gv = graph_of_node[u], graph_of_node[v]
        if gu != gv:
            raise DataError(
                f"{edge_path}:{ln}: edge joins graph {gu} and graph {gv}"
            )
        if u == v:
            raise DataError(f"{edge_path}:{ln}: self-loop on node {u + 1}")
        a, b = int(local_index[u]), int(local_index[v])
        edge_sets[gu - 1].add((min(a, b), max(a, b)))

    graphs = []
    node_cursor = 0
    for gid in range(1, n_graphs + 1):
        n = counts[gid]
        if n == 0:
            raise DataError(f"{ind_path}: graph {gid} has no nodes")
        labels = tuple(node_labels[node_cursor:node_cursor + n])
        node_cursor += n
        graphs.append(
            Graph(
                node_count=n,
                edges=tuple(sorted(edge_sets[gid - 1])),
                node_labels=labels,
                class_label=label_map[raw_labels[gid - 1]],
            )
        )
    return GraphDataset(name=name, graphs=tuple(graphs))


def write_tudataset(root_path: str, name: str, graphs) -> str:
    """Write graphs as a TUDataset-format corpus; inverse of parse_tudataset.

    Every undirected edge is emitted as both directed entries, matching the
    upstream convention. Returns the dataset directory.
    """
    out_dir = os.path.join(root_path, name)
    os.makedirs(out_dir, exist_ok=True)
    ind, labels, node_labels, edges = [], [], [], []
    offset = 0
    for gid, g in enumerate(graphs, start=1):
        if g.class_label is None:
            raise ContractViolation("cannot serialize a graph without class label")
        ind.extend([str(gid)] * g.node_count)
        labels.append(str(g.class_label))
        node_labels.extend(str(v) for v in g.node_labels)
        for i, j in g.edges:
            edges.append(f"{offset + i + 1}, {offset + j + 1}")
            edges.append(f"{offset + j + 1}, {offset + i + 1}")
        offset += g.node_count
    files = {
        "graph_indicator": ind,
        "graph_labels": labels,
        "node_labels": node_labels,
        "A": edges,
    }
    for suffix, lines in files.items():
        with open(os.path.join(out_dir, f"{name}_{suffix}.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return out_dir


def dataset_hash(ds: GraphDataset) -> str:
    """Content hash of a dataset; stable across parses of identical data."""
    h = hashlib.sha256()
    h.update(ds.name.encode())
    for g in ds.graphs:
        h.update(f"|{g.node_count};{g.class_label};".encode())
        h.update(",".join(map(str, g.node_labels)).encode())
        h.update(";".encode())
        h.update(",".join(f"{i}-{j}" for i, j in g.edges).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Domain splitting
# ---------------------------------------------------------------------------


def _statistic_values(ds: GraphDataset, statistic: str) -> np.ndarray:
    if statistic == "edge_density":
        return np.array([edge_density(g) for g in ds.graphs])
    if statistic == "avg_degree":
        return np.array([2.0 * g.edge_count / g.node_count for g in ds.graphs])
    if statistic == "node_count":
        return np.array([float(g.node_count) for g in ds.graphs])
    raise ContractViolation(
        f"unknown statistic {statistic!r}; choose from {SPLIT_STATISTICS}"
    )


def split_domains(
    ds: GraphDataset,
    statistic: str = "edge_density",
    k: int = 4,
    seed: int = 0,
    train_fraction: float = 0.8,
) -> DomainSplit:
    """Partition a dataset into k quantile domains by a structural statistic.

    Graphs are sorted ascending by the statistic (ties broken by original
    index) and cut into k contiguous blocks whose sizes differ by at most
    one; earlier blocks take the remainder. Within each domain a seeded,
    class-stratified train/test partition is drawn.
    """
    n = len(ds.graphs)
    if not (2 <= k <= n):
        raise ContractViolation(f"k={k} out of range for {n} graphs")
    values = _statistic_values(ds, statistic)
    order = np.argsort(values, kind="stable")

    domains = np.empty(n, dtype=np.int64)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    pos = 0
    for d, size in enumerate(sizes):
        domains[order[pos:pos + size]] = d
        pos += size

    ds_hash = dataset_hash(ds)
    is_test = np.zeros(n, dtype=bool)
    for d in range(k):
        members = np.flatnonzero(domains == d)
        for cls in (0, 1):
            cls_members = [i for i in members if ds.graphs[i].class_label == cls]
            rng = np.random.Generator(
                np.random.PCG64(derive_seed(seed, ds_hash, f"d{d}", f"c{cls}"))
            )
            perm = rng.permutation(len(cls_members))
            n_train = int(np.ceil(train_fraction * len(cls_members)))
            for j in perm[n_train:]:
                is_test[cls_members[j]] = True

    return DomainSplit(
        dataset_name=ds.name,
        dataset_hash=ds_hash,
        statistic=statistic,
        k=k,
        seed=seed,
        train_fraction=train_fraction,
        domains=tuple(int(d) for d in domains),
        is_test=tuple(bool(t) for t in is_test),
    )


def derive_seed(base: int, *labels) -> int:
    """Deterministic child seed from a base seed and a list of string labels."""
    h = hashlib.sha256(str(base).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "big")


# ---------------------------------------------------------------------------
# Manifest persistence
# ---------------------------------------------------------------------------


def _manifest_body(split: DomainSplit) -> str:
    rows = ["graph_index,domain,partition"]
    for i, (d, t) in enumerate(zip(split.domains, split.is_test)):
        rows.append(f"{i},{d},{'test' if t else 'train'}")
    return "\n".join(rows) + "\n"


def save_split(split: DomainSplit, path: str) -> None:
    """Write a split manifest: header lines, body checksum, then CSV rows."""
    body = _manifest_body(split)
    checksum = hashlib.sha256(body.encode()).hexdigest()
    header = [
        f"version = {MANIFEST_VERSION}",
        f"dataset = {split.dataset_name}",
        f"dataset_hash = {split.dataset_hash}",
        f"statistic = {split.statistic}",
        f"k = {split.k}",
        f"seed = {split.seed}",
        f"train_fraction = {split.train_fraction!r}",
        f"checksum = {checksum}",
    ]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(header) + "\n")
        fh.write(body)


def load_split(path: str) -> DomainSplit:
    """Read a split manifest back; verifies version and checksum."""
    if not os.path.exists(path):
        raise DataError(f"missing split manifest: {path}")
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    header = {}
    row_start = None
    for idx, line in enumerate(lines):
        if line.startswith("graph_index,"):
            row_start = idx
            break
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
    if row_start is None:
        raise DataError(f"{path}: no manifest rows found")
    try:
        version = int(header["version"])
    except (KeyError, ValueError):
        raise DataError(f"{path}: missing or bad version header")
    if version != MANIFEST_VERSION:
        raise DataError(
            f"{path}: manifest version {version} != supported {MANIFEST_VERSION}"
        )
    body = "\n".join(lines[row_start:]) + "\n"
    checksum = hashlib.sha256(body.encode()).hexdigest()
    if checksum != header.get("checksum"):
        raise DataError(f"{path}: checksum mismatch, manifest corrupted")

    domains, is_test = [], []
    for ln, row in enumerate(lines[row_start + 1:], start=row_start + 2):
        if not row.strip():
            continue
        idx_s, dom_s, part = row.split(",")
        if int(idx_s) != len(domains):
            raise DataError(f"{path}:{ln}: rows out of order")
        domains.append(int(dom_s))
        if part not in ("train", "test"):
            raise DataError(f"{path}:{ln}: bad partition {part!r}")
        is_test.append(part == "test")

    return DomainSplit(
        dataset_name=header["dataset"],
        dataset_hash=header["dataset_hash"],
        statistic=header["statistic"],
        k=int(header["k"]),
        seed=int(header["seed"]),
        train_fraction=float(header["train_fraction"]),
        domains=tuple(domains),
        is_test=tuple(is_test),
    )


def verify_split(split: DomainSplit, ds: GraphDataset) -> None:
    """Raise DataError if the split does not belong to this dataset."""
    if split.dataset_hash != dataset_hash(ds):
        raise DataError(
            f"split manifest was built for a different {split.dataset_name} "
            "corpus (dataset hash mismatch)"
        )
    if len(split.domains) != len(ds.graphs):
        raise DataError("split length does not match dataset size")
