"""Cell-cell graphs, the modularity statistic, and Louvain clustering.

Modularity of a labeling C over a weighted symmetric graph is

    Q(C) = (1/W) * sum_ij (A_ij - D_i * D_j / W) * [label(i) == label(j)]

with A the symmetric adjacency (both orientations of every stored edge),
D_i its row sums and W the grand total, so each undirected edge counts
twice and diagonal expected-weight terms are included.  Louvain greedily
maximizes Q by single-node moves followed by graph aggregation; it is a
baseline to compare against likelihood-based clustering, not a replica of
any particular toolchain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixture import ClusterLabels
from .rng import CounterRng


@dataclass(frozen=True)
class CellGraph:
    """Undirected weighted graph; each edge stored once with i < j."""

    n: int
    edges_i: np.ndarray
    edges_j: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.edges_i, dtype=np.int64)
        j = np.asarray(self.edges_j, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "edges_i", i)
        object.__setattr__(self, "edges_j", j)
        object.__setattr__(self, "weights", w)
        if not (i.shape == j.shape == w.shape):
            raise ValueError("edge arrays must have equal length")
        if i.size:
            if (i >= j).any():
                raise ValueError("edges must satisfy i < j (no self-loops)")
            if i.min() < 0 or j.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if not np.isfinite(w).all() or (w < 0).any():
                raise ValueError("weights must be finite and non-negative")

    @property
    def n_edges(self) -> int:
        return self.edges_i.size

    def degree_vector(self) -> np.ndarray:
        """Weighted degrees D_i (each stored edge contributes to both ends)."""
        deg = np.zeros(self.n)
        np.add.at(deg, self.edges_i, self.weights)
        np.add.at(deg, self.edges_j, self.weights)
        return deg

    def neighbor_lists(self):
        """Adjacency as parallel arrays per node: (neighbors, weights)."""
        nbr: list[list[int]] = [[] for _ in range(self.n)]
        wts: list[list[float]] = [[] for _ in range(self.n)]
        for a, b, w in zip(self.edges_i, self.edges_j, self.weights):
            nbr[a].append(int(b))
            wts[a].append(float(w))
            nbr[b].append(int(a))
            wts[b].append(float(w))
        return nbr, wts


def knn_graph(coords, k: int) -> CellGraph:
    """Exact Euclidean k-nearest-neighbour graph, symmetrized by union.

    Distance ties break by index; edges carry unit weight.
    """
    points = np.asarray(coords, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("coordinates must be n x d")
    n = points.shape[0]
    if not (1 <= k < n):
        raise ValueError(f"k={k} outside [1, {n - 1}]")

    pairs = set()
    # chunked O(n^2) scan keeps memory bounded at larger n
    chunk = max(1, min(n, 2_000_000 // max(n, 1)))
    sq_norms = (points**2).sum(axis=1)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        dist_sq = sq_norms[start:stop, None] - 2.0 * (block @ points.T) + sq_norms[None, :]
        np.maximum(dist_sq, 0.0, out=dist_sq)
        for local, row in enumerate(dist_sq):
            i = start + local
            row[i] = np.inf  # exclude self
            order = np.lexsort((np.arange(n), row))  # distance, then index
            for j in order[:k]:
                pairs.add((min(i, int(j)), max(i, int(j))))

    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        return CellGraph(n, arr[:, 0], arr[:, 1], np.ones(arr.shape[0]))
    return CellGraph(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))


def _community_sums(graph: CellGraph, labels: np.ndarray):
    """(within-community stored-edge weight, community degree totals, W)."""
    deg = graph.degree_vector()
    total_weight = float(deg.sum())  # = 2 * sum of stored weights
    n_comms = labels.max() + 1
    internal = np.zeros(n_comms)
    same = labels[graph.edges_i] == labels[graph.edges_j]
    np.add.at(internal, labels[graph.edges_i[same]], graph.weights[same])
    comm_degree = np.zeros(n_comms)
    np.add.at(comm_degree, labels, deg)
    return internal, comm_degree, total_weight


def modularity(graph: CellGraph, labels: ClusterLabels) -> float:
    """Observed-minus-expected within-cluster weight share."""
    lab = labels.labels if isinstance(labels, ClusterLabels) else np.asarray(labels)
    if lab.size != graph.n:
        raise ValueError(f"{lab.size} labels for {graph.n} nodes")
    internal, comm_degree, total_weight = _community_sums(graph, lab)
    if total_weight <= 0.0:
        raise ValueError("graph has no edge weight")
    observed = 2.0 * internal.sum() / total_weight
    expected = float((comm_degree**2).sum()) / (total_weight * total_weight)
    return observed - expected


@dataclass(frozen=True)
class LouvainResult:
    labels: ClusterLabels
    level_modularity: tuple[float, ...]  # incrementally maintained Q per level
    level_labels: tuple[np.ndarray, ...] = ()  # flat labels at each level end


class _LevelGraph:
    """Aggregated adjacency with self-loops, in matrix convention:
    self_loops[c] equals the full double-sum of internal weight."""

    def __init__(self, n, adj, self_loops):
        self.n = n
        self.adj = adj  # list[dict[int, float]], no self entries
        self.self_loops = self_loops

    @classmethod
    def from_cell_graph(cls, graph: CellGraph) -> "_LevelGraph":
        adj = [dict() for _ in range(graph.n)]
        for a, b, w in zip(graph.edges_i, graph.edges_j, graph.weights):
            a, b, w = int(a), int(b), float(w)
            adj[a][b] = adj[a].get(b, 0.0) + w
            adj[b][a] = adj[b].get(a, 0.0) + w
        return cls(graph.n, adj, np.zeros(graph.n))

    def degrees(self) -> np.ndarray:
        deg = np.array([sum(nbrs.values()) for nbrs in self.adj])
        return deg + self.self_loops

    def aggregate(self, labels: np.ndarray) -> "_LevelGraph":
        n_comms = labels.max() + 1
        self_loops = np.zeros(n_comms)
        adj = [dict() for _ in range(n_comms)]
        for node, nbrs in enumerate(self.adj):
            a = labels[node]
            self_loops[a] += self.self_loops[node]
            for other, w in nbrs.items():
                b = labels[other]
                if a == b:
                    self_loops[a] += w  # both orientations visited -> 2w total
                elif node < other:
                    adj[a][b] = adj[a].get(b, 0.0) + w
                    adj[b][a] = adj[b].get(a, 0.0) + w
        return _LevelGraph(n_comms, adj, self_loops)


def _one_level(level: _LevelGraph, rng: CounterRng, resolution: float):
    """Single-node move phase.

    Returns (labels, moved_any, q_incremental) where q_incremental is the
    level's modularity maintained through per-move bookkeeping; aggregation
    preserves Q exactly, so at resolution 1 this must equal modularity() of
    the composed flat labels (asserted by the test suite).
    """
    n = level.n
    degree = level.degrees()
    total_weight = float(degree.sum())
    community = np.arange(n)
    comm_degree = degree.copy()
    # internal[c]: full double-sum of weight inside c, incl. self-loops
    internal = level.self_loops.copy()
    order = rng.permutation(n)

    moved_any = False
    # pass cap is a safety valve; strict-improvement moves terminate long before
    for _ in range(200):
        moved_this_pass = False
        for node in order:
            node = int(node)
            home = int(community[node])
            k_node = degree[node]
            self_node = level.self_loops[node]
            link = {}
            for other, w in level.adj[node].items():
                link[int(community[other])] = link.get(int(community[other]), 0.0) + w

            comm_degree[home] -= k_node
            internal[home] -= 2.0 * link.get(home, 0.0) + self_node

            # gain of joining community c, relative to staying isolated
            def gain(comm: int) -> float:
                return (
                    2.0 * link.get(comm, 0.0) / total_weight
                    - 2.0 * resolution * comm_degree[comm] * k_node
                    / (total_weight * total_weight)
                )

            # strict improvement only, so an exact tie keeps the home
            # community (no churn) or the smallest-id earlier candidate
            best_comm, best_gain = home, gain(home)
            for comm in sorted(link):
                g = gain(comm)
                if g > best_gain:
                    best_comm, best_gain = comm, g

            comm_degree[best_comm] += k_node
            internal[best_comm] += 2.0 * link.get(best_comm, 0.0) + self_node
            if best_comm != home:
                community[node] = best_comm
                moved_this_pass = True
                moved_any = True
        if not moved_this_pass:
            break

    q_incremental = float(
        internal.sum() / total_weight
        - resolution * (comm_degree**2).sum() / (total_weight * total_weight)
    )
    # renumber to consecutive ids by first occurrence
    _, renumbered = np.unique(community, return_inverse=True)
    return renumbered, moved_any, q_incremental


def louvain_trace(graph: CellGraph, seed: int = 0, resolution: float = 1.0) -> LouvainResult:
    """Louvain with per-level flat modularity recorded."""
    if graph.n_edges == 0:
        return LouvainResult(ClusterLabels(np.arange(graph.n), graph.n), (), ())
    level = _LevelGraph.from_cell_graph(graph)
    rng = CounterRng(seed)
    flat = np.arange(graph.n)
    trace = []
    level_labels = []
    while True:
        labels, moved, q_incremental = _one_level(level, rng, resolution)
        if not moved:
            break
        flat = labels[flat]
        trace.append(q_incremental)
        level_labels.append(flat.copy())
        if labels.max() + 1 == level.n:
            break
        level = level.aggregate(labels)

    # final relabel by first occurrence over node order
    _, flat = np.unique(flat, return_inverse=True)
    first_seen = {}
    remap = np.empty(int(flat.max()) + 1, dtype=np.int64)
    next_id = 0
    for lab in flat:
        if int(lab) not in first_seen:
            first_seen[int(lab)] = next_id
            remap[int(lab)] = next_id
            next_id += 1
    flat = remap[flat]
    return LouvainResult(ClusterLabels(flat, next_id), tuple(trace), tuple(level_labels))


def louvain(graph: CellGraph, seed: int = 0, resolution: float = 1.0) -> ClusterLabels:
    """Greedy two-phase modularity maximization; deterministic given seed."""
    return louvain_trace(graph, seed, resolution).labels


def graph_to_tsv(graph: CellGraph) -> str:
    lines = ["i\tj\tweight"]
    for a, b, w in zip(graph.edges_i, graph.edges_j, graph.weights):
        lines.append(f"{a}\t{b}\t{w:.10g}")
    return "\n".join(lines) + "\n"
