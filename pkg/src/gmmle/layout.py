"""Nonlinear 2-D layout of embedded cells (UMAP-style optimization).

A fuzzy neighborhood graph is built from exact k-nearest-neighbor
distances: each point's weights decay as exp(-(d - rho)/sigma) with rho the
distance to its nearest neighbor and sigma calibrated per point so the
weight sum hits log2(k); directed weights merge by the fuzzy union
a + b - a*b.  The layout then descends a cross-entropy-style objective by
per-edge stochastic updates: attraction follows the gradient of
log(1 + a*d^(2b)) along due edges, repulsion pushes each endpoint away from
sampled background points.  Updates are applied in deterministic batches
per epoch with a linearly decaying step, so a fixed seed reproduces the
layout bit for bit.

The curve constants a=1.577, b=0.8951 are the least-squares fit of
1/(1 + a*x^(2b)) to the min_dist=0.1 membership target; the test suite
re-derives them with an independent curve-fit oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .community import CellGraph
from .rng import CounterRng

GRADIENT_CLIP = 4.0
REPULSION_FLOOR = 0.001


class LayoutDivergedError(RuntimeError):
    """A coordinate became non-finite (step-size pathology)."""


@dataclass(frozen=True)
class LayoutParams:
    n_neighbors: int = 15
    min_dist: float = 0.1
    epochs: int = 200
    negative_samples: int = 5
    a: float = 1.577
    b: float = 0.8951
    initial_alpha: float = 1.0


@dataclass(frozen=True)
class Layout2D:
    coords: np.ndarray  # n x 2
    seed: int
    params: LayoutParams


def _knn_with_distances(points: np.ndarray, k: int):
    """Exact kNN indices and distances, ties broken by index."""
    n = points.shape[0]
    sq_norms = (points**2).sum(axis=1)
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    chunk = max(1, min(n, 2_000_000 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        dist_sq = sq_norms[start:stop, None] - 2.0 * (block @ points.T) + sq_norms[None, :]
        np.maximum(dist_sq, 0.0, out=dist_sq)
        for local in range(stop - start):
            i = start + local
            row = dist_sq[local]
            row[i] = np.inf
            order = np.lexsort((np.arange(n), row))[:k]
            idx[i] = order
            dist[i] = np.sqrt(row[order])
    return idx, dist


def _calibrate_sigma(distances: np.ndarray, target: float) -> float:
    """Binary search for sigma with sum_j exp(-max(0, d_j)/sigma) == target.

    ``distances`` are already shifted by rho (clamped at 0).  64 iterations
    or absolute tolerance 1e-5; saturates harmlessly when the target is
    unreachable (e.g. every distance equal to rho).
    """
    lo, hi = 0.0, math.inf
    mid = 1.0
    for _ in range(64):
        total = float(np.exp(-distances / mid).sum())
        if abs(total - target) < 1e-5:
            break
        if total > target:
            hi = mid
            mid = (lo + hi) / 2.0
        else:
            lo = mid
            mid = mid * 2.0 if math.isinf(hi) else (lo + hi) / 2.0
    return mid


def fuzzy_graph(coords, n_neighbors: int) -> CellGraph:
    """Weighted neighborhood graph with fuzzy-union symmetrization."""
    points = np.asarray(coords, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("coordinates must be n x d")
    n = points.shape[0]
    if not (1 <= n_neighbors < n):
        raise ValueError(f"n_neighbors={n_neighbors} outside [1, {n - 1}]")

    idx, dist = _knn_with_distances(points, n_neighbors)
    rho = dist[:, 0]
    target = math.log2(n_neighbors)

    directed: dict[tuple[int, int], float] = {}
    for i in range(n):
        shifted = np.maximum(dist[i] - rho[i], 0.0)
        sigma = _calibrate_sigma(shifted, target)
        if sigma > 0:
            weights = np.exp(-shifted / sigma)
        else:
            weights = (shifted <= 0.0).astype(float)
        weights[shifted <= 0.0] = 1.0  # nearest neighbors always weight 1
        for j, w in zip(idx[i], weights):
            directed[(i, int(j))] = float(w)

    merged: dict[tuple[int, int], float] = {}
    for (i, j), w_ij in directed.items():
        key = (min(i, j), max(i, j))
        if key in merged:
            continue
        w_ji = directed.get((j, i), 0.0)
        merged[key] = w_ij + w_ji - w_ij * w_ji

    pairs = np.array(sorted(merged), dtype=np.int64)
    weights = np.array([merged[tuple(p)] for p in pairs])
    return CellGraph(n, pairs[:, 0], pairs[:, 1], weights)


def fuzzy_union(a: float, b: float) -> float:
    """Symmetrization of two directed memberships: a + b - a*b."""
    return a + b - a * b


def attractive_gradient(head, tail, a: float, b: float) -> np.ndarray:
    """Gradient with respect to ``head`` of log(1 + a * d^(2b)).

    Points away from ``tail``; descent steps move the pair together.
    Zero at coincident points (the objective is flat-bottomed there for
    the b < 1 regime used here).
    """
    head = np.asarray(head, dtype=np.float64)
    tail = np.asarray(tail, dtype=np.float64)
    delta = head - tail
    dist_sq = float((delta * delta).sum())
    if dist_sq <= 0.0:
        return np.zeros_like(delta)
    coeff = 2.0 * a * b * dist_sq ** (b - 1.0) / (1.0 + a * dist_sq**b)
    return coeff * delta


def repulsive_push(head, tail, a: float, b: float) -> np.ndarray:
    """Displacement applied to ``head`` to repel it from ``tail``.

    Derived from the negative-sample term of the layout objective with a
    0.001 squared-distance floor; magnitude depends only on the distance.
    """
    head = np.asarray(head, dtype=np.float64)
    tail = np.asarray(tail, dtype=np.float64)
    delta = head - tail
    dist_sq = float((delta * delta).sum())
    coeff = 2.0 * b / ((REPULSION_FLOOR + dist_sq) * (1.0 + a * dist_sq**b))
    return coeff * delta


def _clip(values: np.ndarray) -> np.ndarray:
    return np.clip(values, -GRADIENT_CLIP, GRADIENT_CLIP)


def optimize_layout(
    graph: CellGraph,
    init,
    params: LayoutParams | None = None,
    seed: int = 0,
) -> Layout2D:
    """Stochastic per-edge layout optimization.

    ``init`` (n x 2, typically the first two embedding coordinates) is
    rescaled to max-abs 10 so the step schedule is independent of the
    embedding's scale.  Edge e is revisited every max_weight/weight_e
    epochs; each visit attracts both endpoints along the gradient of
    log(1 + a*d^(2b)) and repels each endpoint from ``negative_samples``
    uniformly sampled points.  Per-component updates are clipped to +/-4
    and scaled by a learning rate decaying linearly from initial_alpha
    to 0.  Deterministic for a fixed seed.
    """
    params = params or LayoutParams()
    coords = np.array(init, dtype=np.float64, copy=True)
    if coords.ndim != 2 or coords.shape != (graph.n, 2):
        raise ValueError(f"init must be {graph.n} x 2")
    if not np.isfinite(coords).all():
        raise ValueError("init contains non-finite coordinates")
    if graph.n_edges == 0:
        return Layout2D(coords, seed, params)

    scale = np.abs(coords).max()
    if scale > 0:
        coords *= 10.0 / scale

    n = graph.n
    a, b = params.a, params.b
    heads = graph.edges_i
    tails = graph.edges_j
    weights = graph.weights
    positive = weights > 0
    heads, tails, weights = heads[positive], tails[positive], weights[positive]
    epochs_per_sample = weights.max() / weights
    next_due = epochs_per_sample.copy()
    rng = CounterRng(seed)
    n_neg = params.negative_samples

    for epoch in range(params.epochs):
        alpha = params.initial_alpha * (1.0 - epoch / params.epochs)
        due = next_due <= epoch
        if due.any():
            h = heads[due]
            t = tails[due]
            delta = coords[h] - coords[t]
            dist_sq = (delta * delta).sum(axis=1)
            attract = np.zeros_like(delta)
            moving = dist_sq > 0.0
            coeff = (
                2.0 * a * b * dist_sq[moving] ** (b - 1.0)
                / (1.0 + a * dist_sq[moving] ** b)
            )
            attract[moving] = _clip(coeff[:, None] * delta[moving])
            # descend: pull the pair together from both ends
            np.add.at(coords, h, -alpha * attract)
            np.add.at(coords, t, alpha * attract)

            for side in (h, t):
                anchors = np.repeat(side, n_neg)
                others = rng.integers(n, anchors.size)
                delta_r = coords[anchors] - coords[others]
                dist_sq_r = (delta_r * delta_r).sum(axis=1)
                coeff_r = 2.0 * b / (
                    (REPULSION_FLOOR + dist_sq_r) * (1.0 + a * dist_sq_r**b)
                )
                push = _clip(coeff_r[:, None] * delta_r)
                coincident = (dist_sq_r == 0.0) & (anchors != others)
                push[coincident] = GRADIENT_CLIP  # arbitrary fixed kick apart
                push[anchors == others] = 0.0
                np.add.at(coords, anchors, alpha * push)

            next_due[due] += epochs_per_sample[due]

    if not np.isfinite(coords).all():
        raise LayoutDivergedError("layout diverged: non-finite coordinate")
    return Layout2D(coords, seed, params)


def layout_to_tsv(layout: Layout2D, cell_ids) -> str:
    lines = ["cell_id\tx\ty"]
    for cid, (x, y) in zip(cell_ids, layout.coords):
        lines.append(f"{cid}\t{x:.12g}\t{y:.12g}")
    return "\n".join(lines) + "\n"
