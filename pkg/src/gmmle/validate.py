"""Marker-panel scoring of clusterings.

Expression is summarized as the mean of ln(1 + count) over a
(features x cells) grid on raw counts, with no library-size normalization
(which could induce spurious correlations between transcripts).  A cluster
is typed by the panel with the greatest mean log expression; per-type
ratios compare a type's own markers against the pooled markers of the
other panels within the cells assigned to that type.  Presence/absence
gating retains cells expressing every required marker and none of the
forbidden ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core_matrix import CountMatrix
from .mixture import ClusterLabels


@dataclass(frozen=True)
class MarkerPanel:
    name: str
    features: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError(f"panel {self.name!r} has no features")


def _resolve_features(counts: CountMatrix, feature_ids, context: str) -> np.ndarray:
    index = {fid: i for i, fid in enumerate(counts.feature_ids)}
    found = [index[f] for f in feature_ids if f in index]
    missing = [f for f in feature_ids if f not in index]
    if missing:
        warnings.warn(
            f"{context}: dropping unresolvable feature ids {missing}",
            stacklevel=3,
        )
    if not found:
        raise ValueError(f"{context}: no feature ids resolve against the matrix")
    return np.array(sorted(set(found)), dtype=np.int64)


def mean_log_expression(counts: CountMatrix, cell_indices, feature_indices) -> float:
    """Mean of ln(1 + count) over the feature x cell grid, zeros included."""
    cells = np.asarray(cell_indices, dtype=np.int64)
    feats = np.asarray(feature_indices, dtype=np.int64)
    if cells.size == 0 or feats.size == 0:
        raise ValueError("empty cell or feature subset")
    block = counts.csr()[feats][:, cells]
    total = float(np.log1p(block.data).sum())
    return total / (feats.size * cells.size)


def assign_cluster_types(
    counts: CountMatrix,
    labels: ClusterLabels,
    panels: list[MarkerPanel],
) -> dict[int, str]:
    """Type each cluster by its highest-scoring panel (first panel wins ties)."""
    if not panels:
        raise ValueError("no panels supplied")
    resolved = {
        panel.name: _resolve_features(counts, panel.features, f"panel {panel.name!r}")
        for panel in panels
    }
    assignment: dict[int, str] = {}
    for cluster in range(labels.n_clusters):
        cells = np.flatnonzero(labels.labels == cluster)
        if cells.size == 0:
            continue
        scores = [
            mean_log_expression(counts, cells, resolved[panel.name])
            for panel in panels
        ]
        best = int(np.argmax(scores))  # first maximum wins
        if sum(1 for s in scores if s == scores[best]) > 1:
            warnings.warn(
                f"cluster {cluster}: tie between panels; keeping "
                f"{panels[best].name!r} (input order)",
                stacklevel=2,
            )
        assignment[cluster] = panels[best].name
    return assignment


def marker_ratio_table(
    counts: CountMatrix,
    labels: ClusterLabels,
    panels: list[MarkerPanel],
    denominator: str = "pooled",
) -> dict[str, float | None]:
    """Per-type ratio of own-marker to other-marker mean log expression.

    For type t with assigned cell set S_t (union of clusters typed t):
    numerator is the t panel's mean log expression over S_t; the default
    "pooled" denominator uses the union of every other panel's features,
    "per_type_mean" averages the per-panel means instead.  Types with no
    assigned cells, or a zero denominator, are reported as None.
    """
    if denominator not in ("pooled", "per_type_mean"):
        raise ValueError(f"unknown denominator mode {denominator!r}")
    assignment = assign_cluster_types(counts, labels, panels)
    table: dict[str, float | None] = {}
    for panel in panels:
        member_clusters = [c for c, t in assignment.items() if t == panel.name]
        if not member_clusters:
            table[panel.name] = None
            continue
        cells = np.flatnonzero(np.isin(labels.labels, member_clusters))
        own = _resolve_features(counts, panel.features, f"panel {panel.name!r}")
        numerator = mean_log_expression(counts, cells, own)

        others = [p for p in panels if p.name != panel.name]
        if not others:
            table[panel.name] = None
            continue
        if denominator == "pooled":
            pooled: list[str] = []
            for p in others:
                pooled.extend(p.features)
            other_feats = _resolve_features(
                counts, dict.fromkeys(pooled), "other panels"
            )
            denom = mean_log_expression(counts, cells, other_feats)
        else:
            per_panel = [
                mean_log_expression(
                    counts, cells,
                    _resolve_features(counts, p.features, f"panel {p.name!r}"),
                )
                for p in others
            ]
            denom = float(np.mean(per_panel))
        if denom == 0.0:
            warnings.warn(
                f"type {panel.name!r}: zero denominator, ratio reported as absent",
                stacklevel=2,
            )
            table[panel.name] = None
        else:
            table[panel.name] = numerator / denom
    return table


def gate_cells(
    counts: CountMatrix,
    cell_indices,
    positive,
    negative,
    min_pos: int = 1,
    max_neg: int = 0,
) -> np.ndarray:
    """Cells with count >= min_pos for EVERY positive marker and
    count <= max_neg for EVERY negative marker.

    Marker ids must resolve against the matrix; raising min_pos can only
    shrink the result.
    """
    cells = np.asarray(cell_indices, dtype=np.int64)
    index = {fid: i for i, fid in enumerate(counts.feature_ids)}
    missing = [m for m in list(positive) + list(negative) if m not in index]
    if missing:
        raise ValueError(f"gate markers not present in matrix: {missing}")
    csr = counts.csr()
    keep = np.ones(cells.size, dtype=bool)
    for marker in positive:
        row = np.asarray(csr[index[marker]].toarray()).ravel()[cells]
        keep &= row >= min_pos
    for marker in negative:
        row = np.asarray(csr[index[marker]].toarray()).ravel()[cells]
        keep &= row <= max_neg
    return cells[keep]


def panels_from_tsv(text: str) -> list[MarkerPanel]:
    """Two-column TSV (type, feature_id); panel order = first appearance."""
    features: dict[str, list[str]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"panel TSV line {line_no}: expected 2 fields")
        features.setdefault(parts[0], []).append(parts[1])
    return [MarkerPanel(name, tuple(feats)) for name, feats in features.items()]


def ratio_table_to_tsv(table: dict[str, float | None]) -> str:
    lines = ["cell_type\tratio"]
    for name, value in table.items():
        lines.append(f"{name}\t{'NA' if value is None else f'{value:.10g}'}")
    return "\n".join(lines) + "\n"
