"""Command-line pipeline runner and artifact emission.

Subcommands: ``pipeline`` (ingest, QC, feature selection, spectral
embedding, clustering, optional 2-D layout), ``simulate`` (block-model
matrix plus truth labels), ``scatter`` (SVG of a layout colored by
cluster), ``qc`` (filters and report only) and ``validate`` (marker-panel
typing of existing labels).

Configuration is a flat key=value text file with dotted keys; unknown keys
are hard errors so a typo can never silently fall back to a default.
Every artifact is written via temp-file-and-rename, so a crashed run never
leaves a truncated file under a final name.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import community, core_matrix, features, layout, mixture, qc, simulate, spectral


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """Pipeline failure annotated with the stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def write_atomic(path: Path, text: str) -> None:
    """Write via temp file + rename in the destination directory."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and full-line # comments ignored."""
    out: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {line_no}: expected key = value")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"config line {line_no}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _to_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _to_optional_share(raw: str) -> float | None:
    if raw.lower() in ("none", "off", "disabled"):
        return None
    return float(raw)


def _to_str_list(raw: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def _to_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip())


def _to_k_range(raw: str) -> tuple[int, ...]:
    """Either "2,3,4" or "2:6" (inclusive)."""
    if ":" in raw:
        lo, hi = raw.split(":", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return _to_int_list(raw)


def _to_rates(raw: str) -> np.ndarray:
    rows = [row for row in raw.split(";") if row.strip()]
    return np.array([[float(v) for v in row.split(",")] for row in rows])


def _choice(*allowed: str) -> Callable[[str], str]:
    def convert(raw: str) -> str:
        if raw not in allowed:
            raise ValueError(f"expected one of {allowed}, got {raw!r}")
        return raw

    return convert


@dataclass
class Schema:
    converters: dict[str, Callable[[str], Any]]
    required: tuple[str, ...] = ()
    defaults: dict[str, Any] = field(default_factory=dict)

    def apply(self, raw: dict[str, str]) -> dict[str, Any]:
        unknown = set(raw) - set(self.converters)
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        missing = [key for key in self.required if key not in raw]
        if missing:
            raise ConfigError(f"missing required config key(s): {missing}")
        values = dict(self.defaults)
        for key, raw_value in raw.items():
            try:
                values[key] = self.converters[key](raw_value)
            except ValueError as err:
                raise ConfigError(f"config key {key!r}: {err}") from None
        return values


PIPELINE_SCHEMA = Schema(
    converters={
        "input.path": str,
        "input.format": _choice("matrix_market", "dense_tsv"),
        "qc.enable": _to_bool,
        "qc.min_cells_per_feature": int,
        "qc.min_features_per_cell": int,
        "qc.max_top_share": float,
        "qc.top_share_exclude": _to_str_list,
        "qc.max_mito_share": _to_optional_share,
        "qc.mito_prefix": str,
        "qc.max_ribo_share": _to_optional_share,
        "qc.ribo_prefixes": _to_str_list,
        "qc.cell_stats_on_raw": _to_bool,
        "features.enable": _to_bool,
        "features.top_k": int,
        "spectral.variant": _choice("normalized", "random_walk", "adjacency"),
        "spectral.energy_threshold": float,
        "spectral.drop_first": _to_bool,
        "spectral.scaling": _choice("none", "sqrt", "linear"),
        "spectral.seed": int,
        "cluster.method": _choice("gmm", "kmeans", "louvain"),
        "cluster.k_strategy": _choice("fixed", "bic", "d_plus_one"),
        "cluster.k": int,
        "cluster.k_range": _to_k_range,
        "cluster.seed": int,
        "cluster.knn_k": int,
        "cluster.resolution": float,
        "layout.enable": _to_bool,
        "layout.n_neighbors": int,
        "layout.min_dist": float,
        "layout.epochs": int,
        "layout.negative_samples": int,
        "layout.seed": int,
        "output.directory": str,
    },
    required=("input.path",),
    defaults={
        "input.format": "matrix_market",
        "qc.enable": True,
        "features.enable": True,
        "features.top_k": 2000,
        "spectral.variant": "normalized",
        "spectral.energy_threshold": 0.01,
        "spectral.drop_first": True,
        "spectral.scaling": "sqrt",
        "spectral.seed": 0,
        "cluster.method": "gmm",
        "cluster.k_strategy": "fixed",
        "cluster.k": 8,
        "cluster.seed": 0,
        "cluster.knn_k": 20,
        "cluster.resolution": 1.0,
        "layout.enable": True,
        "layout.n_neighbors": 15,
        "layout.min_dist": 0.1,
        "layout.epochs": 200,
        "layout.negative_samples": 5,
        "layout.seed": 0,
    },
)

SIMULATE_SCHEMA = Schema(
    converters={
        "sbm.rates": _to_rates,
        "sbm.gene_block_sizes": _to_int_list,
        "sbm.cell_block_sizes": _to_int_list,
        "sbm.seed": int,
        "sbm.mode": _choice("poisson", "multinomial"),
        "sbm.cell_total": int,
        "output.directory": str,
    },
    required=("sbm.rates", "sbm.gene_block_sizes", "sbm.cell_block_sizes"),
    defaults={"sbm.seed": 0, "sbm.mode": "poisson", "sbm.cell_total": None},
)

QC_SCHEMA = Schema(
    converters={
        key: conv
        for key, conv in PIPELINE_SCHEMA.converters.items()
        if key.startswith(("input.", "qc.")) or key == "output.directory"
    },
    required=("input.path",),
    defaults={"input.format": "matrix_market", "qc.enable": True},
)

VALIDATE_SCHEMA = Schema(
    converters={
        "input.path": str,
        "input.format": _choice("matrix_market", "dense_tsv"),
        "validate.labels_path": str,
        "validate.panels_path": str,
        "validate.denominator": _choice("pooled", "per_type_mean"),
        "validate.gate_positive": _to_str_list,
        "validate.gate_negative": _to_str_list,
        "validate.gate_cluster": int,
        "validate.gate_min_pos": int,
        "validate.gate_max_neg": int,
        "output.directory": str,
    },
    required=("input.path", "validate.labels_path", "validate.panels_path"),
    defaults={
        "input.format": "matrix_market",
        "validate.denominator": "pooled",
        "validate.gate_min_pos": 1,
        "validate.gate_max_neg": 0,
    },
)


def _build_qc_config(values: dict[str, Any]) -> qc.QcConfig:
    kwargs = {}
    mapping = {
        "qc.min_cells_per_feature": "min_cells_per_feature",
        "qc.min_features_per_cell": "min_features_per_cell",
        "qc.max_top_share": "max_top_share",
        "qc.top_share_exclude": "top_share_exclude",
        "qc.max_mito_share": "max_mito_share",
        "qc.mito_prefix": "mito_prefix",
        "qc.max_ribo_share": "max_ribo_share",
        "qc.ribo_prefixes": "ribo_prefixes",
        "qc.cell_stats_on_raw": "cell_stats_on_raw",
    }
    for key, attr in mapping.items():
        if key in values:
            kwargs[attr] = values[key]
    return qc.QcConfig(**kwargs)


def _read_input(values: dict[str, Any]) -> core_matrix.CountMatrix:
    path = Path(values["input.path"])
    if not path.exists():
        raise ConfigError(f"input.path does not exist: {path}")
    if values["input.format"] == "matrix_market":
        return core_matrix.read_matrix_market(path)
    return core_matrix.read_dense_tsv(path)


def _resolve_out_dir(values: dict[str, Any], override: str | None) -> Path:
    target = override or values.get("output.directory")
    if target is None:
        raise ConfigError("no output directory (set output.directory or pass --out)")
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


class _StageClock:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self.current: str = "setup"
        self._started = time.perf_counter()

    def enter(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[self.current] = round(now - self._started, 6)
        self.current = stage
        self._started = now

    def finish(self) -> None:
        self.enter("done")
        self.timings.pop("done", None)


def run_pipeline(values: dict[str, Any], out_dir: Path, seed_override: int | None) -> dict:
    """Execute the staged pipeline; returns the metrics payload.

    A failure in any stage surfaces as StageError naming the stage;
    artifacts already written stay in place.
    """
    if seed_override is not None:
        for key in ("spectral.seed", "cluster.seed", "layout.seed"):
            values[key] = seed_override
    if values["cluster.k_strategy"] == "bic" and "cluster.k_range" not in values:
        raise ConfigError("cluster.k_strategy=bic needs cluster.k_range")
    if values["cluster.k_strategy"] == "bic" and values["cluster.method"] != "gmm":
        raise ConfigError("cluster.k_strategy=bic requires cluster.method=gmm")

    clock = _StageClock()
    try:
        return _run_pipeline_stages(values, out_dir, clock)
    except Exception as err:
        raise StageError(clock.current, err) from err


def _run_pipeline_stages(values: dict[str, Any], out_dir: Path, clock: "_StageClock") -> dict:
    metrics: dict[str, Any] = {"stages": {}}

    clock.enter("ingest")
    counts = _read_input(values)
    metrics["stages"]["ingest"] = {
        "n_features": counts.n_features, "n_cells": counts.n_cells,
    }

    clock.enter("qc")
    if values["qc.enable"]:
        qc_config = _build_qc_config(values)
        counts, report = qc.run_qc(counts, qc_config)
        write_atomic(out_dir / "qc_report.json", report.to_json())
        metrics["stages"]["qc"] = {
            "n_features": counts.n_features, "n_cells": counts.n_cells,
        }

    clock.enter("features")
    if values["features.enable"]:
        scores = features.dispersion_scores(counts)
        mask = features.select_top_k(scores, values["features.top_k"])
        counts = core_matrix.submatrix(
            counts, mask, np.ones(counts.n_cells, dtype=bool)
        )
        col_deg = np.asarray(counts.csr().sum(axis=0)).ravel()
        empty_cells = int((col_deg == 0).sum())
        if empty_cells:
            # cells whose entire signal sat in unselected features cannot be
            # embedded; drop them and record the count
            counts = core_matrix.submatrix(
                counts, np.ones(counts.n_features, dtype=bool), col_deg > 0
            )
        metrics["stages"]["features"] = {
            "n_features": counts.n_features, "n_cells": counts.n_cells,
            "cells_dropped_empty": empty_cells,
        }

    clock.enter("spectral")
    variant = values["spectral.variant"]
    if variant == "normalized":
        lap = spectral.normalized_laplacian(counts)
    elif variant == "random_walk":
        lap = spectral.random_walk_laplacian(counts)
    else:
        lap = spectral.adjacency_embedding_matrix(counts)
    policy = spectral.EmbedPolicy(
        energy_threshold=values["spectral.energy_threshold"],
        drop_first=values["spectral.drop_first"],
        scaling_mode=values["spectral.scaling"],
        seed=values["spectral.seed"],
    )
    embedding = spectral.embed(lap, policy)
    write_atomic(out_dir / "embedding.tsv",
                 spectral.embedding_to_tsv(embedding, counts.cell_ids))
    write_atomic(out_dir / "embedding.json",
                 spectral.embedding_sidecar_json(embedding))
    metrics["stages"]["spectral"] = {
        "variant": variant,
        "dimension": embedding.dimension,
        "singular_values": [float(s) for s in embedding.singular_values],
        "component_shares": [float(s) for s in embedding.component_shares],
    }

    clock.enter("cluster")
    method = values["cluster.method"]
    cluster_seed = values["cluster.seed"]
    cluster_info: dict[str, Any] = {"method": method}
    model = None
    if method == "louvain":
        knn_k = min(values["cluster.knn_k"], embedding.coords.shape[0] - 1)
        graph = community.knn_graph(embedding.coords, knn_k)
        labels = community.louvain(
            graph, seed=cluster_seed, resolution=values["cluster.resolution"]
        )
        cluster_info["n_clusters"] = labels.n_clusters
        cluster_info["resolution"] = values["cluster.resolution"]
    else:
        strategy = values["cluster.k_strategy"]
        if strategy == "fixed":
            chosen = values["cluster.k"]
        elif strategy == "d_plus_one":
            chosen = embedding.dimension + 1
        else:
            selection = mixture.select_k(
                embedding.coords, values["cluster.k_range"],
                seed=cluster_seed, strategy="bic",
            )
            chosen = selection.n_clusters
            cluster_info["bic_table"] = [
                {"k": row.n_clusters, "log_likelihood": row.log_likelihood,
                 "bic": row.bic}
                for row in selection.diagnostics
            ]
        if method == "gmm":
            model, labels = mixture.fit_gmm(embedding.coords, chosen, seed=cluster_seed)
            cluster_info["log_likelihood"] = model.log_likelihood
            cluster_info["bic"] = mixture.bic(model, embedding.coords.shape[0])
            write_atomic(out_dir / "model.json",
                         mixture.model_to_json(model, embedding.coords.shape[0]))
        else:
            labels = mixture.fit_kmeans(
                embedding.coords, chosen, seed=cluster_seed
            ).labels
        cluster_info["n_clusters"] = labels.n_clusters
    write_atomic(out_dir / "labels.tsv",
                 mixture.labels_to_tsv(counts.cell_ids, labels))
    metrics["stages"]["cluster"] = cluster_info

    clock.enter("modularity")
    knn_k = min(values["cluster.knn_k"], embedding.coords.shape[0] - 1)
    metrics_graph = community.knn_graph(embedding.coords, knn_k)
    metrics["modularity_knn20"] = community.modularity(metrics_graph, labels)

    if values["layout.enable"]:
        clock.enter("layout")
        params = layout.LayoutParams(
            n_neighbors=min(values["layout.n_neighbors"],
                            embedding.coords.shape[0] - 1),
            min_dist=values["layout.min_dist"],
            epochs=values["layout.epochs"],
            negative_samples=values["layout.negative_samples"],
        )
        fuzzy = layout.fuzzy_graph(embedding.coords, params.n_neighbors)
        layout2d = layout.optimize_layout(
            fuzzy, embedding.coords[:, :2], params, seed=values["layout.seed"]
        )
        write_atomic(out_dir / "layout.tsv",
                     layout.layout_to_tsv(layout2d, counts.cell_ids))

    clock.finish()
    metrics["timings_sec"] = clock.timings
    write_atomic(out_dir / "metrics.json", json.dumps(metrics, indent=2))
    return metrics


def cmd_pipeline(args) -> int:
    values = PIPELINE_SCHEMA.apply(parse_config_text(Path(args.config).read_text()))
    out_dir = _resolve_out_dir(values, args.out)
    run_pipeline(values, out_dir, args.seed)
    return 0


def cmd_simulate(args) -> int:
    values = SIMULATE_SCHEMA.apply(parse_config_text(Path(args.config).read_text()))
    out_dir = _resolve_out_dir(values, args.out)
    seed = args.seed if args.seed is not None else values["sbm.seed"]
    config = simulate.SbmConfig(
        rates=values["sbm.rates"],
        gene_block_sizes=values["sbm.gene_block_sizes"],
        cell_block_sizes=values["sbm.cell_block_sizes"],
        seed=seed,
        mode=values["sbm.mode"],
        cell_total=values["sbm.cell_total"],
    )
    sample = simulate.sample_sbm(config)
    write_atomic(out_dir / "counts.mtx", core_matrix.matrix_market_text(sample.matrix))
    write_atomic(out_dir / "counts.features.txt",
                 "\n".join(sample.matrix.feature_ids) + "\n")
    write_atomic(out_dir / "counts.cells.txt",
                 "\n".join(sample.matrix.cell_ids) + "\n")
    write_atomic(out_dir / "truth_cells.tsv",
                 mixture.labels_to_tsv(sample.matrix.cell_ids, sample.cell_labels))
    gene_lines = ["feature_id\tblock"]
    gene_lines += [
        f"{fid}\t{lab}"
        for fid, lab in zip(sample.matrix.feature_ids, sample.gene_labels.labels)
    ]
    write_atomic(out_dir / "truth_genes.tsv", "\n".join(gene_lines) + "\n")
    return 0


PALETTE = (
    "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c",
    "#98df8a", "#d62728", "#ff9896", "#9467bd", "#c5b0d5",
    "#8c564b", "#c49c94", "#e377c2", "#f7b6d2", "#7f7f7f",
    "#c7c7c7", "#bcbd22", "#dbdb8d", "#17becf", "#9edae5",
)


def _read_tsv_rows(path: Path) -> list[list[str]]:
    lines = path.read_text().splitlines()
    return [line.split("\t") for line in lines if line.strip()]


def scatter_svg(layout_rows, label_by_cell) -> str:
    """Deterministic SVG: one circle per cell, palette cycled by cluster."""
    xs = np.array([float(r[1]) for r in layout_rows])
    ys = np.array([float(r[2]) for r in layout_rows])
    span_x = xs.max() - xs.min() or 1.0
    span_y = ys.max() - ys.min() or 1.0
    size, margin = 600.0, 30.0
    scale = min((size - 2 * margin) / span_x, (size - 2 * margin) / span_y)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect width="{size:.0f}" height="{size:.0f}" fill="white"/>',
    ]
    for row in layout_rows:
        cell, x, y = row[0], float(row[1]), float(row[2])
        cx = margin + (x - xs.min()) * scale
        cy = size - margin - (y - ys.min()) * scale  # y up
        color = PALETTE[label_by_cell[cell] % len(PALETTE)]
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_scatter(args) -> int:
    layout_rows = _read_tsv_rows(Path(args.layout))
    label_rows = _read_tsv_rows(Path(args.labels))
    if layout_rows and layout_rows[0][:1] == ["cell_id"]:
        layout_rows = layout_rows[1:]
    if label_rows and label_rows[0][:1] == ["cell_id"]:
        label_rows = label_rows[1:]
    if not layout_rows:
        raise ValueError("empty layout input")
    label_by_cell = {row[0]: int(row[1]) for row in label_rows}
    layout_cells = {row[0] for row in layout_rows}
    if layout_cells != set(label_by_cell):
        raise ValueError("cell id sets of layout and labels differ")
    write_atomic(Path(args.out), scatter_svg(layout_rows, label_by_cell))
    return 0


def cmd_qc(args) -> int:
    values = QC_SCHEMA.apply(parse_config_text(Path(args.config).read_text()))
    out_dir = _resolve_out_dir(values, args.out)
    counts = _read_input(values)
    filtered, report = qc.run_qc(counts, _build_qc_config(values))
    write_atomic(out_dir / "qc_report.json", report.to_json())
    write_atomic(out_dir / "filtered.mtx", core_matrix.matrix_market_text(filtered))
    write_atomic(out_dir / "filtered.features.txt",
                 "\n".join(filtered.feature_ids) + "\n")
    write_atomic(out_dir / "filtered.cells.txt",
                 "\n".join(filtered.cell_ids) + "\n")
    return 0


def cmd_validate(args) -> int:
    from . import validate as validate_mod

    values = VALIDATE_SCHEMA.apply(parse_config_text(Path(args.config).read_text()))
    out_dir = _resolve_out_dir(values, args.out)
    counts = _read_input(values)
    label_rows = _read_tsv_rows(Path(values["validate.labels_path"]))
    if label_rows and label_rows[0][:1] == ["cell_id"]:
        label_rows = label_rows[1:]
    label_by_cell = {row[0]: int(row[1]) for row in label_rows}
    missing = [cid for cid in counts.cell_ids if cid not in label_by_cell]
    if missing:
        raise ValueError(f"labels missing for {len(missing)} cells, e.g. {missing[:3]}")
    labels = mixture.ClusterLabels(
        np.array([label_by_cell[cid] for cid in counts.cell_ids]),
        max(label_by_cell.values()) + 1,
    )
    panels = validate_mod.panels_from_tsv(
        Path(values["validate.panels_path"]).read_text()
    )
    assignment = validate_mod.assign_cluster_types(counts, labels, panels)
    assign_lines = ["cluster\tcell_type"]
    assign_lines += [f"{c}\t{assignment[c]}" for c in sorted(assignment)]
    write_atomic(out_dir / "cluster_types.tsv", "\n".join(assign_lines) + "\n")
    table = validate_mod.marker_ratio_table(
        counts, labels, panels, denominator=values["validate.denominator"]
    )
    write_atomic(out_dir / "marker_ratios.tsv",
                 validate_mod.ratio_table_to_tsv(table))

    if "validate.gate_positive" in values or "validate.gate_negative" in values:
        if "validate.gate_cluster" not in values:
            raise ConfigError("gating needs validate.gate_cluster")
        cluster_cells = np.flatnonzero(
            labels.labels == values["validate.gate_cluster"]
        )
        gated = validate_mod.gate_cells(
            counts,
            cluster_cells,
            values.get("validate.gate_positive", ()),
            values.get("validate.gate_negative", ()),
            min_pos=values["validate.gate_min_pos"],
            max_neg=values["validate.gate_max_neg"],
        )
        gate_lines = ["cell_id"] + [counts.cell_ids[i] for i in gated]
        write_atomic(out_dir / "gated_cells.tsv", "\n".join(gate_lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmmle",
        description="Spectral embedding and mixture-model clustering for "
        "sparse count matrices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None,
                       help="override every stage seed")
        p.add_argument("--threads", type=int, default=0,
                       help="0 = deterministic single-thread (only mode implemented)")

    p_pipe = sub.add_parser("pipeline", help="run the full pipeline")
    common(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    p_sim = sub.add_parser("simulate", help="sample a block-model matrix")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_scatter = sub.add_parser("scatter", help="SVG scatter of a layout")
    p_scatter.add_argument("layout", help="layout.tsv")
    p_scatter.add_argument("labels", help="labels.tsv")
    p_scatter.add_argument("out", help="output .svg path")
    p_scatter.set_defaults(func=cmd_scatter)

    p_qc = sub.add_parser("qc", help="quality control only")
    common(p_qc)
    p_qc.set_defaults(func=cmd_qc)

    p_val = sub.add_parser("validate", help="marker-panel validation of labels")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 0) not in (0, 1):
        print(
            "note: parallel execution is not implemented; running single-threaded",
            file=sys.stderr,
        )
    try:
        return args.func(args)
    except Exception as err:  # noqa: BLE001 - single reporting point
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
