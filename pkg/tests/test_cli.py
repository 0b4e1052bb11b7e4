import json
from pathlib import Path

import numpy as np
import pytest

from gmmle.cli import ConfigError, main, parse_config_text, PIPELINE_SCHEMA
from gmmle.simulate import adjusted_rand_index


def write_config(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SIM_CONF = """
sbm.rates = 5,0.5,0.5; 0.5,5,0.5; 0.5,0.5,5
sbm.gene_block_sizes = 60,60,60
sbm.cell_block_sizes = 70,70,70
sbm.seed = 0
output.directory = {out}
"""

PIPE_CONF = """
input.path = {mtx}
qc.enable = true
qc.min_cells_per_feature = 1
qc.min_features_per_cell = 1
qc.max_top_share = 1.0
qc.max_mito_share = none
qc.max_ribo_share = none
features.top_k = 120
cluster.method = gmm
cluster.k_strategy = fixed
cluster.k = 3
layout.enable = true
layout.epochs = 60
output.directory = {out}
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sim")
    conf = tmp / "sim.conf"
    conf.write_text(SIM_CONF.format(out=tmp / "data"))
    assert main(["simulate", "--config", str(conf)]) == 0
    return tmp / "data"


def read_labels(path):
    rows = [line.split("\t") for line in Path(path).read_text().splitlines()[1:]]
    return {cid: int(lab) for cid, lab in rows}


class TestConfigParsing:
    def test_unknown_key_is_hard_error(self):
        raw = parse_config_text("input.path = x\nspectral.setting = 3\n")
        with pytest.raises(ConfigError, match="spectral.setting"):
            PIPELINE_SCHEMA.apply(raw)

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="input.path"):
            PIPELINE_SCHEMA.apply(parse_config_text("qc.enable = true\n"))

    def test_bad_value_names_key(self):
        raw = parse_config_text("input.path = x\nfeatures.top_k = lots\n")
        with pytest.raises(ConfigError, match="features.top_k"):
            PIPELINE_SCHEMA.apply(raw)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("a.b = 1\na.b = 2\n")

    def test_comments_and_blanks_ignored(self):
        raw = parse_config_text("# heading\n\ninput.path = x\n")
        assert raw == {"input.path": "x"}

    def test_defaults_mirror_documented_values(self):
        values = PIPELINE_SCHEMA.apply(parse_config_text("input.path = x\n"))
        assert values["features.top_k"] == 2000
        assert values["spectral.energy_threshold"] == 0.01
        assert values["spectral.drop_first"] is True
        assert values["spectral.scaling"] == "sqrt"
        assert values["layout.n_neighbors"] == 15
        assert values["layout.epochs"] == 200


class TestSimulateCommand:
    def test_artifacts_exist(self, sim_dir):
        for name in (
            "counts.mtx",
            "counts.features.txt",
            "counts.cells.txt",
            "truth_cells.tsv",
            "truth_genes.tsv",
        ):
            assert (sim_dir / name).exists()

    def test_rerun_identical(self, sim_dir, tmp_path):
        conf = tmp_path / "sim.conf"
        conf.write_text(SIM_CONF.format(out=tmp_path / "data"))
        assert main(["simulate", "--config", str(conf)]) == 0
        assert (tmp_path / "data" / "counts.mtx").read_bytes() == (
            sim_dir / "counts.mtx"
        ).read_bytes()

    def test_zero_rate_config(self, tmp_path):
        conf = write_config(
            tmp_path,
            "zero.conf",
            "sbm.rates = 0\nsbm.gene_block_sizes = 5\nsbm.cell_block_sizes = 5\n"
            f"output.directory = {tmp_path / 'z'}\n",
        )
        assert main(["simulate", "--config", conf]) == 0
        text = (tmp_path / "z" / "counts.mtx").read_text()
        assert text.splitlines()[1] == "5 5 0"


class TestPipelineCommand:
    def test_end_to_end_recovers_blocks(self, sim_dir, tmp_path):
        out = tmp_path / "run"
        conf = write_config(
            tmp_path, "pipe.conf",
            PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=out),
        )
        assert main(["pipeline", "--config", conf]) == 0
        got = read_labels(out / "labels.tsv")
        truth = read_labels(sim_dir / "truth_cells.tsv")
        cells = sorted(got)
        ari = adjusted_rand_index(
            np.array([got[c] for c in cells]), np.array([truth[c] for c in cells])
        )
        assert ari >= 0.95
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["stages"]["cluster"]["n_clusters"] == 3
        assert "modularity_knn20" in metrics
        assert (out / "embedding.tsv").exists()
        assert (out / "layout.tsv").exists()
        assert (out / "qc_report.json").exists()

    def test_unknown_key_exits_nonzero_without_outputs(self, sim_dir, tmp_path, capsys):
        out = tmp_path / "run2"
        conf = write_config(
            tmp_path, "bad.conf",
            PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=out) + "qc.bogus = 1\n",
        )
        assert main(["pipeline", "--config", conf]) == 1
        assert "qc.bogus" in capsys.readouterr().err
        assert not out.exists()

    def test_rerun_byte_identical(self, sim_dir, tmp_path):
        confs = []
        for name in ("a", "b"):
            out = tmp_path / name
            confs.append(
                write_config(
                    tmp_path, f"{name}.conf",
                    PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=out),
                )
            )
        assert main(["pipeline", "--config", confs[0]]) == 0
        assert main(["pipeline", "--config", confs[1]]) == 0
        for artifact in ("labels.tsv", "layout.tsv", "embedding.tsv"):
            assert (tmp_path / "a" / artifact).read_bytes() == (
                tmp_path / "b" / artifact
            ).read_bytes()

        def key_structure(node):
            if isinstance(node, dict):
                return [(k, key_structure(v)) for k, v in node.items()]
            return None

        metrics = [
            json.loads((tmp_path / run / "metrics.json").read_text())
            for run in ("a", "b")
        ]
        # values include wall times, but key names and ordering are stable
        assert key_structure(metrics[0]) == key_structure(metrics[1])

    def test_stage_named_on_failure(self, tmp_path, capsys):
        conf = write_config(
            tmp_path, "missing.conf",
            PIPE_CONF.format(mtx=tmp_path / "nope.mtx", out=tmp_path / "r"),
        )
        assert main(["pipeline", "--config", conf]) == 1
        err = capsys.readouterr().err
        assert "nope.mtx" in err

    def test_seed_override_changes_layout(self, sim_dir, tmp_path):
        base_conf = PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=tmp_path / "s1")
        conf1 = write_config(tmp_path, "s1.conf", base_conf)
        conf2 = write_config(
            tmp_path, "s2.conf",
            PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=tmp_path / "s2"),
        )
        assert main(["pipeline", "--config", conf1]) == 0
        assert main(["pipeline", "--config", conf2, "--seed", "9"]) == 0
        assert (tmp_path / "s1" / "layout.tsv").read_bytes() != (
            tmp_path / "s2" / "layout.tsv"
        ).read_bytes()

    def test_louvain_method(self, sim_dir, tmp_path):
        # modularity maximization may legitimately split blocks at the
        # default resolution; at resolution 0.5 the three blocks are the
        # optimum on this fixture
        out = tmp_path / "louv"
        conf_text = (
            PIPE_CONF.format(mtx=sim_dir / "counts.mtx", out=out)
            .replace("cluster.method = gmm", "cluster.method = louvain")
            .replace("layout.enable = true", "layout.enable = false")
            + "cluster.resolution = 0.5\n"
        )
        conf = write_config(tmp_path, "louv.conf", conf_text)
        assert main(["pipeline", "--config", conf]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["stages"]["cluster"]["method"] == "louvain"
        got = read_labels(out / "labels.tsv")
        truth = read_labels(sim_dir / "truth_cells.tsv")
        cells = sorted(got)
        ari = adjusted_rand_index(
            np.array([got[c] for c in cells]), np.array([truth[c] for c in cells])
        )
        assert ari >= 0.95
        assert metrics["stages"]["cluster"]["n_clusters"] == 3


class TestScatterCommand:
    def write_inputs(self, tmp_path, n=3, clusters=(0, 1, 0)):
        layout_path = tmp_path / "layout.tsv"
        labels_path = tmp_path / "labels.tsv"
        rows = ["cell_id\tx\ty"] + [f"c{i}\t{i}.0\t{i * 2}.0" for i in range(n)]
        layout_path.write_text("\n".join(rows) + "\n")
        rows = ["cell_id\tcluster"] + [f"c{i}\t{clusters[i]}" for i in range(n)]
        labels_path.write_text("\n".join(rows) + "\n")
        return layout_path, labels_path

    def test_svg_structure(self, tmp_path):
        layout_path, labels_path = self.write_inputs(tmp_path)
        out = tmp_path / "plot.svg"
        assert main(["scatter", str(layout_path), str(labels_path), str(out)]) == 0
        svg = out.read_text()
        assert svg.count("<circle") == 3
        fills = {part.split('fill="')[1].split('"')[0]
                 for part in svg.split("<circle")[1:]}
        assert len(fills) == 2

    def test_rerun_byte_identical(self, tmp_path):
        layout_path, labels_path = self.write_inputs(tmp_path)
        out1, out2 = tmp_path / "a.svg", tmp_path / "b.svg"
        assert main(["scatter", str(layout_path), str(labels_path), str(out1)]) == 0
        assert main(["scatter", str(layout_path), str(labels_path), str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_id_mismatch_rejected(self, tmp_path, capsys):
        layout_path, labels_path = self.write_inputs(tmp_path)
        labels_path.write_text("cell_id\tcluster\nc0\t0\nc1\t1\nGHOST\t0\n")
        out = tmp_path / "x.svg"
        assert main(["scatter", str(layout_path), str(labels_path), str(out)]) == 1
        assert "differ" in capsys.readouterr().err

    def test_empty_input_rejected(self, tmp_path, capsys):
        layout_path = tmp_path / "layout.tsv"
        layout_path.write_text("cell_id\tx\ty\n")
        labels_path = tmp_path / "labels.tsv"
        labels_path.write_text("cell_id\tcluster\n")
        assert main(["scatter", str(layout_path), str(labels_path),
                     str(tmp_path / "e.svg")]) == 1
        assert "empty" in capsys.readouterr().err


class TestQcCommand:
    def test_writes_filtered_matrix_and_report(self, tmp_path):
        mtx = tmp_path / "m.mtx"
        mtx.write_text(
            "%%MatrixMarket matrix coordinate integer general\n"
            "3 3 6\n1 1 5\n1 2 5\n2 1 4\n2 2 4\n2 3 4\n3 3 1\n"
        )
        conf = write_config(
            tmp_path, "qc.conf",
            f"input.path = {mtx}\nqc.min_cells_per_feature = 2\n"
            "qc.min_features_per_cell = 1\nqc.max_top_share = 1.0\n"
            "qc.max_mito_share = none\nqc.max_ribo_share = none\n"
            f"output.directory = {tmp_path / 'q'}\n",
        )
        assert main(["qc", "--config", conf]) == 0
        report = json.loads((tmp_path / "q" / "qc_report.json").read_text())
        assert report["features_out"] == 2
        assert (tmp_path / "q" / "filtered.mtx").exists()


class TestValidateCommand:
    def test_typing_and_gating(self, tmp_path):
        mtx = tmp_path / "m.mtx"
        # 4 features x 4 cells: A markers rows 1-2, B markers rows 3-4
        mtx.write_text(
            "%%MatrixMarket matrix coordinate integer general\n"
            "4 4 8\n1 1 5\n1 2 6\n2 1 4\n2 2 5\n3 3 7\n3 4 6\n4 3 5\n4 4 4\n"
        )
        (tmp_path / "m.features.txt").write_text("a1\na2\nb1\nb2\n")
        (tmp_path / "m.cells.txt").write_text("w\nx\ny\nz\n")
        labels = tmp_path / "labels.tsv"
        labels.write_text("cell_id\tcluster\nw\t0\nx\t0\ny\t1\nz\t1\n")
        panels = tmp_path / "panels.tsv"
        panels.write_text("A\ta1\nA\ta2\nB\tb1\nB\tb2\n")
        conf = write_config(
            tmp_path, "val.conf",
            f"input.path = {mtx}\nvalidate.labels_path = {labels}\n"
            f"validate.panels_path = {panels}\n"
            "validate.gate_positive = a1,a2\nvalidate.gate_cluster = 0\n"
            f"output.directory = {tmp_path / 'v'}\n",
        )
        assert main(["validate", "--config", conf]) == 0
        types = (tmp_path / "v" / "cluster_types.tsv").read_text().splitlines()
        assert types == ["cluster\tcell_type", "0\tA", "1\tB"]
        gated = (tmp_path / "v" / "gated_cells.tsv").read_text().splitlines()
        assert gated == ["cell_id", "w", "x"]
        assert (tmp_path / "v" / "marker_ratios.tsv").exists()
