"""Embedding/assignment/adjacency export contracts."""

import json

import numpy as np
import pytest

from mtspool.dataio import make_synthetic, split_train_test
from mtspool.exports import (
    export_adjacency,
    export_assignments,
    export_embeddings,
    principal_components_2d,
    read_csv_rows,
)
from mtspool.model import GraphPoolModel, ModelConfig


@pytest.fixture
def setup(tmp_path):
    ds = make_synthetic(2, 4, 16, 3, seed=4)
    train, test = split_train_test(ds)
    cfg = ModelConfig(
        num_series=4,
        series_length=16,
        num_classes=2,
        kernel_sizes=(3,),
        channels_per_size=2,
        gnn_dims=(6,),
        heads=2,
        reduction=2,
        classifier_hidden=4,
        seed=5,
    )
    return GraphPoolModel(cfg), train, tmp_path


class TestEmbeddings:
    def test_row_and_column_counts(self, setup):
        model, train, tmp = setup
        path = tmp / "emb.csv"
        export_embeddings(model, train, path)
        rows = read_csv_rows(path)
        assert len(rows) == len(train.samples) + 1
        d_final = model.pool.d_out
        assert all(len(r) == 2 + d_final for r in rows)

    def test_pca_companion_file(self, setup):
        model, train, tmp = setup
        path = tmp / "emb.csv"
        export_embeddings(model, train, path)
        rows = read_csv_rows(tmp / "emb_pca2.csv")
        assert rows[0] == ["sample_index", "label", "pc1", "pc2"]
        assert len(rows) == len(train.samples) + 1

    def test_labels_match_dataset(self, setup):
        model, train, tmp = setup
        path = tmp / "emb.csv"
        export_embeddings(model, train, path)
        rows = read_csv_rows(path)[1:]
        for row, sample in zip(rows, train.samples):
            assert int(row[1]) == sample.label


class TestPca:
    def test_two_d_input_reproduced_up_to_rotation(self, rng):
        # Orthogonal Procrustes: solve for the best rotation/reflection and
        # check the residual vanishes.
        x = rng.standard_normal((40, 2))
        proj = principal_components_2d(x)
        centered = x - x.mean(axis=0)
        u, _, vt = np.linalg.svd(proj.T @ centered)
        rot = u @ vt
        np.testing.assert_allclose(proj @ rot, centered, atol=1e-9)

    def test_projection_shape_for_wide_input(self, rng):
        x = rng.standard_normal((10, 7))
        assert principal_components_2d(x).shape == (10, 2)

    def test_width_one_input_padded(self, rng):
        x = rng.standard_normal((6, 1))
        proj = principal_components_2d(x)
        assert proj.shape == (6, 2)
        np.testing.assert_array_equal(proj[:, 1], np.zeros(6))


class TestAssignments:
    def test_per_layer_files_and_counts(self, setup):
        model, train, tmp = setup
        out = tmp / "assign"
        written = export_assignments(model, train.samples[0], out)
        layer_files = [p for p in written if p.endswith(".csv")]
        assert len(layer_files) == len(model.pool.schedule)
        node_counts = [model.config.num_series] + model.pool.schedule[:-1]
        for path, expect_nodes, n_pool in zip(
            layer_files, node_counts, model.pool.schedule
        ):
            rows = read_csv_rows(path)
            assert rows[0] == ["node_index", "cluster_index"]
            assert len(rows) == expect_nodes + 1
            clusters = {int(r[1]) for r in rows[1:]}
            assert len(clusters) <= n_pool
            assert all(0 <= c < n_pool for c in clusters)

    def test_single_cluster_layer_maps_everything_to_zero(self, setup):
        model, train, tmp = setup
        out = tmp / "assign"
        written = export_assignments(model, train.samples[0], out)
        last_csv = [p for p in written if p.endswith(".csv")][-1]
        rows = read_csv_rows(last_csv)[1:]
        assert {r[1] for r in rows} == {"0"}

    def test_unused_clusters_sidecar(self, setup):
        model, train, tmp = setup
        out = tmp / "assign"
        written = export_assignments(model, train.samples[0], out)
        sidecar = [p for p in written if p.endswith(".json")][0]
        unused = json.loads(open(sidecar).read())
        assert set(unused) == {f"layer{j}" for j in range(len(model.pool.schedule))}
        for j, n_pool in enumerate(model.pool.schedule):
            assert all(0 <= c < n_pool for c in unused[f"layer{j}"])


class TestAdjacency:
    def test_matrix_shape(self, setup):
        model, train, tmp = setup
        path = tmp / "adj.csv"
        export_adjacency(model, train.samples[0], path)
        rows = read_csv_rows(path)
        n = model.config.num_series
        assert len(rows) == n and all(len(r) == n for r in rows)
        a = np.array([[float(v) for v in r] for r in rows])
        assert np.all(a >= 0.0)

    def test_overwrite_is_atomic_and_idempotent(self, setup):
        model, train, tmp = setup
        path = tmp / "adj.csv"
        export_adjacency(model, train.samples[0], path)
        first = path.read_bytes()
        export_adjacency(model, train.samples[0], path)
        assert path.read_bytes() == first
