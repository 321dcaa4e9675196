"""CSV exports: graph-level embeddings (with a 2-D principal-component
projection), per-layer argmax cluster assignments, and adjacency dumps.

All writes are atomic (temp file then rename).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .dataio import Dataset
from .model import GraphPoolModel


def _atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def principal_components_2d(x: np.ndarray) -> np.ndarray:
    """Project rows of x onto their top two principal directions.

    Column-centered SVD projection; for width-1 input the second component
    is zero.
    """
    centered = x - x.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    take = min(2, vt.shape[0])
    proj = centered @ vt[:take].T
    if take < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - take))])
    return proj


def export_embeddings(model: GraphPoolModel, dataset: Dataset, path) -> None:
    """One row per sample: index, true label, embedding components.

    A companion ``<path stem>_pca2.csv`` holds the 2-D projection.
    """
    rows = []
    for idx, sample in enumerate(dataset.samples):
        _, detail = model.forward_detail(sample, mode="eval")
        rows.append((idx, sample.label, detail["embedding"].data.ravel()))
    d_final = len(rows[0][2])

    out = ["sample_index,label," + ",".join(f"e{i}" for i in range(d_final))]
    for idx, label, emb in rows:
        out.append(f"{idx},{label}," + ",".join(repr(float(v)) for v in emb))
    _atomic_write_text(path, "\n".join(out) + "\n")

    matrix = np.stack([emb for _, _, emb in rows])
    proj = principal_components_2d(matrix)
    stem, ext = os.path.splitext(str(path))
    out2 = ["sample_index,label,pc1,pc2"]
    for (idx, label, _), (p1, p2) in zip(rows, proj):
        out2.append(f"{idx},{label},{repr(float(p1))},{repr(float(p2))}")
    _atomic_write_text(f"{stem}_pca2{ext or '.csv'}", "\n".join(out2) + "\n")


def export_assignments(model: GraphPoolModel, sample, out_dir) -> list[str]:
    """Per pooling layer: a CSV of node index -> argmax cluster, plus a JSON
    sidecar listing clusters never chosen by any node.

    Returns the written file paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    _, detail = model.forward_detail(sample, mode="eval")
    written = []
    unused: dict[str, list[int]] = {}
    for j, s in enumerate(detail["assignments"]):
        # S maps clusters to nodes: (n_pool, n_in); nodes pick the cluster
        # whose row weights them most.
        weights = s.data
        n_pool, n_in = weights.shape
        chosen = np.argmax(weights, axis=0)
        lines = ["node_index,cluster_index"]
        lines += [f"{node},{int(c)}" for node, c in enumerate(chosen)]
        path = os.path.join(out_dir, f"assignments_layer{j}.csv")
        _atomic_write_text(path, "\n".join(lines) + "\n")
        written.append(path)
        used = set(int(c) for c in chosen)
        unused[f"layer{j}"] = sorted(set(range(n_pool)) - used)
    sidecar = os.path.join(out_dir, "unused_clusters.json")
    _atomic_write_text(sidecar, json.dumps(unused, indent=2, sort_keys=True) + "\n")
    written.append(sidecar)
    return written


def export_adjacency(model: GraphPoolModel, sample, path) -> None:
    """Dump the learned adjacency for one sample as a plain CSV matrix."""
    _, detail = model.forward_detail(sample, mode="eval")
    a = detail["adjacency"].data
    lines = [",".join(repr(float(v)) for v in row) for row in a]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv_rows(path) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))
