#!/usr/bin/env python3
"""Convert a Planetoid-format citation dataset (ind.<name>.* pickles) into the
raw TSV layout read by `gnninject dataset prep --format tsv`.

Nodes missing from the test index (isolated entries in the Planetoid dump)
keep an empty feature row and label 0; they fall outside the largest
connected component and are removed by `dataset prep`.
"""
import argparse
import os
import pickle

import numpy as np
import scipy.sparse as sp


def load(prefix, name):
    with open(f"{prefix}.{name}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", required=True, help="directory holding ind.<name>.* files")
    ap.add_argument("--name", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    prefix = os.path.join(args.src, f"ind.{args.name}")
    allx, ally, tx, ty, graph = (load(prefix, n) for n in ["allx", "ally", "tx", "ty", "graph"])
    with open(f"{prefix}.test.index") as f:
        test_idx = [int(line) for line in f if line.strip()]

    num_nodes = max(len(graph), max(test_idx) + 1)
    num_features = allx.shape[1]
    num_labels = ally.shape[1]

    features = sp.lil_matrix((num_nodes, num_features))
    labels = np.zeros(num_nodes, dtype=np.int64)
    features[: allx.shape[0]] = allx
    labels[: ally.shape[0]] = ally.argmax(1)
    for row, node in enumerate(test_idx):
        features[node] = tx[row]
        labels[node] = ty[row].argmax()
    features = features.tocsr()

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v:
                edges.add((min(u, v), max(u, v)))

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "meta.tsv"), "w") as f:
        f.write(f"{num_nodes}\t{num_features}\t{num_labels}\n")
    with open(os.path.join(args.out, "edges.tsv"), "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    with open(os.path.join(args.out, "features.tsv"), "w") as f:
        for node in range(num_nodes):
            for feat in sorted(features[node].indices):
                f.write(f"{node}\t{feat}\n")
    with open(os.path.join(args.out, "labels.tsv"), "w") as f:
        for node in range(num_nodes):
            f.write(f"{node}\t{labels[node]}\n")


if __name__ == "__main__":
    main()
