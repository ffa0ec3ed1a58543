#!/usr/bin/env python3
"""Convert the raw Planetoid files (ind.<name>.x, .tx, .allx, .y, .ty, .ally,
.graph, .test.index) into a selfgnn dataset bundle with the public split:
the first |y| nodes train, the next 500 validate, the listed test indices test.
"""

import argparse
import pathlib
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load(raw: pathlib.Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("raw", type=pathlib.Path, help="directory holding ind.<name>.* files")
    ap.add_argument("out", type=pathlib.Path, help="bundle directory to write")
    ap.add_argument("--name", default="cora")
    ap.add_argument("--row-normalize", action="store_true", help="scale each feature row to sum 1")
    args = ap.parse_args()

    x, y, tx, ty, allx, ally, graph = (load(args.raw, args.name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = [int(l) for l in (args.raw / f"ind.{args.name}.test.index").read_text().split()]
    test_sorted = sorted(test_idx)

    # Citeseer lists test ids past the end of allx; pad them as featureless nodes.
    span = test_sorted[-1] - test_sorted[0] + 1
    if span != len(test_sorted):
        tx_full = sp.lil_matrix((span, tx.shape[1]))
        tx_full[np.array(test_sorted) - test_sorted[0], :] = tx
        tx = tx_full
        ty_full = np.zeros((span, ty.shape[1]))
        ty_full[np.array(test_sorted) - test_sorted[0], :] = ty
        ty = ty_full

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels_1h = np.vstack((ally, ty))
    labels_1h[test_idx, :] = labels_1h[test_sorted, :]
    n = features.shape[0]

    labels = np.where(labels_1h.sum(axis=1) > 0, labels_1h.argmax(axis=1), -1)
    split = np.array(["none"] * n, dtype=object)
    split[: y.shape[0]] = "train"
    split[y.shape[0] : y.shape[0] + 500] = "val"
    split[test_idx] = "test"

    dense = np.asarray(features.todense(), dtype=np.float64)
    if args.row_normalize:
        s = dense.sum(axis=1, keepdims=True)
        s[s == 0] = 1.0
        dense = dense / s

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.tsv").write_text("".join(f"{u}\t{v}\n" for u, v in sorted(edges)))
    with open(out / "features.tsv", "w") as f:
        for row in dense:
            f.write("\t".join(repr(float(v)) if v != int(v) else str(int(v)) for v in row) + "\n")
    (out / "labels.tsv").write_text("".join(f"{int(v)}\n" for v in labels))
    (out / "split.tsv").write_text("".join(f"{s}\n" for s in split))
    (out / "meta.tsv").write_text(f"num_nodes\t{n}\nnum_features\t{dense.shape[1]}\nnum_classes\t{labels_1h.shape[1]}\n")
    print(f"{args.name}: {n} nodes, {len(edges)} edges, {dense.shape[1]} features, {labels_1h.shape[1]} classes",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
