#!/usr/bin/env python3
"""Convert raw Planetoid files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the directory layout read by magcl: edges.tsv, features.csv, labels.txt,
splits.json.

    python3 tools/export_planetoid.py --name cora --raw raw/ --out data/cora
    python3 tools/export_planetoid.py --name citeseer --download --out data/citeseer
"""

import argparse
import json
import os
import pickle
import sys
import urllib.request

import numpy as np
import scipy.sparse as sp

RAW_URL = "https://github.com/kimiyoung/planetoid/raw/master/data"
PARTS = ["x", "y", "tx", "ty", "allx", "ally", "graph"]


def fetch(name, raw):
    os.makedirs(raw, exist_ok=True)
    for part in PARTS + ["test.index"]:
        fn = f"ind.{name}.{part}"
        dst = os.path.join(raw, fn)
        if not os.path.exists(dst):
            urllib.request.urlretrieve(f"{RAW_URL}/{fn}", dst)


def load(name, raw):
    obj = {}
    for part in PARTS:
        with open(os.path.join(raw, f"ind.{name}.{part}"), "rb") as f:
            obj[part] = pickle.load(f, encoding="latin1")
    with open(os.path.join(raw, f"ind.{name}.test.index")) as f:
        test_idx = [int(line) for line in f if line.strip()]

    x, y, tx, ty, allx, ally, graph = (obj[p] for p in PARTS)
    test_sorted = np.sort(test_idx)
    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad with zero rows.
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), x.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), y.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    labels = np.where(onehot.sum(1) > 0, onehot.argmax(1), -1)

    n = features.shape[0]
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    splits = {
        "train": list(range(len(y))),
        "val": list(range(len(y), len(y) + 500)),
        "test": [int(i) for i in test_sorted[:1000]],
    }
    return features.tocsr(), labels, sorted(edges), splits


def write(out, features, labels, edges, splits):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "edges.tsv"), "w") as f:
        f.write("# src\tdst (undirected, listed once)\n")
        for u, v in edges:
            f.write(f"{u}\t{v}\n")
    dense = features.toarray()
    with open(os.path.join(out, "features.csv"), "w") as f:
        for row in dense:
            f.write(",".join(repr(float(v)) if v != int(v) else str(int(v)) for v in row) + "\n")
    with open(os.path.join(out, "labels.txt"), "w") as f:
        for l in labels:
            f.write(f"{int(l)}\n")
    with open(os.path.join(out, "splits.json"), "w") as f:
        json.dump(splits, f)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--raw", default=None, help="directory with ind.<name>.* files")
    ap.add_argument("--download", action="store_true", help="fetch raw files into --raw first")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    raw = args.raw or os.path.join(args.out, "raw")
    if args.download:
        fetch(args.name, raw)
    features, labels, edges, splits = load(args.name, raw)
    write(args.out, features, labels, edges, splits)
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} undirected edges, "
          f"{features.shape[1]} features, {labels.max() + 1} classes", file=sys.stderr)


if __name__ == "__main__":
    main()
