#!/usr/bin/env python3
"""Download benchmark graphs and convert them to the dgnn dataset layout.

Each dataset ends up in DATA/NAME with graph.edges, features.csv and
labels.csv. Run `dgnn validate --dataset DATA/NAME --profile NAME`
afterwards to compare against the published statistics.

    python3 scripts/fetch_datasets.py cora chameleon --data data

Amazon datasets need numpy.
"""

import argparse
import io
import sys
import tarfile
import urllib.request
from pathlib import Path

LINQS = "https://linqs-data.soe.ucsc.edu/public/lbc/{name}.tgz"
GEOM_GCN = "https://raw.githubusercontent.com/graphdml-uiuc-jlu/geom-gcn/master/new_data/{name}/{file}"
AMAZON = "https://github.com/shchur/gnn-benchmark/raw/master/data/npz/amazon_electronics_{name}.npz"


def fetch(url):
    print(f"fetching {url}", file=sys.stderr)
    with urllib.request.urlopen(url) as r:
        return r.read()


def write(out, edges, features, labels):
    out.mkdir(parents=True, exist_ok=True)
    classes = sorted(set(labels))
    remap = {c: i for i, c in enumerate(classes)}
    with open(out / "graph.edges", "w") as f:
        for u, v in edges:
            f.write(f"{u} {v}\n")
    with open(out / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(format(x, "g") for x in row) + "\n")
    with open(out / "labels.csv", "w") as f:
        for label in labels:
            f.write(f"{remap[label]}\n")
    print(f"{out}: {len(labels)} nodes, {len(edges)} edges, {len(classes)} classes", file=sys.stderr)


def planetoid(name, out):
    tar = tarfile.open(fileobj=io.BytesIO(fetch(LINQS.format(name=name))))
    member = lambda suffix: next(m for m in tar.getmembers() if m.name.endswith(suffix))
    ids, features, labels = {}, [], []
    for line in tar.extractfile(member(f"{name}.content")).read().decode().splitlines():
        parts = line.split("\t")
        ids[parts[0]] = len(ids)
        features.append([float(x) for x in parts[1:-1]])
        labels.append(parts[-1])
    edges, dropped = [], 0
    for line in tar.extractfile(member(f"{name}.cites")).read().decode().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        cited, citing = parts
        if cited not in ids or citing not in ids:
            # Citeseer cites a handful of papers that have no content row.
            dropped += 1
            continue
        edges.append((ids[citing], ids[cited]))
    if dropped:
        print(f"{name}: dropped {dropped} citations to unknown papers", file=sys.stderr)
    write(out, edges, features, labels)


def geom_gcn(name, out):
    nodes = fetch(GEOM_GCN.format(name=name, file="out1_node_feature_label.txt")).decode().splitlines()
    rows = {}
    for line in nodes[1:]:
        node, feats, label = line.split("\t")
        rows[int(node)] = ([float(x) for x in feats.split(",")], int(label))
    order = sorted(rows)
    index = {n: i for i, n in enumerate(order)}
    edges = []
    for line in fetch(GEOM_GCN.format(name=name, file="out1_graph_edges.txt")).decode().splitlines()[1:]:
        u, v = line.split("\t")
        edges.append((index[int(u)], index[int(v)]))
    write(out, edges, [rows[n][0] for n in order], [rows[n][1] for n in order])


def amazon(name, out):
    import numpy as np

    z = np.load(io.BytesIO(fetch(AMAZON.format(name=name))), allow_pickle=True)

    def dense(prefix):
        n, d = z[f"{prefix}_shape"]
        m = np.zeros((n, d))
        indptr, indices, data = z[f"{prefix}_indptr"], z[f"{prefix}_indices"], z[f"{prefix}_data"]
        for i in range(n):
            m[i, indices[indptr[i]:indptr[i + 1]]] = data[indptr[i]:indptr[i + 1]]
        return m

    indptr, indices = z["adj_indptr"], z["adj_indices"]
    pairs = set()
    for i in range(len(indptr) - 1):
        for j in indices[indptr[i]:indptr[i + 1]]:
            if i != j:
                pairs.add((min(i, int(j)), max(i, int(j))))
    write(out, sorted(pairs), dense("attr").tolist(), z["labels"].tolist())


SOURCES = {
    "cora": planetoid,
    "citeseer": planetoid,
    "chameleon": geom_gcn,
    "squirrel": geom_gcn,
    "computers": amazon,
    "photo": amazon,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("names", nargs="*", default=list(SOURCES), choices=list(SOURCES))
    parser.add_argument("--data", type=Path, default=Path("data"))
    args = parser.parse_args()
    for name in args.names:
        SOURCES[name](name, args.data / name)


if __name__ == "__main__":
    main()
