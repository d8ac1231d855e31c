"""Twelve-task adaptation table over office/caltech feature exports.

Features are not redistributable here, so the user supplies one file per
domain under --data-dir: amazon, caltech, dslr, webcam, each either
<name>.rawf64 (labels embedded) or <name>.csv (labels in the last
column). Points are rows for csv; rawf64 stores columns.

For every ordered domain pair the source is a per-class uniform draw
(10 per class, 8 when dslr is the source), the target is split evenly
into a tuning half and a held-out half, and each method reports held-out
1-NN accuracy after barycentric projection. Writes office_table.csv with
one row per task plus an Average row.

    python3 scripts/run_office.py --data-dir data/office --out out/office
"""

import argparse
import csv
import itertools
import os
import statistics
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from otml import adapt, gml
from otml import data as dt
from otml import sinkhorn as sk

DOMAINS = ("amazon", "caltech", "dslr", "webcam")


def load_domain(root, name):
    for ext, labeled in ((".rawf64", False), (".csv", True)):
        path = os.path.join(root, name + ext)
        if os.path.exists(path):
            ds = dt.load_matrix(path, labeled=labeled)
            if ds.labels is None:
                raise SystemExit(f"{path}: no labels found")
            return ds
    raise SystemExit(
        f"no feature export for domain {name!r} under {root} "
        f"(expected {name}.rawf64 or {name}.csv)"
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default="data/office")
    ap.add_argument("--out", default="out/office")
    ap.add_argument("--methods", nargs="+", default=["euclidean", "learned"])
    ap.add_argument("--lambdas", type=float, nargs="+",
                    default=[0.05, 0.2, 0.5, 1.0, 2.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outer-iters", type=int, default=8)
    args = ap.parse_args()

    domains = {name: load_domain(args.data_dir, name) for name in DOMAINS}
    cfg = gml.GmlConfig(
        sinkhorn=sk.SinkhornConfig(lam=1.0, tol=1e-7, max_iter=2000),
        outer_iters=args.outer_iters,
        d_choice="identity",
        objective_rtol=1e-5,
    )

    header = ["task"] + list(args.methods)
    rows = []
    sums = {meth: [] for meth in args.methods}
    for src_name, tgt_name in itertools.permutations(DOMAINS, 2):
        per_class = 8 if src_name == "dslr" else 10
        src_ds = domains[src_name]
        task_seed = args.seed + DOMAINS.index(src_name) * 16 + DOMAINS.index(tgt_name)
        source = dt.uniform_sample(
            src_ds, per_class * src_ds.class_count, seed=task_seed
        )
        ttrain, ttest = dt.split_even(domains[tgt_name], seed=task_seed)
        row = [f"{src_name[0].upper()}->{tgt_name[0].upper()}"]
        for meth in args.methods:
            rep = adapt.run_task(source, ttrain, ttest, meth, args.lambdas, cfg)
            pct = 100.0 * rep.test_accuracy
            sums[meth].append(pct)
            row.append(f"{pct:.2f}")
            print(f"{row[0]} {meth}: {pct:.2f} (lambda {rep.lambda_chosen})")
        rows.append(row)
    rows.append(
        ["Average"] + [f"{statistics.fmean(sums[meth]):.2f}" for meth in args.methods]
    )

    os.makedirs(args.out, exist_ok=True)
    table_path = os.path.join(args.out, "office_table.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {table_path}")
    for row in rows:
        print(" ".join(f"{cell:>8}" for cell in row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
