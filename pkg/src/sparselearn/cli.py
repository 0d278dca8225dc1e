"""Command-line frontend.

Subcommands: ingest, gen, counts, cluster, tree, bench.  Exit codes: 0 on
success, 1 on usage errors, 2 on data or format errors.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import sys

# the package re-exports functions named like their home modules (bench,
# generate), so bind the modules via importlib instead of attribute lookup
bench_mod = importlib.import_module("sparselearn.bench")
cluster_mod = importlib.import_module("sparselearn.cluster")
counts_mod = importlib.import_module("sparselearn.counts")
data_mod = importlib.import_module("sparselearn.data")
tree_mod = importlib.import_module("sparselearn.tree")

from .errors import SparseLearnError
from .generate import GenSpec, generate


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sparselearn",
                     description="Sparse count extraction, EM clustering, and "
                                 "tree learning over categorical data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="sparsify a CSV of integer values")
    p.add_argument("--input", required=True, help="CSV file of value indices")
    p.add_argument("--header", action="store_true",
                   help="first row holds variable names")
    p.add_argument("--defaults", choices=["auto", "zero"], default="auto",
                   help="per-variable defaults: most frequent value or 0")
    p.add_argument("--out", required=True, help="output dataset path")

    p = sub.add_parser("gen", help="generate a synthetic sparse dataset")
    p.add_argument("--vars", type=int, required=True)
    p.add_argument("--records", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--card", type=int, default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("counts", help="print one-way and two-way counts as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--mode", choices=["dense", "sparse"], default="sparse")
    p.add_argument("--all-pairs", action="store_true",
                   help="also print counts for every variable pair")

    p = sub.add_parser("cluster", help="naive-Bayes EM clustering")
    p.add_argument("--data", required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=["dense", "sparse"], default="sparse")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--prior", type=float, default=1.0)
    p.add_argument("--model-out", help="write the fitted model here")
    p.add_argument("--assign-out", help="write per-record posteriors CSV here")
    p.add_argument("--trace-out", help="write the iteration trace CSV here "
                                       "(default: standard output)")

    p = sub.add_parser("tree", help="learn a decision tree for one variable")
    p.add_argument("--data", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--prior", type=float, default=1.0)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--mode", choices=["dense", "sparse"], default="sparse")
    p.add_argument("--tree-out", help="write the tree here instead of stdout")
    p.add_argument("--predict-out",
                   help="write per-record predicted distributions CSV here")

    p = sub.add_parser("bench", help="time dense vs sparse variants")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["counts", "estep", "tree"], required=True)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--out", help="also write the report CSV here")

    return parser


def _fmt(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.17g}"


def _print_oneway(writer, i: int, vec) -> None:
    writer.writerow(["oneway", i])
    writer.writerow(["value", "count"])
    for x, c in enumerate(vec):
        writer.writerow([x, _fmt(c)])


def _print_matrix(writer, header_label, row_values, M) -> None:
    writer.writerow([header_label] + list(range(M.shape[1])))
    for t in range(M.shape[0]):
        writer.writerow([row_values[t]] + [_fmt(c) for c in M[t]])


def _cmd_ingest(args) -> int:
    with open(args.input, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    names = None
    if args.header:
        if not rows:
            raise SparseLearnError("empty CSV")
        names = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    table = [[int(cell) for cell in row] for row in rows if row]
    defaults = None
    if args.defaults == "zero" and table:
        defaults = [0] * len(table[0])
    ds = data_mod.ingest_dense(table, defaults=defaults, names=names)
    data_mod.save(ds, args.out)
    print(f"wrote {args.out}: vars={ds.n_variables} records={ds.n_records} "
          f"stored_pairs={ds.nondefault_total}")
    return 0


def _cmd_gen(args) -> int:
    spec = GenSpec(args.vars, args.records, args.density,
                   cardinality=args.card, seed=args.seed)
    ds = generate(spec)
    data_mod.save(ds, args.out)
    print(f"wrote {args.out}: vars={ds.n_variables} records={ds.n_records} "
          f"stored_pairs={ds.nondefault_total}")
    return 0


def _cmd_counts(args) -> int:
    ds = data_mod.load(args.data)
    fn = counts_mod.sparse_counts if args.mode == "sparse" else counts_mod.dense_counts
    cs = fn(ds, args.target)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    for i, vec in enumerate(cs.one_way):
        _print_oneway(writer, i, vec)
    for i, M in enumerate(cs.two_way):
        if M is None:
            continue
        writer.writerow(["twoway", cs.target, i])
        _print_matrix(writer, "t\\x", list(range(M.shape[0])), M)
    if args.all_pairs:
        pc = counts_mod.all_pairs_counts(ds)
        for (i, j), M in sorted(pc.pairs.items()):
            writer.writerow(["pair", i, j])
            _print_matrix(writer, "xi\\xj", list(range(M.shape[0])), M)
    return 0


def _cmd_cluster(args) -> int:
    ds = data_mod.load(args.data)
    config = cluster_mod.EMConfig(
        cluster_count=args.clusters,
        max_iterations=args.max_iters,
        tolerance=args.tol,
        seed=args.seed,
        prior_strength=args.prior,
        estep_mode=args.mode,
    )
    times = []
    model, trace, _ = cluster_mod.run_em(ds, config, time_trace=times)

    def write_trace(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "log_likelihood", "elapsed_ms"])
        for it, (ll, dt) in enumerate(zip(trace, times)):
            writer.writerow([it, f"{ll:.17g}", f"{dt * 1000.0:.3f}"])

    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8", newline="") as fh:
            write_trace(fh)
    else:
        write_trace(sys.stdout)
    if args.model_out:
        cluster_mod.save_model(model, args.model_out)
    if args.assign_out:
        post = cluster_mod.assign_clusters(model, ds)
        with open(args.assign_out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["record"] + [f"c{c}" for c in range(args.clusters)])
            for j in range(post.shape[0]):
                writer.writerow([j] + [f"{v:.17g}" for v in post[j]])
    return 0


def _cmd_tree(args) -> int:
    ds = data_mod.load(args.data)
    config = tree_mod.TreeConfig(
        pseudo_count=args.prior,
        min_leaf_records=args.min_leaf,
        max_depth=args.max_depth,
    )
    tree = tree_mod.learn_tree(ds, args.target, config, count_mode=args.mode)
    text = tree_mod.dumps_tree(tree)
    if args.tree_out:
        with open(args.tree_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.predict_out:
        r_t = ds.schema[args.target].cardinality
        with open(args.predict_out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["record"] + [f"t{t}" for t in range(r_t)])
            for j, rec in enumerate(ds.records):
                dist = tree_mod.predict(tree, rec)
                writer.writerow([j] + [f"{v:.17g}" for v in dist])
    return 0


def _cmd_bench(args) -> int:
    ds = data_mod.load(args.data)
    report = bench_mod.bench(ds, args.mode, repetitions=args.repeat)
    text = report.to_csv()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "gen": _cmd_gen,
    "counts": _cmd_counts,
    "cluster": _cmd_cluster,
    "tree": _cmd_tree,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (SparseLearnError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
