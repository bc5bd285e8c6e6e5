"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or invariant error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import data, experiments, haar, shrinkage
from .graph import DataError, format_features, load_features, load_graph, save_features, save_graph
from .model import format_model, load_model
from .training import TrainConfig, train_toy, trace_to_csv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _bits(text):
    if text.lower() in ("none", "0", "off"):
        return None
    b = int(text)
    if not 1 <= b <= 32:
        raise argparse.ArgumentTypeError("bits must be in [1, 32] or 'none'")
    return b


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _graph_and_features(args):
    g = load_graph(args.graph)
    f = load_features(args.features)
    if f.shape[0] != g.n:
        raise DataError(f"feature file has {f.shape[0]} rows, graph has {g.n} nodes")
    return g, f


def cmd_transform(args):
    g, f = _graph_and_features(args)
    h = haar.build_hierarchy(g, f, args.levels, args.seed)
    p = haar.forward(h, f)
    _emit(format_features(p), args.out)
    if args.out not in (None, "-"):
        _write(args.out + ".layout", haar.format_layout(h))
        _write(args.out + ".hier", haar.format_hierarchy(h))


def cmd_compress(args):
    g, f = _graph_and_features(args)
    h = haar.build_hierarchy(g, f, args.levels, args.seed)
    p = haar.forward(h, f)
    plan = shrinkage.select_topk(p, args.alpha, args.norm)
    cs = shrinkage.gather(p, plan)
    save_features(cs.dense, args.out)
    _write(args.index or args.out + ".idx", "".join(f"{i}\n" for i in plan.kept.tolist()))
    _write(args.hierarchy or args.out + ".hier", haar.format_hierarchy(h))


def cmd_reconstruct(args):
    h = haar.load_hierarchy(args.hierarchy)
    dense = load_features(args.dense)
    with open(args.index) as fh:
        try:
            kept = np.array([int(x) for x in fh.read().split()], dtype=np.int64)
        except ValueError:
            raise DataError("index file must hold one integer per line") from None
    if len(kept) != dense.shape[0]:
        raise DataError(f"{len(kept)} indices for {dense.shape[0]} dense rows")
    if len(kept) and (np.any(np.diff(kept) <= 0) or kept[0] < 0 or kept[-1] >= h.n):
        raise DataError("indices must be strictly increasing and inside [0, n)")
    plan = shrinkage.ShrinkagePlan(len(kept) / h.n if h.n else 1.0, h.n, kept)
    f = haar.inverse(h, shrinkage.scatter(shrinkage.CompressedSignal(dense, plan)))
    _emit(format_features(f), args.out)


def cmd_mse_sweep(args):
    if args.graph:
        g = load_graph(args.graph)
        f = load_features(args.features) if args.features else data.smooth_features(
            g, args.channels, args.steps, args.seed)
        if f.shape[0] != g.n:
            raise DataError("feature rows do not match graph nodes")
    else:
        g = data.point_cloud_graph(args.n, args.k, args.seed)
        f = data.smooth_features(g, args.channels, args.steps, args.seed)
    rows = experiments.mse_sweep(g, f, args.levels, args.seed, range(args.q_min, args.q_max + 1))
    _emit(experiments.sweep_to_csv(rows), args.out)


def cmd_train(args):
    g, f = _graph_and_features(args)
    labels = data.load_labels(args.labels)
    if len(labels) != g.n:
        raise DataError(f"label file has {len(labels)} entries, graph has {g.n} nodes")
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, weight_decay=args.weight_decay, seed=args.seed,
                      bits_w=args.bits_w, bits_a=args.bits_a, alpha=args.alpha, levels=args.levels,
                      hidden=args.hidden, depth=args.depth, spatial=args.spatial,
                      freeze_hierarchy=args.freeze_hierarchy)
    model, trace = train_toy(g, f, labels, cfg)
    _write(args.out, format_model(model))
    _emit(trace_to_csv(trace), args.trace)


def cmd_infer(args):
    g, f = _graph_and_features(args)
    model = load_model(args.model)
    if model.layers and model.layers[0].dims[1] != f.shape[1]:
        raise DataError("feature channels do not match the model input")
    out = model.forward(g, f, args.seed)
    _emit(format_features(out), args.out)


def cmd_report_compression(args):
    model = load_model(args.model) if args.model else None
    n = load_graph(args.graph).n if args.graph else args.n
    rows = experiments.report_compression(model, args.alpha, args.bits_a, n)
    _emit(experiments.report_to_csv(rows), args.out)


def cmd_gen_planted(args):
    g, f, labels = data.gen_planted(args.n, args.communities, args.p_in, args.p_out, args.seed,
                                    args.channels, args.noise, args.separation)
    save_graph(g, args.prefix + ".graph.txt")
    save_features(f, args.prefix + ".features.txt")
    data.save_labels(labels, args.prefix + ".labels.txt")


def build_parser():
    p = _Parser(prog="wavegcn", description="Compressed graph Haar wavelet convolutions")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, features=True, out_required=False):
        sp.add_argument("--graph", required=True)
        if features:
            sp.add_argument("--features", required=True)
        sp.add_argument("--levels", type=int, default=haar.DEFAULT_LEVELS)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required, default=None)

    sp = sub.add_parser("transform", help="multi-level Haar coefficients")
    common(sp)
    sp.add_argument("--freeze-hierarchy", action="store_true",
                    help="accepted for symmetry with train; a single transform is always frozen")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("compress", help="transform plus joint top-k shrinkage")
    common(sp, out_required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--norm", choices=("l2", "l1"), default="l2")
    sp.add_argument("--index", help="kept-row index file (default OUT.idx)")
    sp.add_argument("--hierarchy", help="hierarchy file (default OUT.hier)")
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("reconstruct", help="scatter and inverse-transform a compressed block")
    sp.add_argument("--dense", required=True)
    sp.add_argument("--index", required=True)
    sp.add_argument("--hierarchy", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("mse-sweep", help="MSE vs compression ratio for each scheme")
    sp.add_argument("--graph")
    sp.add_argument("--features")
    sp.add_argument("--levels", type=int, default=haar.DEFAULT_LEVELS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=1024, help="points in the generated cloud")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--channels", type=int, default=16)
    sp.add_argument("--steps", type=int, default=10, help="diffusion steps for generated features")
    sp.add_argument("--q-min", type=int, default=1)
    sp.add_argument("--q-max", type=int, default=7)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_mse_sweep)

    sp = sub.add_parser("train", help="train a small wavelet GCN/GCNII node classifier")
    common(sp, out_required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--bits-w", type=_bits, default=8)
    sp.add_argument("--bits-a", type=_bits, default=8)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--weight-decay", type=float, default=5e-4)
    sp.add_argument("--hidden", type=int, default=16)
    sp.add_argument("--depth", type=int, default=2)
    sp.add_argument("--spatial", choices=("gcn", "gcnii"), default="gcnii")
    sp.add_argument("--freeze-hierarchy", action="store_true")
    sp.add_argument("--trace", default=None, help="per-epoch CSV (default stdout)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="run a saved model")
    sp.add_argument("--model", required=True)
    common(sp)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("report-compression", help="activation bandwidth accounting")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--bits-a", type=int, default=8)
    sp.add_argument("--model")
    sp.add_argument("--graph")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_report_compression)

    sp = sub.add_parser("gen-planted", help="write a planted-partition dataset")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--communities", type=int, default=2)
    sp.add_argument("--p-in", type=float, default=0.1)
    sp.add_argument("--p-out", type=float, default=0.01)
    sp.add_argument("--channels", type=int, default=16)
    sp.add_argument("--noise", type=float, default=1.0)
    sp.add_argument("--separation", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--prefix", required=True)
    sp.set_defaults(func=cmd_gen_planted)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        args.func(args)
    except (DataError, OSError) as exc:
        print(f"wavegcn {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
