"""Command-line pipeline: train, attribute, perturb, visualize, plot.

All randomness flows from explicit ``--seed`` flags; repeated runs with
the same flags write byte-identical outputs. ``GCN_NAM_THREADS`` caps
the worker count of the perturbation harness.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import attribution, niv, perturb, plot
from .data import load_dataset
from .graph import build_normalized_adjacency
from .model import TrainConfig, forward, load_model, predict, save_model, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcn-nam",
        description="Train a small GCN and explain its node classifications "
                    "by per-neighbor contribution scores.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a 2-layer GCN on a dataset")
    p_train.add_argument("dataset", help="portable-format dataset directory")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--log", help="training log output path (tsv)")
    p_train.add_argument("--hidden", type=int, default=16)
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--lr", type=float, default=0.01)
    p_train.add_argument("--weight-decay", type=float, default=5e-4)
    p_train.add_argument("--dropout", type=float, default=0.5)
    p_train.add_argument("--patience", type=int, default=10)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--no-normalize", action="store_true",
                         help="skip feature row normalization at load")

    p_attr = sub.add_parser("attribute",
                            help="per-node contributions for one node's logit")
    p_attr.add_argument("dataset")
    p_attr.add_argument("--model", required=True)
    p_attr.add_argument("--node", type=int, required=True)
    p_attr.add_argument("--class", dest="target_class", default="predicted",
                        help="'predicted' (default), 'ground-truth', or a class id")
    p_attr.add_argument("--hops", type=int, default=None,
                        help="neighborhood radius (default: model depth)")
    p_attr.add_argument("--out", required=True, help="attribution JSON path")
    p_attr.add_argument("--gradients", action="store_true",
                        help="include raw gradient rows in the JSON")
    p_attr.add_argument("--no-normalize", action="store_true")

    p_pert = sub.add_parser("perturb",
                            help="neighbor-deletion accuracy curves")
    p_pert.add_argument("dataset")
    p_pert.add_argument("--model", required=True)
    p_pert.add_argument("--out-dir", required=True)
    p_pert.add_argument("--p", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
                        help="comma-separated ascending deletion fractions")
    p_pert.add_argument("--strategy", choices=["nam", "random", "both"],
                        default="both")
    p_pert.add_argument("--order", choices=list(attribution.RANK_ORDERS),
                        default="signed_desc")
    p_pert.add_argument("--seeds", type=int, default=5,
                        help="number of random-deletion seeds")
    p_pert.add_argument("--seed", type=int, default=0, help="base seed")
    p_pert.add_argument("--hops", type=int, default=None)
    p_pert.add_argument("--split", choices=["test", "all"], default="test")
    p_pert.add_argument("--no-renormalize", action="store_true",
                        help="keep original adjacency weights and zero the "
                             "deleted nodes' features instead")
    p_pert.add_argument("--no-normalize", action="store_true")

    p_vis = sub.add_parser("visualize",
                           help="render an attribution result as DOT + JSON")
    p_vis.add_argument("attribution", help="attribution JSON from 'attribute'")
    p_vis.add_argument("dataset")
    p_vis.add_argument("--model", required=True,
                       help="checkpoint used for node colors (predicted classes)")
    p_vis.add_argument("--hops", type=int, default=1,
                       help="neighborhood radius to draw (default 1)")
    p_vis.add_argument("--out-dot", required=True)
    p_vis.add_argument("--out-json", required=True)
    p_vis.add_argument("--size-min", type=float, default=niv.DEFAULT_SIZE_MIN)
    p_vis.add_argument("--size-max", type=float, default=niv.DEFAULT_SIZE_MAX)
    p_vis.add_argument("--no-normalize", action="store_true")

    p_plot = sub.add_parser("plot", help="render curves.json as an SVG chart")
    p_plot.add_argument("curves", help="curves.json from 'perturb'")
    p_plot.add_argument("--out", required=True, help="SVG output path")
    return parser


def _load(args):
    return load_dataset(args.dataset, normalize=not args.no_normalize)


def _cmd_train(args) -> int:
    dataset = _load(args)
    config = TrainConfig(hidden_dim=args.hidden, epochs=args.epochs,
                         learning_rate=args.lr, weight_decay=args.weight_decay,
                         dropout_rate=args.dropout, seed=args.seed,
                         patience=args.patience)
    log_fh = open(args.log, "w", encoding="utf-8", newline="\n") if args.log else None
    try:
        model = train(dataset, config, log=log_fh)
    finally:
        if log_fh:
            log_fh.close()
    save_model(model, args.out)
    trace = forward(model, build_normalized_adjacency(dataset.graph),
                    dataset.features)
    preds = predict(trace)
    test = dataset.test_nodes
    acc = float(np.mean(preds[test] == dataset.labels[test])) if len(test) else 0.0
    print(f"test_acc={acc:.3f}")
    return 0


def _resolve_class(args, dataset, preds) -> int:
    if args.target_class == "predicted":
        return int(preds[args.node])
    if args.target_class == "ground-truth":
        return int(dataset.labels[args.node])
    try:
        return int(args.target_class)
    except ValueError:
        raise ValueError(
            f"--class must be 'predicted', 'ground-truth', or an integer, "
            f"got {args.target_class!r}") from None


def _cmd_attribute(args) -> int:
    dataset = _load(args)
    model = load_model(args.model)
    adj = build_normalized_adjacency(dataset.graph)
    trace = forward(model, adj, dataset.features)
    preds = predict(trace)
    if not 0 <= args.node < dataset.num_nodes:
        raise ValueError(f"node {args.node} out of range 0..{dataset.num_nodes - 1}")
    query = attribution.AttributionQuery(
        args.node, _resolve_class(args, dataset, preds), args.hops)
    result = attribution.attribute(model, adj, trace, query)
    Path(args.out).write_text(
        attribution.result_to_json(result, include_gradients=args.gradients),
        encoding="utf-8")
    top = attribution.rank_nodes(result, order="abs_desc", exclude_central=True)
    print(f"node {query.node} class {query.target_class} "
          f"({len(result.per_node)} nodes in {result.query.hops}-hop neighborhood)")
    for u in top[:5]:
        print(f"  node {u}\tcontribution {result.per_node[u]:+.6f}")
    return 0


def _cmd_perturb(args) -> int:
    dataset = _load(args)
    model = load_model(args.model)
    strategies = ("nam", "random") if args.strategy == "both" else (args.strategy,)
    try:
        p_values = tuple(float(tok) for tok in args.p.split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"bad --p list: {args.p!r}") from None
    config = perturb.PerturbationConfig(
        p_values=p_values, strategies=strategies, rank_order=args.order,
        num_random_seeds=args.seeds, hops=args.hops, split=args.split,
        seed=args.seed, renormalize=not args.no_renormalize)
    curves = perturb.run_perturbation(model, dataset, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    perturb.write_curves_tsv(curves, out_dir / "curves.tsv")
    perturb.write_curves_json(curves, out_dir / "curves.json")
    for curve in curves:
        tail = " ".join(f"{a:.3f}" for a in curve.accuracies)
        print(f"{curve.strategy}: {tail}")
    print(f"wrote {out_dir / 'curves.tsv'} and {out_dir / 'curves.json'}")
    return 0


def _cmd_visualize(args) -> int:
    dataset = _load(args)
    model = load_model(args.model)
    result = attribution.result_from_json(
        Path(args.attribution).read_text(encoding="utf-8"))
    trace = forward(model, build_normalized_adjacency(dataset.graph),
                    dataset.features)
    preds = predict(trace)
    doc = niv.build_niv(result, preds, dataset.graph, hops=args.hops,
                        size_min=args.size_min, size_max=args.size_max)
    Path(args.out_dot).write_text(niv.emit_dot(doc), encoding="utf-8")
    Path(args.out_json).write_text(niv.emit_json(doc), encoding="utf-8")
    print(f"wrote {args.out_dot} and {args.out_json}")
    return 0


def _cmd_plot(args) -> int:
    curves = perturb.read_curves_json(args.curves)
    svg = plot.render_curves_svg(curves)
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "attribute": _cmd_attribute,
    "perturb": _cmd_perturb,
    "visualize": _cmd_visualize,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
