import argparse
import sys

from .convert import ConvertError, DATASET_NAMES, convert


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="planetoid-convert",
        description="Convert an upstream serialized citation dataset into "
                    "the portable text directory format.")
    parser.add_argument("--input", required=True,
                        help="directory holding the ind.<name>.* files")
    parser.add_argument("--name", required=True, choices=list(DATASET_NAMES))
    parser.add_argument("--output", required=True,
                        help="portable-format output directory")
    args = parser.parse_args(argv)
    try:
        manifest = convert(args.input, args.name, args.output)
    except (ConvertError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{manifest.dataset_name}: {manifest.num_nodes} nodes, "
          f"{manifest.num_features} features, {manifest.num_classes} classes, "
          f"{manifest.raw_link_count} raw links "
          f"({manifest.distinct_undirected_edge_count} distinct undirected), "
          f"splits {manifest.train_size}/{manifest.val_size}/{manifest.test_size}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
