import argparse
import sys

from .convert import DATASET_NAMES, ConversionError, UpstreamBundle, convert


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="planetoid-convert",
        description="Convert an upstream Planetoid citation bundle into a "
                    "plain-text dataset directory.")
    ap.add_argument("--input", required=True,
                    help="directory holding the ind.NAME.* files")
    ap.add_argument("--name", required=True, choices=DATASET_NAMES)
    ap.add_argument("--out", required=True, help="output dataset directory")
    args = ap.parse_args(argv)
    try:
        bundle = UpstreamBundle.of(args.input, args.name)
        convert(bundle, args.out)
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"converted {args.name} into {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
