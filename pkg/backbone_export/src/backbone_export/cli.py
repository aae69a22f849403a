"""Command line: export one or more backbones in a single batch."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ARCHITECTURES, ExportSpec, export_backbone


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-backbones",
        description="Export pretrained Keras backbones as ONNX feature "
                    "extractors with preprocessing sidecars.")
    parser.add_argument("--names", default="all",
                        help="comma-separated architecture names, or 'all' "
                             f"({', '.join(sorted(ARCHITECTURES))})")
    parser.add_argument("--out", required=True, type=Path, help="output directory")
    parser.add_argument("--weights", default="imagenet",
                        choices=["imagenet", "random"],
                        help="pretrained ImageNet weights, or seeded random "
                             "weights for offline testing")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --weights random")
    parser.add_argument("--input-size", type=int, default=224)
    args = parser.parse_args(argv)

    if args.names == "all":
        names = sorted(ARCHITECTURES)
    else:
        names = [n.strip() for n in args.names.split(",") if n.strip()]
    unknown = [n for n in names if n not in ARCHITECTURES]
    if unknown:
        parser.error(f"unknown architectures: {', '.join(unknown)}")

    for name in names:
        spec = ExportSpec(name=name, out_dir=args.out, weights=args.weights,
                          seed=args.seed, input_size=args.input_size)
        try:
            graph, sidecar = export_backbone(spec)
        except Exception as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            return 1
        print(f"{name}: wrote {graph} and {sidecar}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
