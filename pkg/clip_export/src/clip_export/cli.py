"""Command-line entry point.

    clip-export images --manifest images.csv --model toy-512 --out images.emb
    clip-export texts  --manifest texts.csv  --model toy-512 --out texts.emb

Exit code 0 on success, 2 on any manifest, input, or encoder error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import export_images, export_texts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-export",
        description=(
            "Encode images or texts with a CLIP-family encoder (toy-<d> for "
            "the offline deterministic backend) and write an EMB1 embedding "
            "file plus its JSON sidecar."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("images", "encode the images listed in a (id,path,label,mask) manifest"),
        ("texts", "encode the texts listed in a (id,text) manifest"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True, help="manifest CSV")
        p.add_argument("--model", required=True, help="encoder tag")
        p.add_argument("--out", required=True, help="output .emb path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = export_images if args.command == "images" else export_texts
    try:
        n, d = run(args.manifest, args.model, args.out)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {n} rows (d={d}) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
