"""CLI: embed-export --news <tsv> --model <name> --max-tokens 30 --out <path>"""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-export", description=__doc__)
    parser.add_argument("--news", required=True, help="news TSV file (id, category, subcategory, title, ...)")
    parser.add_argument("--model", required=True, help="pretrained model name or local path")
    parser.add_argument("--max-tokens", type=int, default=30)
    parser.add_argument("--out", required=True, help="output NEMB path")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--include-abstract", action="store_true",
                        help="append the abstract column to the encoded text")
    args = parser.parse_args(argv)
    try:
        manifest = export(args.news, args.model, args.max_tokens, args.out,
                          batch_size=args.batch_size, include_abstract=args.include_abstract)
    except (ExportError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest.news_count} entries (dim {manifest.dim}) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
