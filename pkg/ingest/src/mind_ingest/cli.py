"""mind-ingest command line.

  mind-ingest behaviors --in behaviors.tsv --out logs.jsonl
  mind-ingest news --in news.tsv --vectors vectors.txt --dim 9 --out embeddings.jsonl
  mind-ingest topics --in news.tsv --out catalog.jsonl

Each command prints one JSON report line; exit code 0 on success, 1 with a
JSON error line on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys

from mind_ingest.ingest import (
    build_embeddings,
    build_topic_catalog,
    parse_behaviors,
    parse_news,
    read_word_vectors,
)


def _write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_behaviors(args) -> int:
    records, skipped = parse_behaviors(args.in_path)
    _write_jsonl(records, args.out)
    print(json.dumps({"out": args.out, "records": len(records), "skipped_rows": skipped}))
    return 0


def cmd_news(args) -> int:
    rows, skipped = parse_news(args.in_path)
    vectors = read_word_vectors(args.vectors)
    table, all_unknown = build_embeddings(rows, vectors, args.dim)
    _write_jsonl(({"id": item, "vec": table[item]} for item in sorted(table)), args.out)
    print(json.dumps({
        "out": args.out, "records": len(table), "skipped_rows": skipped,
        "all_unknown_titles": all_unknown, "dim": args.dim,
    }))
    return 0


def cmd_topics(args) -> int:
    rows, skipped = parse_news(args.in_path)
    catalog, histogram = build_topic_catalog(rows)
    _write_jsonl(({"topic": t, "items": catalog[t]} for t in catalog), args.out)
    print(json.dumps({
        "out": args.out, "topics": len(catalog), "skipped_rows": skipped,
        "size_histogram": {str(k): v for k, v in sorted(histogram.items())},
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mind-ingest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("behaviors", help="expand behavior rows into logged interactions")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_behaviors)

    p = sub.add_parser("news", help="build the item embedding table from titles")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--vectors", required=True, help="text word-vector file")
    p.add_argument("--dim", type=int, default=9, help="consumer embedding dim incl. bias slot")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_news)

    p = sub.add_parser("topics", help="group items into the topic catalog by category")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_topics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
