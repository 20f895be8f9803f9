"""Command-line entry point: ``run``, ``eval`` and ``inspect``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .embeddings import IngestionError
from .pipeline import (
    ConfigError,
    PipelineConfig,
    evaluate,
    load_resources,
    read_query_ids,
    read_reports,
    run_queries,
    write_reports,
)
from .retrieval import load_caption_db

EXIT_OK = 0
EXIT_STARTUP = 1
EXIT_PARTIAL = 2


def _cmd_run(args) -> int:
    try:
        config = PipelineConfig.from_json(args.config)
        if args.workers is not None:
            config.workers = args.workers
        resources = load_resources(config)
        queries = args.queries or config.queries_path
        if not queries:
            raise ConfigError("no query list: pass --queries or set queries_path")
        query_ids = read_query_ids(queries)
    except (ConfigError, IngestionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARTUP
    reports = run_queries(resources, config, query_ids)
    write_reports(reports, args.out)
    failed = sum(r.status != "ok" for r in reports)
    if failed:
        print(f"{failed} of {len(reports)} queries failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_eval(args) -> int:
    try:
        reports = read_reports(args.reports)
        with open(args.captions, encoding="utf-8") as fh:
            references = load_caption_db(fh)
        result = evaluate(reports, references)
    except (IngestionError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_STARTUP
    out = result.to_dict()
    if not args.per_image:
        out.pop("per_image")
    print(json.dumps(out, indent=2))
    return EXIT_OK


def format_report(rep: dict) -> str:
    lines = [f"query {rep['query_id']}  status={rep['status']}"]
    if rep["status"] != "ok":
        lines.append(f"  error: {rep['error']}")
        return "\n".join(lines)
    nb = rep["neighbors"]
    lines.append(
        f"  branch={rep['branch']}  neighbours={nb['count']}  radius={nb['radius']:.6g}"
        f"  closest={nb['closest_distance']:.6g}"
    )
    slots = rep["query_slots"]
    lines.append(
        f"  query objects={slots['objects']} attributes={slots['attributes']} actions={slots['actions']}"
    )
    if rep.get("weights"):
        w = rep["weights"]["weights"]
        lines.append("  weights " + "  ".join(
            f"{name}={val:.4f}" for name, val in zip(rep["decision_matrix"]["columns"], w)
        ))
    closeness = rep["topsis"]["closeness"] if rep.get("topsis") else None
    raw = rep["decision_matrix"]["raw"] if rep.get("decision_matrix") else None
    lines.append("  row  closeness  obj      attr     act      cosine   caption")
    for i, cand in enumerate(rep["candidates"]):
        cl = f"{closeness[i]:.4f}" if closeness else "   -  "
        cells = "  ".join(f"{v:7.4f}" for v in raw[i]) if raw else "   -       -       -   "
        mark = "*" if rep["chosen"]["row"] == i else " "
        lines.append(f" {mark}{i:3d}  {cl:>9}  {cells}  {cand['cosine']:7.4f}  {cand['text']}")
    for tb in rep.get("tie_breaks", []):
        lines.append(f"  tie-break [{tb['stage']}] order={tb['order']} ({tb['rule']})")
    lines.append(f"  chosen: {rep['chosen']['text']}  ({rep['chosen']['caption_id']})")
    return "\n".join(lines)


def _cmd_inspect(args) -> int:
    try:
        reports = read_reports(args.report)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARTUP
    for rep in reports:
        if rep["query_id"] == args.image_id:
            print(format_report(rep))
            return EXIT_OK
    print(f"error: no report for image {args.image_id!r}", file=sys.stderr)
    return EXIT_STARTUP


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="captionmcdm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="select a caption for every query image")
    run.add_argument("--config", required=True)
    run.add_argument("--queries", help="file with one query image id per line")
    run.add_argument("--out", required=True, help="output JSON Lines report file")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="corpus BLEU-1..4 and ROUGE-L of a report file")
    ev.add_argument("--reports", required=True)
    ev.add_argument("--captions", required=True)
    ev.add_argument("--per-image", action="store_true")
    ev.set_defaults(func=_cmd_eval)

    insp = sub.add_parser("inspect", help="pretty-print one decision")
    insp.add_argument("--report", required=True)
    insp.add_argument("--image-id", required=True)
    insp.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
