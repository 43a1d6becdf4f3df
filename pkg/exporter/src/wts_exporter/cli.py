"""Command line: ``export`` an image folder, ``verify`` an embedding file."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .export import DEFAULT_TEMPLATE, ExportJob, export, verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wts-export",
        description="Encode an image folder and class prompts into the "
                    "WTSEMB1 embedding format.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="encode a class-per-subdirectory folder")
    p_export.add_argument("--images", required=True, help="root with one subdir per class")
    p_export.add_argument("--model", required=True,
                          help="'toy' or a Hugging Face CLIP checkpoint id")
    p_export.add_argument("--template", default=DEFAULT_TEMPLATE,
                          help="prompt template with one {} placeholder")
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--device", default="cpu")
    p_export.add_argument("--true-labels", default=None,
                          help="sidecar file of 'relative/path label' lines")
    p_export.set_defaults(func=cmd_export)

    p_verify = sub.add_parser("verify", help="validate a WTSEMB1 file and print stats")
    p_verify.add_argument("path")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def cmd_export(args) -> int:
    job = ExportJob(
        image_root=Path(args.images),
        model_id=args.model,
        template=args.template,
        out_path=Path(args.out),
        device=args.device,
        true_label_file=Path(args.true_labels) if args.true_labels else None,
    )
    report = export(job)
    print(f"wrote {args.out}: N={report.n_samples} C={report.n_classes} D={report.dim}")
    if report.skipped:
        print(f"skipped {len(report.skipped)} undecodable image(s)", file=sys.stderr)
    if report.zero_shot_accuracy is not None:
        print(f"zero-shot accuracy: {report.zero_shot_accuracy:.4f}")
    return 0


def cmd_verify(args) -> int:
    code, lines = verify(args.path)
    stream = sys.stdout if code == 0 else sys.stderr
    for line in lines:
        print(line, file=stream)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
