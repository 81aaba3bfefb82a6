"""Command-line surface: extract / render / receive / score / bench-sizes.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from semcom.codec import decode_payload, encode_payload, size_report
from semcom.core import load_image, save_image
from semcom.gateway import endpoint_from_env, gateway_backends
from semcom.palette import render_colored_segmented
from semcom.pipeline import (
    DEFAULT_NEGATIVE_PROMPT,
    BackendSet,
    ReceiverConfig,
    TransmitterConfig,
    mock_backends,
    receive,
    transmit,
)
from semcom.scoring import ScoringConfig, smr, smr_foreground, text_similarity


class UsageError(Exception):
    """Bad invocation detected after argument parsing; exits with code 2."""


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _unit_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("mock", "gateway"), default="mock",
                        help="model backend (default: mock, no infrastructure needed)")
    parser.add_argument("--gateway-url", default=None,
                        help="gateway base URL (falls back to SEMCOM_GATEWAY_URL)")


def _backends(args: argparse.Namespace) -> BackendSet:
    if args.backend == "mock":
        return mock_backends()
    try:
        endpoint = endpoint_from_env(args.gateway_url)
    except ValueError as exc:
        raise UsageError(str(exc))
    return gateway_backends(endpoint)


def _read_image(path: str):
    try:
        return load_image(path)
    except OSError as exc:
        raise RuntimeError(f"cannot read image: {path}: {exc.strerror or exc}")


def _read_payload(path: str):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise RuntimeError(f"cannot read payload: {path}: {exc.strerror or exc}")
    return decode_payload(data)


def cmd_extract(args: argparse.Namespace) -> int:
    image = _read_image(args.image)
    config = TransmitterConfig(
        apply_background_recoloring=args.recolor_bg,
        background_label=args.background_label,
    )
    payload = transmit(image, _backends(args), config)
    encoded = encode_payload(payload)
    with open(args.output, "wb") as fh:
        fh.write(encoded)
    print(json.dumps(dataclasses.asdict(size_report(payload))))
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    payload = _read_payload(args.payload)
    image = render_colored_segmented(payload.segmentation, payload.palette)
    save_image(image, args.output)
    return 0


def cmd_receive(args: argparse.Namespace) -> int:
    payload = _read_payload(args.payload)
    scoring = ScoringConfig(
        smr_weight=args.smr_weight,
        remove_stop_words=not args.no_stop_word_removal,
        foreground_only_smr=args.foreground_smr,
    )
    config = ReceiverConfig(
        candidate_count=args.k,
        scoring=scoring,
        negative_prompt=args.negative_prompt,
        generation_seed=args.seed,
    )
    selected_image, scored = receive(payload, _backends(args), config, jobs=args.jobs)
    save_image(selected_image, args.output)
    if args.audit_json:
        with open(args.audit_json, "w", encoding="utf-8") as fh:
            for candidate in scored:
                fh.write(json.dumps({
                    "candidate_index": candidate.candidate_index,
                    "smr": candidate.smr,
                    "text_similarity": candidate.text_similarity,
                    "combined": candidate.combined,
                }) + "\n")
    best = max(range(len(scored)), key=lambda i: scored[i].combined)
    print(json.dumps({
        "selected_index": best,
        "smr": scored[best].smr,
        "text_similarity": scored[best].text_similarity,
        "combined": scored[best].combined,
        "candidates": len(scored),
    }))
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    payload = _read_payload(args.payload)
    candidate = _read_image(args.candidate)
    backends = _backends(args)
    caption = backends.captioner(candidate)
    segmentation = backends.segmenter(candidate)
    reference = payload.segmentation
    if (segmentation.width, segmentation.height) != (reference.width, reference.height):
        raise RuntimeError(
            f"dimension mismatch: candidate segments to "
            f"{segmentation.width}x{segmentation.height}, "
            f"payload is {reference.width}x{reference.height}"
        )
    scoring = ScoringConfig(remove_stop_words=not args.no_stop_word_removal)
    try:
        foreground = smr_foreground(reference, segmentation, payload.background_label)
    except ValueError:
        foreground = None  # all-background reference
    print(json.dumps({
        "smr": smr(reference, segmentation),
        "smr_foreground": foreground,
        "text_similarity": text_similarity(payload.caption, caption, scoring),
    }))
    return 0


def cmd_bench_sizes(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise RuntimeError(f"not a directory: {directory}")
    backends = _backends(args)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([
        "image", "width", "height", "uncompressed_bytes", "caption_bytes",
        "palette_bytes", "segmentation_rle_bytes", "total_payload_bytes",
    ])
    reports = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in (".ppm", ".png"):
            continue
        try:
            image = load_image(path)
            payload = transmit(image, backends)
        except Exception as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            continue
        report = size_report(payload)
        reports.append(report)
        writer.writerow([
            path.name, image.width, image.height,
            report.uncompressed_image_bytes, report.caption_bytes,
            report.palette_bytes, report.segmentation_rle_bytes,
            report.total_payload_bytes,
        ])
    if not reports:
        raise RuntimeError(f"no readable images in {directory}")
    count = len(reports)
    writer.writerow([
        "mean", "", "",
        f"{sum(r.uncompressed_image_bytes for r in reports) / count:.1f}",
        f"{sum(r.caption_bytes for r in reports) / count:.1f}",
        f"{sum(r.palette_bytes for r in reports) / count:.1f}",
        f"{sum(r.segmentation_rle_bytes for r in reports) / count:.1f}",
        f"{sum(r.total_payload_bytes for r in reports) / count:.1f}",
    ])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcom",
        description="Semantic image transmission: extract features, ship them "
                    "as a compact payload, and reconstruct via generated candidates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features from an image into a payload file")
    p.add_argument("image", help="input image (PPM or PNG)")
    p.add_argument("output", help="output payload path")
    p.add_argument("--recolor-bg", action="store_true",
                   help="force the background palette entry to white")
    p.add_argument("--background-label", type=int, default=0)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("render", help="render a payload's colored-segmented image")
    p.add_argument("payload")
    p.add_argument("output", help="output image (.ppm or .png)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("receive", help="reconstruct an image from a payload")
    p.add_argument("payload")
    p.add_argument("output", help="selected output image (.ppm or .png)")
    p.add_argument("--k", type=_positive_int, default=50, help="candidate count (default 50)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smr-weight", type=_unit_float, default=0.5)
    p.add_argument("--no-stop-word-removal", action="store_true")
    p.add_argument("--foreground-smr", action="store_true",
                   help="score only the reference's non-background pixels")
    p.add_argument("--negative-prompt", default=DEFAULT_NEGATIVE_PROMPT)
    p.add_argument("--audit-json", default=None,
                   help="write per-candidate scores as JSON lines")
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help="parallel candidate workers (default: cpu count)")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_receive)

    p = sub.add_parser("score", help="score a candidate image against a payload")
    p.add_argument("payload")
    p.add_argument("candidate", help="candidate image (PPM or PNG)")
    p.add_argument("--no-stop-word-removal", action="store_true")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench-sizes", help="tabulate payload sizes for a directory of images")
    p.add_argument("directory")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_bench_sizes)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
