"""Command-line interface: render, validate, serve.

Exit codes: 0 success, 1 specification error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import NetpanoError
from .runtime import evaluate_spec
from .speccore import parse_spec


def _parse_param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed: --param ordering=seriation
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netpano",
                                     description="Evaluate network-visualization specs to SVG")
    parser.add_argument("--version", action="version", version=f"netpano {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="render a spec to SVG")
    render.add_argument("spec", help="path to a .jsonc spec file")
    render.add_argument("-o", "--output", required=True, help="output SVG path")
    render.add_argument("--param", action="append", type=_parse_param, default=[],
                        metavar="K=V", help="parameter override (repeatable)")
    render.add_argument("--events", help="path to a JSON event log to replay")
    render.add_argument("--seed", type=int, default=0, help="seed for seeded procedures")
    render.add_argument("--assets", help="directory for relative data paths (default: spec dir)")

    validate = sub.add_parser("validate", help="validate a spec without evaluating data")
    validate.add_argument("spec", help="path to a .jsonc spec file")

    serve = sub.add_parser("serve", help="run the HTTP render service")
    serve.add_argument("--port", type=int, default=8787)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--assets", default=".", help="directory for relative data paths")
    serve.add_argument("--editor", help="directory of built editor assets to serve at /")
    return parser


def cmd_render(args) -> int:
    spec_path = Path(args.spec)
    try:
        text = spec_path.read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read {args.spec}: {e}", file=sys.stderr)
        return 2
    events = None
    if args.events:
        try:
            events = json.loads(Path(args.events).read_text(encoding="utf-8"))
        except OSError as e:
            print(f"error: cannot read {args.events}: {e}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as e:
            print(f"error: malformed event log: {e}", file=sys.stderr)
            return 1
    asset_root = args.assets or str(spec_path.parent)
    try:
        svg, manifest = evaluate_spec(
            text, params=dict(args.param), events=events,
            seed=args.seed, asset_root=asset_root)
    except NetpanoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        Path(args.output).write_text(svg.text, encoding="utf-8")
    except OSError as e:
        print(f"error: cannot write {args.output}: {e}", file=sys.stderr)
        return 2
    for warning in manifest.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read {args.spec}: {e}", file=sys.stderr)
        return 2
    try:
        doc = parse_spec(text)
        from .speccore import resolve_dependencies

        resolve_dependencies(doc)
    except NetpanoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for warning in doc.warnings:
        print(f"warning: {warning}")
    print("OK")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    serve(host=args.host, port=args.port, asset_root=args.assets, editor_dir=args.editor)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "render":
        return cmd_render(args)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
