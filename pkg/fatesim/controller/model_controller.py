"""
Model Controller - validation, preset generation and the preset listing.
"""

import argparse
from pathlib import Path

import pandas as pd
from loguru import logger

from fatesim.services.model_service import dump_model, load_model_file, validate_model
from fatesim.services.synthetic_suite import generate, get_preset, list_presets
from fatesim.utils.errors import ConfigError, ModelValidationError
from fatesim.utils.response import success_response


def register(subparsers):
    validate = subparsers.add_parser("validate", help="check a JSON app model")
    validate.add_argument("path")
    validate.set_defaults(handler=cmd_validate)

    gen = subparsers.add_parser("gen", help="write a synthetic preset as a JSON app model")
    gen.add_argument("--preset", required=True)
    gen.add_argument("--seed", type=int, help="string-pool seed (default: the preset's)")
    gen.add_argument("--out", help="output file (default: stdout)")
    gen.set_defaults(handler=cmd_gen)

    presets = subparsers.add_parser("presets", help="list the synthetic presets")
    presets.set_defaults(handler=cmd_presets)


def cmd_validate(args: argparse.Namespace) -> int:
    model = load_model_file(args.path)
    diagnostics = validate_model(model)
    errors = [d for d in diagnostics if d.severity == "error"]
    for diagnostic in diagnostics:
        print(diagnostic)
    if errors:
        raise ModelValidationError(errors)
    return success_response(None, text=f"{args.path}: {len(model.nodes)} nodes, {len(diagnostics)} warning(s)")


def cmd_gen(args: argparse.Namespace) -> int:
    config = get_preset(args.preset).config
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    document = dump_model(generate(config))
    if args.out is None:
        return success_response(None, text=document)
    try:
        Path(args.out).write_text(document + "\n", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot write {args.out}: {e}")
    logger.info(f"Wrote {args.preset} to {args.out}")
    return success_response({"preset": args.preset, "out": args.out})


def cmd_presets(args: argparse.Namespace) -> int:
    rows = []
    for preset in list_presets():
        model = generate(preset.config)
        rows.append({
            "preset": preset.name,
            "nodes": len(model.app_nodes),
            "transitions": sum(len(node.transitions) for node in model.nodes),
            "pool": preset.config.string_pool_size,
            "dummies": preset.config.dummy_buttons,
        })
    return success_response(rows, text=pd.DataFrame(rows).to_string(index=False))
