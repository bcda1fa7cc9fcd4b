"""
Stats Controller - recompute the comparison report from stored run CSVs.
"""

import argparse
from pathlib import Path

from fatesim.config import settings
from fatesim.services.artifacts import load_run_directory, render_report, write_report
from fatesim.services.stats import compare
from fatesim.utils.response import success_response


def register(subparsers):
    stats = subparsers.add_parser("stats", help="rebuild the comparison report from a results directory")
    stats.add_argument("--in", dest="in_dir", required=True)
    stats.add_argument("--alpha", type=float, help="significance level (default: the stored one)")
    stats.add_argument("--out", help="where to write report.json/report.txt (default: --in)")
    stats.set_defaults(handler=cmd_stats)


def cmd_stats(args: argparse.Namespace) -> int:
    config, records = load_run_directory(args.in_dir)
    alpha = args.alpha or (config.alpha if config else settings.ALPHA)
    report = compare(records, alpha)
    out = Path(args.out or args.in_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out, report)
    return success_response(report, text=render_report(report))
