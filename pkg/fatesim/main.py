import argparse
from typing import List, Optional

from loguru import logger

from fatesim.config import settings
from fatesim.logger import setup_logger
from fatesim.middleware import setup_middlewares
from fatesim.route import dispatch, setup_routes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Simulate app exploration with reinforcement-learning agents on finite-state app models.",
    )
    # Then setup routes
    setup_routes(parser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    # Setup logger
    setup_logger(settings)

    args = build_parser().parse_args(argv)
    logger.debug(f"Starting {settings.APP_NAME} {args.command} ({settings.ENVIRONMENT})")

    # Apply all middlewares around the dispatcher
    handler = setup_middlewares(dispatch)
    return handler(args)
