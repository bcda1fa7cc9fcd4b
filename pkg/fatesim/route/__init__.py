import argparse

from loguru import logger
from pydantic import ValidationError

from fatesim.controller import model_controller, run_controller, stats_controller
from fatesim.utils.errors import ConfigError, FateError
from fatesim.utils.response import error_response


def validation_message(exc: ValidationError) -> str:
    # Get only the first error
    if exc.errors():
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "config"
        return f"{field}: {error['msg']}".lower()
    return "Validation error"


def setup_routes(parser: argparse.ArgumentParser):
    """Register every command on the parser."""
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    model_controller.register(subparsers)
    run_controller.register(subparsers)
    stats_controller.register(subparsers)


def dispatch(args: argparse.Namespace) -> int:
    """Run the selected command and turn its exceptions into exit codes."""
    try:
        return args.handler(args)
    except ValidationError as e:
        return error_response(validation_message(e), ConfigError.exit_code)
    except FateError as e:
        return error_response(e.message, e.exit_code)
    except KeyboardInterrupt:
        return error_response("Interrupted", 130)
    except Exception as e:
        logger.exception(f"Command {args.command} failed unexpectedly")
        return error_response(f"{type(e).__name__}: {e}", 1)
