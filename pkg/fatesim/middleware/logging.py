import time
from functools import wraps
from typing import Callable

from loguru import logger

Handler = Callable[..., int]


def log_commands_middleware(handler: Handler) -> Handler:
    """Log every command with its exit status and execution time."""

    @wraps(handler)
    def wrapper(args) -> int:
        start_time = time.time()  # Start the timer

        status = handler(args)  # Process the command

        duration = (time.time() - start_time) * 1000  # Convert to milliseconds
        logger.info(f"CMD: {args.command} | Status: {status} | Time: {duration:.2f}ms")

        return status

    return wrapper
