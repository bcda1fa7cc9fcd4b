from .logging import Handler, log_commands_middleware


def setup_middlewares(handler: Handler) -> Handler:
    """Wrap the command dispatcher in every middleware."""

    # Add logging middleware last so it times the whole command
    return log_commands_middleware(handler)
