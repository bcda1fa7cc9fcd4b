import json
import sys
from typing import Any, Optional

from loguru import logger
from pydantic_core import to_jsonable_python


def success_response(data: Any, text: Optional[str] = None) -> int:
    # to_jsonable_python handles Pydantic models, tuples and paths
    if text is not None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(json.dumps(to_jsonable_python(data), indent=2) + "\n")
    return 0


def error_response(error: str, exit_code: int = 1) -> int:
    logger.error(error)
    sys.stderr.write(f"error: {error}\n")
    return exit_code
