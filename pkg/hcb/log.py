import logging
import os

from rich.console import Console
from rich.logging import RichHandler

ENV_VAR = "HCB_LOG"


def configure_logging(level: str | None = None) -> int:
    """Install a stderr RichHandler on the ``hcb`` logger.

    The level comes from ``level`` or the HCB_LOG environment variable and
    defaults to WARNING. Returns the numeric level that was applied.
    """
    name = (level or os.environ.get(ENV_VAR) or "WARNING").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.WARNING

    root = logging.getLogger("hcb")
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(numeric)
    root.propagate = False
    return numeric
