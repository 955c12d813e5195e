"""JSON-over-HTTP front of the package; the CLI is a client of this."""

from .app import app

__all__ = ["app"]
