"""Live feed and control surface around a paced simulation run."""

from .app import create_app
from .session import SimSession

__all__ = ["SimSession", "create_app"]
