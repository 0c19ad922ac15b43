"""Evidence synthesis engine for living systematic reviews."""

__version__ = "0.1.0"

from .errors import EvisynthError

__all__ = ["EvisynthError", "__version__"]
