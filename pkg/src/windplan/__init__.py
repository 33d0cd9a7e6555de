"""Wind-aware 2D trajectory planning toolkit."""

__version__ = "0.1.0"
