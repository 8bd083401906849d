"""Terminal presentation for restirmcmc."""
from .rich_formatter import RichFormatter

__all__ = ["RichFormatter"]
