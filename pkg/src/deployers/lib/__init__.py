"""Helper library exports."""

from deployers.lib.logging_config import configure_logging
from deployers.lib.money import largest_remainder

__all__ = ["configure_logging", "largest_remainder"]
