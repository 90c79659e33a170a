"""Renormalization of generalized interval exchange transformations."""
from .errors import BudgetError, ConfigError, GietError, NumericError

__version__ = "0.1.0"

__all__ = ["BudgetError", "ConfigError", "GietError", "NumericError", "__version__"]
