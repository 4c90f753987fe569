"""Figure rendering for semi-bandit benchmark and regret CSVs."""

from .render import FigureSpec, SchemaError, plot_regret, plot_runtime

__all__ = ["FigureSpec", "SchemaError", "plot_regret", "plot_runtime"]
__version__ = "0.1.0"
