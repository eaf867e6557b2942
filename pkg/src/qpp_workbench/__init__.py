"""Workbench for evaluating query performance predictors across evaluation contexts."""

__version__ = "0.1.0"
