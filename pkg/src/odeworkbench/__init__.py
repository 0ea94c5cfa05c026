"""Classical verification workbench for truncated-Taylor ODE solvers and Carleman linearization."""

__version__ = "0.1.0"
