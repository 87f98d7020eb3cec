"""Mean-variance investment and proportional reinsurance under random coefficients."""

from ._core import (
    ConfigError,
    InadmissibleStrategy,
    InfeasibleTarget,
    ModelError,
    Problem,
    Solution,
    SolverError,
    frontier,
    simulate,
    solve,
)
from . import _core

__all__ = [
    "ConfigError",
    "InadmissibleStrategy",
    "InfeasibleTarget",
    "ModelError",
    "Problem",
    "Solution",
    "SolverError",
    "frontier",
    "simulate",
    "solve",
    "run",
]


def run(command, problem, out="."):
    """Run a pipeline command ("solve", "frontier", "simulate", "validate").

    Returns (exit_code, stdout_text, stderr_text).
    """
    try:
        fn = getattr(_core, "run_" + command)
    except AttributeError:
        raise ValueError(f"unknown command {command!r}") from None
    return fn(problem, str(out))
