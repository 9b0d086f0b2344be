"""Python interface to the tensegrity spine workbench."""

import json as _json

from ._core import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InfeasibleError,
    SpineError,
    SpineModel,
    cable_tensions,
    equilibrium_matrix,
    inverse_statics,
    load_model,
    node_positions,
    preset_model,
    reference_trajectory,
    save_model,
    solve_qp,
    state_derivative,
    step,
    total_energy,
)
from ._core import default_config as _default_config
from ._core import run_command as _run_command


def default_config():
    """Default experiment configuration as a nested dict."""
    return _json.loads(_default_config())


def run(command, config=None, out="out"):
    """Run a CLI command in-process. Returns (exit_code, messages, report)."""
    code, messages, report = _run_command(command, _json.dumps(config or {}), str(out))
    return code, list(messages), _json.loads(report)


__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "InfeasibleError",
    "SpineError",
    "SpineModel",
    "cable_tensions",
    "default_config",
    "equilibrium_matrix",
    "inverse_statics",
    "load_model",
    "node_positions",
    "preset_model",
    "reference_trajectory",
    "run",
    "save_model",
    "solve_qp",
    "state_derivative",
    "step",
    "total_energy",
]
