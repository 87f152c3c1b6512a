"""Observers for zero-deficiency mass-action reaction networks."""

import json
from pathlib import Path

import numpy as np

from ._core import (
    DimensionMismatch,
    DomainError,
    EquilibriumCheckFailed,
    Error,
    InvalidK,
    Lyapunov,
    NoConvergence,
    OutputMap,
    OverflowError,
    ParseError,
    PreconditionError,
    RankDeficient,
    ReactionNetwork,
    ValidationError,
    blowup_demo,
    find_equilibrium,
    shift_equilibrium,
    simulate,
)
from . import _core

__all__ = [
    "DimensionMismatch", "DomainError", "EquilibriumCheckFailed", "Error", "InvalidK",
    "Lyapunov", "NoConvergence", "OutputMap", "OverflowError", "ParseError",
    "PreconditionError", "RankDeficient", "ReactionNetwork", "ValidationError",
    "blowup_demo", "check_detectability", "find_equilibrium", "observer_rhs",
    "run_experiment", "shift_equilibrium", "simulate",
]


def check_detectability(net, c):
    """Report on rank[D0; C] = n as a dict."""
    if not isinstance(c, OutputMap):
        c = OutputMap(np.asarray(c, dtype=float))
    return json.loads(_core.check_detectability(net, c))


def observer_rhs(net, c, spec, state, y):
    """Right-hand side of the observer described by `spec` (a dict like the config entries)."""
    if not isinstance(c, OutputMap):
        c = OutputMap(np.asarray(c, dtype=float))
    return _core.observer_rhs(net, c, json.dumps(spec), np.asarray(state, float), np.asarray(y, float))


def run_experiment(config, z0=None, force=False):
    """Run every observer of an experiment config (dict or path to JSON)."""
    base = ""
    if not isinstance(config, dict):
        path = Path(config)
        base = str(path.parent)
        config = json.loads(path.read_text())
    if z0 is not None:
        z0 = np.asarray(z0, dtype=float)
    return _core.run_experiment(json.dumps(config), base, z0, force)
