"""Particle solvers for McKean and McKean Feynman-Kac equations."""

import json as _json

from . import _mfke
from ._mfke import (
    ConfigError,
    NumericalAbort,
    OracleInstability,
    cole_hopf_burgers,
    problem_names,
    set_worker_count,
    wasserstein1_to_normal,
    worker_count,
)

__all__ = [
    "ConfigError",
    "NumericalAbort",
    "OracleInstability",
    "cole_hopf_burgers",
    "echo_config",
    "oracle",
    "problem_names",
    "run",
    "set_worker_count",
    "simulate",
    "wasserstein1_to_normal",
    "worker_count",
]


def _text(config):
    """Config as text: a dict is serialised to JSON, a str is passed through."""
    return _json.dumps(config) if isinstance(config, dict) else config


def echo_config(config):
    """Config with every default filled in, as a dict."""
    return _json.loads(_mfke.echo_config(_text(config)))


def simulate(config):
    """Runs the particle engine; returns a dict of numpy arrays."""
    return _mfke.simulate(_text(config))


def run(mode, config, out_dir):
    """Runs a CLI mode (simulate, jump, reverse, randomenv, control, compare)."""
    _mfke.run(mode, _text(config), str(out_dir))


def oracle(kind, config=None):
    """Reference snapshots for burgers, heat, fd or hjb."""
    return _mfke.oracle(kind, "" if config is None else _text(config))
