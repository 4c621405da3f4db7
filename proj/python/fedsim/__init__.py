"""Python front end for the fedsim simulator."""

import json as _json

from ._fedsim import SCHEMA_VERSION, ConfigError, DivergenceError
from . import _fedsim

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "DivergenceError",
    "run",
    "strategies",
    "config_schema",
    "gradcheck",
]


def run(config, write=False):
    """Run one experiment from a config dict.

    Returns {"summary": ..., "metrics": [one dict per round]}. With
    write=True the artifacts also go to config["output"]["dir"].
    """
    return _json.loads(_fedsim.run_json(_json.dumps(config), write))


def strategies():
    return _json.loads(_fedsim.strategies_json())


def config_schema():
    return _json.loads(_fedsim.config_schema_json())


def gradcheck(trials=100, seed=0):
    return _fedsim.gradcheck(trials, seed)
