"""Python bindings for the popdyn popularity-bias simulator."""

import json

from ._popdyn import (
    ConfigError,
    GroundTruth,
    PopdynError,
    SynthesisOptions,
    dscale_alpha,
    examination_prob,
    fpc_correct,
    gini,
    recipe_names,
    scale_scores,
    synthesize_ground_truth,
)
from . import _popdyn

__all__ = [
    "ConfigError",
    "GroundTruth",
    "PopdynError",
    "SynthesisOptions",
    "dscale_alpha",
    "examination_prob",
    "fpc_correct",
    "gini",
    "recipe",
    "recipe_names",
    "run_experiment",
    "scale_scores",
    "synthesize_ground_truth",
    "validate_config",
]


def recipe(name):
    """Built-in experiment config as a dict, or None."""
    text = _popdyn._recipe_json(name)
    return None if text is None else json.loads(text)


def validate_config(config):
    """Return the config with defaults filled in; raises ConfigError."""
    return json.loads(_popdyn._validate_config_json(json.dumps(config)))


def run_experiment(config, write_artifacts=False):
    """Run an experiment config (a dict) and return the summary dict."""
    return json.loads(_popdyn._run_experiment_json(json.dumps(config), write_artifacts))
