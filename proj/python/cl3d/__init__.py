"""Python bindings for the cl3d exemplar-selection library."""

import json

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    adjusted_rand_index,
    chamfer,
    chamfer_distance_matrix,
    compute_delta,
    extract_features,
    kmeans,
    knn_affinity,
    normalize,
    normalized_laplacian,
    select_exemplars,
    selection_names,
    spectral_embed,
)
from . import _core

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "adjusted_rand_index",
    "benchmark_spec",
    "chamfer",
    "chamfer_distance_matrix",
    "compute_delta",
    "config_schema",
    "extract_features",
    "kmeans",
    "knn_affinity",
    "normalize",
    "normalized_laplacian",
    "run_experiment",
    "select_exemplars",
    "selection_names",
    "spectral_embed",
    "synthetic_dataset",
]


def benchmark_spec(seed=0):
    """The built-in multi-modal benchmark description as a dict."""
    return json.loads(_core._benchmark_spec(seed))


def synthetic_dataset(spec=None, seed=0):
    """Generate a dataset from a spec dict (built-in benchmark when None).

    Returns a dict with ``class_names`` and ``train``/``test`` lists holding one
    list of ``{"id", "label", "mode", "points"}`` records per class.
    """
    return _core._synthetic_dataset(None if spec is None else json.dumps(spec), seed)


def run_experiment(config, with_joint=False):
    """Run one experiment config (same schema as the CLI) and return report dicts."""
    return json.loads(_core._run_experiment(json.dumps(config), with_joint))


def config_schema():
    return json.loads(_core._config_schema())
