"""Cross-dataset phishing URL classifier audit.

Thin bindings over the C++ library. Arrays are float64 with one column per
feature; attributions are in log-odds (margin) units.
"""
import os
import pathlib

_data = pathlib.Path(__file__).with_name("data")
if _data.is_dir():
    os.environ.setdefault("PHISHAUDIT_DATA_DIR", str(_data))

from ._core import (  # noqa: E402
    Error,
    Model,
    cli,
    compare_rankings,
    evaluate,
    extract_features,
    feature_names,
    generate_synthetic,
    global_importance,
    model_names,
    run_matrix,
    shap_brute_force,
    shap_values,
)

__all__ = [
    "Error",
    "Model",
    "cli",
    "compare_rankings",
    "evaluate",
    "extract_features",
    "feature_names",
    "generate_synthetic",
    "global_importance",
    "model_names",
    "run_matrix",
    "shap_brute_force",
    "shap_values",
]
