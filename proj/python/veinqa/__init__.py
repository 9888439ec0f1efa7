"""Python access to the veinqa vein image quality toolkit."""

from ._core import (
    VeinqaError,
    brisque_features,
    classic_score,
    compute_rates,
    extract_template,
    fit_aggd,
    miura_match,
    mscn,
    run_cli,
    score_model,
    synthesize,
)

__all__ = [
    "VeinqaError",
    "brisque_features",
    "classic_score",
    "compute_rates",
    "extract_template",
    "fit_aggd",
    "miura_match",
    "mscn",
    "run_cli",
    "score_model",
    "synthesize",
]

__version__ = "0.1.0"
