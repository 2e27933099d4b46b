"""Scattering-transform features and sparse logistic classifiers for sonar echoes."""

__version__ = "0.1.0"

from .avft import avft, avft_batch
from .echo import EchoScene, Material, named_profile, peak_train, synthesize
from .evaluation import ProtocolConfig, auc_score, roc, run_experiment
from .filterbank import FilterBank, FilterBankSpec, build_bank, littlewood_paley
from .scattering import ScatteringConfig, build_network, flatten, scatter
from .signal import Signal
from .sparse_logit import LabeledDataset, fit_path

__all__ = [
    "avft", "avft_batch", "EchoScene", "Material", "named_profile", "peak_train", "synthesize",
    "ProtocolConfig", "auc_score", "roc", "run_experiment", "FilterBank", "FilterBankSpec",
    "build_bank", "littlewood_paley", "ScatteringConfig", "build_network", "flatten", "scatter",
    "Signal", "LabeledDataset", "fit_path",
]
