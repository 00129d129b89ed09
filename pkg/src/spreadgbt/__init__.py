"""Robustness verification and training of large-spread tree ensembles."""

from .errors import (InputError, NotLargeSpreadError, OracleTimeout, ResourceLimitError,
                     SpreadGBTError, StructureError)
from .geometry import HyperRectangle, check_large_spread, p_spread, reachable_leaves
from .model import Attacker, Ensemble, InverseLink, Leaf, Split, Tree, classify, raw_predict
from .modelio import load_model, save_model
from .oracle import oracle_verify
from .solver import solve
from .trainer import TrainConfig, fit
from .verifier import Verifier, verify_bv, verify_dataset, verify_ev

__version__ = "0.1.0"

__all__ = [
    "Attacker", "Ensemble", "HyperRectangle", "InputError", "InverseLink", "Leaf",
    "NotLargeSpreadError", "OracleTimeout", "ResourceLimitError", "Split", "SpreadGBTError",
    "StructureError", "TrainConfig", "Tree", "Verifier", "check_large_spread", "classify",
    "fit", "load_model", "oracle_verify", "p_spread", "raw_predict", "reachable_leaves",
    "save_model", "solve", "verify_bv", "verify_dataset", "verify_ev",
]
