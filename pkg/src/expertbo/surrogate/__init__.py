from .model import Normalization, Posterior, TnpConfig, TnpModel, gaussian_nll, nll, predict
from .train import meta_train, validation_nll
from .checkpoint import load_model, save_model

__all__ = [
    "Normalization",
    "Posterior",
    "TnpConfig",
    "TnpModel",
    "gaussian_nll",
    "nll",
    "predict",
    "meta_train",
    "validation_nll",
    "load_model",
    "save_model",
]
