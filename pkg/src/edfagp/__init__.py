"""Physics-informed Gaussian-process EDFA gain models trained by active learning."""

__version__ = "0.1.0"
