"""Tabular learning toolkit: implicitly-categorical feature detection,
padded one-hot channel encoding, learned Fourier features, MLP / 1D-conv
ResNet backbones, a random hyperparameter search harness, and the
evaluation reports built on top of the search records."""

__version__ = "0.1.0"
