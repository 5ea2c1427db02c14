"""Generative classifiers built on per-class density estimators (GMM and MAF)."""

__version__ = "0.1.0"
