# src/qadvlab/__init__.py
"""Desk-scale lab for adversarial robustness of quantum classifiers."""

__version__ = "0.2.0"
