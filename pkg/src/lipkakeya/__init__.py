"""Lipschitz-Kakeya maximal operators and covering-lemma verification."""

__version__ = "0.1.0"
