"""Disjunctive sum-of-squares certificates for nonnegativity, copositivity and sphere minimization."""

__version__ = "0.1.0"
