"""Exact solvers for the discrete transport linear program."""

from .oracles import brute_force_lp, sorted_coupling_1d
from .simplex import SimplexResult, solve_dense, solve_transport_simplex

__all__ = ["brute_force_lp", "sorted_coupling_1d", "solve_dense", "solve_transport_simplex", "SimplexResult"]
