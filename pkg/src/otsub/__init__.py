"""Exact and subsampled optimal transport distances on finite spaces."""

from .measure import CostMatrix, DiscreteMeasure, GroundSpace, TransportPlan, make_cost, wasserstein

__version__ = "0.1.0"

__all__ = ["CostMatrix", "DiscreteMeasure", "GroundSpace", "TransportPlan", "make_cost", "wasserstein"]
