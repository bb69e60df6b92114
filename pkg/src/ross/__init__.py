"""Robust decentralized stochastic learning with Shapley-weighted
cross-gradient aggregation: models, topologies, data/attack injectors,
the round engine, theory diagnostics, and a reproducible experiment CLI."""

__version__ = "0.1.0"
