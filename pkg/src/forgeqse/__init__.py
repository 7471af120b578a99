"""Entanglement forging and quantum subspace expansion for active-space excited states."""
