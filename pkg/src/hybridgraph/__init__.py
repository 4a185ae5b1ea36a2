"""Hybrid graph index: one graph for weighted dense, sparse, full-text and KG retrieval."""
