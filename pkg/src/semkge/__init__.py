"""Semantic-driven loss functions for knowledge graph embeddings."""
