"""Federated-learning simulator package."""
