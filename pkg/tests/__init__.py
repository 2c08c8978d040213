"""Test suite for the federated simulator."""
