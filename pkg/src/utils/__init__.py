"""Logging and error types shared across the simulator."""
