"""Conflict detection for IoT-service automation rules in a smart home."""

__version__ = "0.1.0"
