"""Hybrid edge-cloud capacity simulator."""
