"""Desk-scale home hub: device control, security, surveillance and remote access."""

__version__ = "0.1.0"
