"""Desk-scale UAV THz fronthaul simulator with a from-scratch TD3 trajectory trainer."""

__version__ = "0.1.0"
