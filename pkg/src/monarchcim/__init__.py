"""Monarch-on-CIM toolkit: D2S conversion, crossbar mapping, scheduling, cost."""

__version__ = "0.1.0"
