"""Forging benign MQTT traffic that inflates NIDS false positives, and measuring what it costs a SOC."""

__version__ = "0.1.0"
