"""Utility modules for the critical-window lab."""
