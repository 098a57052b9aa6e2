"""Unit tests for python-dabmux."""
