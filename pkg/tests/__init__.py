"""Test suite for python-dabmux."""
