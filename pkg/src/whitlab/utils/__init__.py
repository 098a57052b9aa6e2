"""
Utility functions for the laboratory.

This package contains the audited quadrature wrapper, the sweep controller
and the quadrature audit log.
"""
