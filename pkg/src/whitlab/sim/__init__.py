"""
Monte Carlo engines.

This package contains the random streams, death-chain samplers, the exact
and log-time Euler samplers of the Gaussian process and the q-Whittaker
particle system.
"""
