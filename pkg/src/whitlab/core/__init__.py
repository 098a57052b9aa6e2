"""
Core numerics of the Whittaker SDE laboratory.

This package holds the lattice and its semigroup, binomial matching
probabilities and their approximations, the covariance engine, the limit
kernels, the weak form and the identity suites.
"""
