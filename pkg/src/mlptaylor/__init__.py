"""Exact Taylor coefficients of multilayer perceptrons via rooted-tree
expansions, with trainers, scattering-length oracles, and the iterative
leading-order-subtraction pipeline that machine-learns Born kernels."""

__version__ = "0.1.0"
