"""Blow-up experiments for semilinear damped wave equations with speed ``t^{-k}``.

Submodules
----------
model
    Critical exponents, regimes and lifespan estimates.
specfun
    Modified Bessel functions of real order and the radial test function.
kernels
    Kernel functions of the linear problem and the weights built from them.
solver
    Radial method-of-lines solver and lifespan sweeps.
iterlab
    Iteration sequences, thresholds and envelopes.
suites
    Verification suites returning JSON-ready dicts.
cli
    Command-line experiment runner.
"""

__version__ = "0.1.0"
