"""Random diffeomorphisms of the interval and the circle.

Sampling from Malliavin-Shavgulidze measures (exponential integration of
Brownian paths), dynamical analysis (rotation numbers, periodic orbits,
linearization, renormalization), quasi-invariance densities, and Denjoy
counterexamples, with a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"
