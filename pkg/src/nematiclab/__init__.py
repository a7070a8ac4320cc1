"""Numerical laboratory for orientational kinetic dynamics of rod ensembles.

Modules:
  sphere       spectral engine for scalar fields on the unit sphere
  maier_saupe  homogeneous equilibrium theory and the exponential-moment map
  kernel       Gaussian interaction kernel and nonlocal multiplier operators
  kinetic      time integration of the full kinetic equation, moment flows
  limit        mobility constant, limit coefficient, director heat flow
  snapshots    binary snapshot container and CSV emission
  harness      experiment orchestration (well-prepared data, sweeps)
  cli          command-line entry point
"""

__version__ = "1.0.0"
