"""Stochastic mode reduction of a multiscale triad system with a
deterministic, energy-conserving fast bath.

Submodules: model (triad tables, drift, conservation), integrate (fixed-step
RK5 + Euler-noise stepping), bath (microcanonical runs, bath constant),
reduced (the closed (x, E) system), stats (correlation functions, times,
kurtosis, densities), harness/reproduce/cli (experiment orchestration).
"""

__version__ = "0.1.0"
