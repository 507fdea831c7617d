"""Numerical laboratory for quasi-stationary behavior of branching processes.

Continuous-state branching processes that explode in finite time can be
conditioned on non-explosion; their conditional laws converge to
quasi-stationary distributions characterized through the cumulant flow
u(t, lambda) and its time integral Phi. This package evaluates the flow,
the limit transforms, and the discrete-state analogues, and checks them
against exact event-driven simulation.

Modules: mechanisms (branching mechanisms and classification), flows
(u(t, lambda), Phi, survival and extinction exponents), qsd (limit laws
and conditional transforms), discrete (continuous-time Galton-Watson
analogues), montecarlo (exact simulation with reproducible streams),
verify (named verification suites), cli (command-line driver).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
