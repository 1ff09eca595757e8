"""Numerical core: Dirac shell operators, effective surface operators and asymptotics."""
