"""Conical Kähler-Ricci flow on Hirzebruch surfaces under Calabi symmetry.

Modules
-------
cohomology  exact class evolution, regimes and singular times
profile     grid, reference potential, regularizer chi, profiles
solver      time integration of the scalar flow
monitor     falsifiable numerical versions of the a priori bounds
gh          length observables and extrapolation to the singular time
surfaces    intersection-theoretic classification of contracted curves
runner      presets, sweeps and file output (driven by ``conekrf`` CLI)
"""

from .cohomology import (Curve, Regime, SurfaceParams, class_at, class_state, classify_regime,
                         limit_lambda, singularity_time, threshold)
from .profile import Grid, Profile, Regularization, initial_profile
from .solver import SolverConfig, Termination, Trajectory, run

__version__ = "0.1.0"

__all__ = [
    "Curve", "Regime", "SurfaceParams", "class_at", "class_state", "classify_regime",
    "limit_lambda", "singularity_time", "threshold",
    "Grid", "Profile", "Regularization", "initial_profile",
    "SolverConfig", "Termination", "Trajectory", "run",
]
