"""Length observables behind the Gromov-Hausdorff statements.

Convention: the Riemannian metric is twice the real part of the Hermitian
form attached to omega.  Under it

* the radial fiber length of ``i dd^c v`` is ``(1/sqrt 2) int sqrt(v'') drho``;
  on the reference potential this is ``pi sqrt((b - a)/2)``,
* ``(P^1, kappa omega_fs)`` is a round sphere of diameter ``pi sqrt(kappa/2)``,
* the orbifold model ``k^2 r^(alpha k - 2) |dz|^2`` puts the cone point at
  radial distance ``(2/alpha) delta^(alpha k/2)`` from ``r = delta``.

Diameters are replaced by the lengths of explicit radial and great-circle
paths.  Exponents and limits do not depend on the convention.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .profile import Profile

__all__ = [
    "RIEMANNIAN_FACTOR",
    "InsufficientData",
    "Model",
    "Extrapolation",
    "GHReport",
    "fiber_radial_length",
    "sphere_diameter",
    "base_diameter_proxy",
    "wdelta_diameter",
    "orbifold_model_distance",
    "extrapolate_to_T",
    "gh_report",
    "DEFAULT_DELTAS",
]

RIEMANNIAN_FACTOR = 2.0
DEFAULT_DELTAS = (1e-1, 1e-2, 1e-3, 1e-4)


class InsufficientData(ValueError):
    pass


class Model(str, enum.Enum):
    POWER_LAW = "PowerLaw"
    LINEAR = "Linear"


def _sqrt_v2(profile: Profile) -> np.ndarray:
    return np.sqrt(np.clip(profile.d2, 0.0, None))


def _tail(profile: Profile, side: int) -> float:
    # beyond +-R, v'' decays like e^{-|rho|}; int_R^inf sqrt(c e^{-rho}) = 2 sqrt(v''(R))
    s = _sqrt_v2(profile)
    return 2.0 * float(s[0] if side < 0 else s[-1])


def fiber_radial_length(profile: Profile, tails: bool = True) -> float:
    """Length of a radial path across the fiber, ``(1/sqrt 2) int sqrt(v'')``.

    Trapezoid over the grid; with ``tails`` the exponential tails beyond
    ``+-R`` are added in closed form.
    """
    s = _sqrt_v2(profile)
    h = profile.grid.h
    total = h * (np.sum(s) - 0.5 * (s[0] + s[-1]))
    if tails:
        total += _tail(profile, -1) + _tail(profile, +1)
    return float(total) / math.sqrt(RIEMANNIAN_FACTOR)


def sphere_diameter(kappa: float) -> float:
    """Diameter ``pi sqrt(kappa/2)`` of ``(P^1, kappa omega_fs)``."""
    kappa = float(kappa)
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    return math.pi * math.sqrt(kappa / RIEMANNIAN_FACTOR)


def base_diameter_proxy(profile: Profile, k: int, rho_star: float | None = None) -> float:
    """Great-circle diameter of the section at ``rho_star`` (default ``+R``).

    The section's metric is ``k v'(rho_star) omega_fs``.
    """
    rho_star = profile.grid.R if rho_star is None else float(rho_star)
    kappa = k * float(np.interp(rho_star, profile.rho, profile.d1))
    return sphere_diameter(max(kappa, 0.0))


def wdelta_diameter(profile: Profile, delta: float, k: int, tails: bool = True) -> float:
    """Path-length proxy for the diameter of ``W_delta = {|sigma|^2 < delta}``.

    Radially across the neighborhood up to ``rho_delta = log(delta/(1-delta))``
    and then around the base at that level.
    """
    delta = float(delta)
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    rho_d = math.log(delta / (1.0 - delta))
    rho = profile.rho
    if rho_d < rho[0]:
        raise ValueError(f"rho_delta={rho_d:.3g} lies beyond the grid end {rho[0]:.3g}")
    s = _sqrt_v2(profile)
    cum = integrate.cumulative_trapezoid(s, dx=profile.grid.h, initial=0.0)
    radial = float(np.interp(rho_d, rho, cum))
    if tails:
        radial += _tail(profile, -1)
    radial /= math.sqrt(RIEMANNIAN_FACTOR)
    kappa = k * float(np.interp(rho_d, rho, profile.d1))
    return radial + sphere_diameter(max(kappa, 0.0))


def orbifold_model_distance(delta: float, alpha, k: int) -> float:
    """``int_0^delta k r^((alpha k - 2)/2) dr = (2/alpha) delta^(alpha k/2)``."""
    alpha = float(alpha)
    if not 0.0 < alpha * k < 2.0:
        raise ValueError(f"need 0 < alpha k < 2, got alpha k = {alpha * k}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return 2.0 / alpha * float(delta) ** (alpha * k / 2.0)


@dataclass(frozen=True)
class Extrapolation:
    model: Model
    value_at_T: float
    exponent: float     # power p for PowerLaw, slope for Linear
    quality: float      # R^2 of the fit (log-log for PowerLaw)
    root: float = float("nan")   # Linear only: where the fitted line crosses 0
    n: int = 0


def _r_squared(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def extrapolate_to_T(series, model, T: float, window: float = 0.2,
                     min_samples: int = 8) -> Extrapolation:
    """Fit the tail of ``series = [(t, value), ...]`` and evaluate at ``T``.

    Only samples with ``t >= (1 - window) T`` and ``t < T`` are used.
    PowerLaw fits ``value = c (T - t)^p`` in log-log; Linear is affine in t.
    """
    model = Model(model)
    data = np.asarray(list(series), dtype=float).reshape(-1, 2)
    T = float(T)
    sel = (data[:, 0] >= (1.0 - window) * T) & (data[:, 0] < T)
    t, y = data[sel, 0], data[sel, 1]
    if t.size < min_samples:
        raise InsufficientData(
            f"{t.size} sample(s) in the final {window:.0%} of [0, T]; need {min_samples}")
    if model is Model.LINEAR:
        slope, icpt = np.polyfit(t, y, 1)
        root = -icpt / slope if slope != 0 else float("nan")
        return Extrapolation(model, float(slope * T + icpt), float(slope),
                             _r_squared(y, slope * t + icpt), float(root), int(t.size))
    if np.any(y <= 0):
        raise ValueError("PowerLaw needs positive values")
    x, ly = np.log(T - t), np.log(y)
    p, lc = np.polyfit(x, ly, 1)
    value = 0.0 if p > 0 else (math.exp(lc) if p == 0 else math.inf)
    return Extrapolation(model, value, float(p), _r_squared(ly, p * x + lc), n=int(t.size))


@dataclass
class GHReport:
    t: float
    fiber_radial_length: float
    base_diameter_proxy: float
    wdelta_diameters: dict = field(default_factory=dict)
    extrapolations: dict = field(default_factory=dict)


def gh_report(profile: Profile, k: int, deltas=DEFAULT_DELTAS) -> GHReport:
    return GHReport(
        t=float(profile.t),
        fiber_radial_length=fiber_radial_length(profile),
        base_diameter_proxy=base_diameter_proxy(profile, k),
        wdelta_diameters={float(d): wdelta_diameter(profile, d, k) for d in deltas},
    )
