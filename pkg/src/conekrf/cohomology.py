"""Exact class arithmetic for the conical flow on a degree-k Hirzebruch surface.

The Kähler class is written ``2*pi*(b [D_inf] - a [D_0])``.  Along the flow the
coefficients move affinely,

    a_t = a - (2/k - alpha) t,        b_t = b - (1 + 2/k) t,

and every regime decision below is made on :class:`fractions.Fraction` values so
that threshold cases are never decided by rounding.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

log = logging.getLogger(__name__)

__all__ = [
    "Regime",
    "Curve",
    "SurfaceParams",
    "ClassState",
    "as_fraction",
    "threshold",
    "classify_regime",
    "class_at",
    "class_state",
    "singularity_time",
    "logfano_time_alternative",
    "limit_lambda",
    "total_volume",
    "curve_volume",
    "intersection_form",
]


class Regime(str, enum.Enum):
    CONTRACTING = "Contracting"
    COLLAPSING = "Collapsing"
    LOGFANO = "LogFano"


class Curve(str, enum.Enum):
    ZERO_SECTION = "ZeroSection"
    INFINITY_SECTION = "InfinitySection"
    FIBER = "Fiber"


def as_fraction(x) -> Fraction:
    """Coerce ints, strings such as ``"3/4"``, Fractions and floats to a Fraction.

    Floats are taken at their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational number")


@dataclass(frozen=True)
class SurfaceParams:
    """Degree ``k``, initial class coefficients ``a < b`` and cone angle ``2*pi*alpha``."""

    k: int
    a: Fraction
    b: Fraction
    alpha: Fraction

    def __post_init__(self):
        k = self.k
        if isinstance(k, bool) or int(k) != k:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        object.__setattr__(self, "k", int(k))
        for name in ("a", "b", "alpha"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.a < self.b:
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"need 0 < alpha < 1, got alpha={self.alpha}")

    @property
    def a_rate(self) -> Fraction:
        """d a_t / dt."""
        return -(Fraction(2, self.k) - self.alpha)

    @property
    def b_rate(self) -> Fraction:
        """d b_t / dt."""
        return -(1 + Fraction(2, self.k))


# Intersection form on the lattice spanned by D_0, D_inf, with the fiber F.
# D_inf = D_0 + k F, so F.D_0 = F.D_inf = 1 and F.F = 0.
def intersection_form(k: int) -> dict:
    return {
        ("D0", "D0"): -k,
        ("Dinf", "Dinf"): k,
        ("D0", "Dinf"): 0,
        ("F", "D0"): 1,
        ("F", "Dinf"): 1,
        ("F", "F"): 0,
    }


@dataclass(frozen=True)
class ClassState:
    t: object
    a_t: object
    b_t: object
    regime: Regime
    T: Fraction


def threshold(p: SurfaceParams) -> Fraction:
    """Cone-angle threshold ``2/k - (1 + 2/k) a/b`` separating the regimes."""
    k = p.k
    return Fraction(2, k) - (1 + Fraction(2, k)) * p.a / p.b


def classify_regime(p: SurfaceParams) -> Regime:
    tau = threshold(p)
    if p.alpha < min(tau, Fraction(1)):
        return Regime.CONTRACTING
    if p.alpha > max(tau, Fraction(0)):
        return Regime.COLLAPSING
    return Regime.LOGFANO


def class_at(p: SurfaceParams, t):
    """Return ``(a_t, b_t)``; exact when ``t`` is rational, float otherwise."""
    if isinstance(t, (int, str)):
        t = as_fraction(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if isinstance(t, float):
        return float(p.a) + float(p.a_rate) * t, float(p.b) + float(p.b_rate) * t
    return p.a + p.a_rate * t, p.b + p.b_rate * t


def _contracting_time(p: SurfaceParams) -> Fraction:
    return p.a * p.k / (2 - p.alpha * p.k)


def _collapsing_time(p: SurfaceParams) -> Fraction:
    return (p.b - p.a) / (1 + p.alpha)


_LOGGED_LOGFANO: set = set()


def singularity_time(p: SurfaceParams) -> Fraction:
    """First time the evolving class leaves the Kähler cone.

    In the log Fano case ``a_t`` and ``b_t - a_t`` vanish together and the
    common root is returned.
    """
    regime = classify_regime(p)
    if regime is Regime.CONTRACTING:
        return _contracting_time(p)
    if regime is Regime.COLLAPSING:
        return _collapsing_time(p)
    T1, T2 = _contracting_time(p), _collapsing_time(p)
    if T1 != T2:  # pragma: no cover - algebraically impossible at the threshold
        raise ArithmeticError(f"log Fano roots disagree: {T1} != {T2}")
    alt = logfano_time_alternative(p)
    if alt != T1 and p not in _LOGGED_LOGFANO:
        _LOGGED_LOGFANO.add(p)
        log.info(
            "log Fano: class root T=%s differs from the closed form 2k/(2-alpha k)=%s; "
            "reporting the class root", T1, alt)
    return T1


def logfano_time_alternative(p: SurfaceParams) -> Fraction:
    """The closed form ``2k/(2 - alpha k)``, kept only for comparison.

    It agrees with the root of ``a_t`` only when ``a = 2``.
    """
    return Fraction(2 * p.k) / (2 - p.alpha * p.k)


def class_state(p: SurfaceParams, t) -> ClassState:
    a_t, b_t = class_at(p, t)
    return ClassState(t=t, a_t=a_t, b_t=b_t, regime=classify_regime(p),
                      T=singularity_time(p))


def limit_lambda(p: SurfaceParams) -> Fraction:
    """Scale of the limiting Fubini-Study base in the collapsing regime."""
    if classify_regime(p) is not Regime.COLLAPSING:
        raise ValueError("limit_lambda is only defined in the collapsing regime")
    k, a, b, alpha = p.k, p.a, p.b, p.alpha
    return ((k + 2) * a + (alpha * k - 2) * b) / (1 + alpha)


def total_volume(p: SurfaceParams, t):
    """``[omega_t]^2 / 2`` including the ``(2 pi)^2`` factor."""
    a_t, b_t = class_at(p, t)
    return (2 * math.pi) ** 2 * float(p.k * (b_t * b_t - a_t * a_t)) / 2


def curve_volume(p: SurfaceParams, t, curve: Curve | str):
    """``2 pi ([omega_t]/2pi . E)`` for the three distinguished curves."""
    curve = Curve(curve)
    a_t, b_t = class_at(p, t)
    form = intersection_form(p.k)
    other = {Curve.ZERO_SECTION: "D0", Curve.INFINITY_SECTION: "Dinf", Curve.FIBER: "F"}[curve]

    def pair(x, y):
        return form.get((x, y), form.get((y, x)))

    pairing = b_t * pair("Dinf", other) - a_t * pair("D0", other)
    return 2 * math.pi * float(pairing)
