"""Closed-form pieces of the symmetric reduction on the rho-line.

A U(2)/Z_k invariant metric is ``i dd^c v(rho)`` with ``rho = log |w|_h^2``.  The
flow state is kept as the deviation ``w = v - vhat_t`` from the explicit
reference potential

    vhat_t(rho) = a_t rho + (b_t - a_t) log(1 + e^rho),

whose tails carry the whole class.  Storing ``w`` instead of ``v`` keeps the
finite differences free of the O(b R) cancellation at the right end.  A
profile may also carry the slope ``u = w'`` directly; the flow evolves ``u``,
which decays like ``e^{-|rho|}`` and so keeps its relative accuracy in the
tails where ``v''`` is tiny.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .cohomology import SurfaceParams, class_at

__all__ = [
    "PositivityViolation",
    "Grid",
    "Regularization",
    "Profile",
    "reference_potential",
    "reference_rate",
    "sigma_norm",
    "chi",
    "chi_profile",
    "chi_profile_slope",
    "integrate_slope",
    "theta_and_logderivs",
    "initial_profile",
    "STENCILS",
]


class PositivityViolation(ValueError):
    """Discrete v' or v'' is not positive; the profile left the Kähler cone."""


@dataclass(frozen=True)
class Grid:
    R: float
    N: int

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not isinstance(self.N, (int, np.integer)):
            raise TypeError(f"N must be an integer, got {self.N!r}")
        if self.N < 7 or self.N % 2 == 0:
            raise ValueError("N must be odd and at least 7")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.N - 1)

    @property
    def center(self) -> int:
        return (self.N - 1) // 2

    @functools.cached_property
    def nodes(self) -> np.ndarray:
        # built around the center index so that rho = 0 is represented exactly
        return self.h * (np.arange(self.N) - self.center)


@dataclass(frozen=True)
class Regularization:
    epsilon: float
    delta: float
    psi: object = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.psi is not None:
            raise NotImplementedError("only psi = 0 (eta = eta_0) is supported")


def reference_potential(p: SurfaceParams, t, rho):
    """``(vhat_t, vhat_t', vhat_t'')`` evaluated without overflow for any rho."""
    a_t, b_t = (float(x) for x in class_at(p, t))
    rho = np.asarray(rho, dtype=float)
    gap = b_t - a_t
    s = special.expit(rho)
    v = a_t * rho + gap * np.logaddexp(0.0, rho)
    v1 = a_t + gap * s
    v2 = gap * s * special.expit(-rho)
    return v, v1, v2


def reference_derivatives(p: SurfaceParams, t, rho):
    """First three rho-derivatives of ``vhat_t``."""
    a_t, b_t = (float(x) for x in class_at(p, t))
    rho = np.asarray(rho, dtype=float)
    gap = b_t - a_t
    s, sm = special.expit(rho), special.expit(-rho)
    return a_t + gap * s, gap * s * sm, gap * s * sm * (sm - s)


def reference_rate(p: SurfaceParams, rho):
    """Time derivative of ``vhat_t`` (independent of t, the class moves affinely)."""
    rho = np.asarray(rho, dtype=float)
    da, db = float(p.a_rate), float(p.b_rate)
    return da * rho + (db - da) * np.logaddexp(0.0, rho)


def sigma_norm(rho):
    """``|sigma|^2_{eta_0} = e^rho / (1 + e^rho)``."""
    return special.expit(rho)


def _chi_integrand(u, alpha):
    # ((1+u)^alpha - 1)/u, continuous at u = 0 with value alpha
    u = np.asarray(u, dtype=float)
    out = np.full_like(u, alpha)
    nz = u != 0
    out[nz] = np.expm1(alpha * np.log1p(u[nz])) / u[nz]
    return out


def _chi_scalar_integrand(u, alpha):
    if u == 0.0:
        return alpha
    return np.expm1(alpha * np.log1p(u)) / u


def chi(s, epsilon, alpha, rtol=1e-10):
    """The regularizer ``chi(s) = 1/alpha int_0^{s-eps^2} ((r+eps^2)^alpha - eps^(2 alpha))/r dr``.

    Scaling ``r = eps^2 u`` gives ``chi = eps^(2 alpha)/alpha * F(x/eps^2)`` with
    ``F(y) = int_0^y ((1+u)^alpha - 1)/u du``, which is integrated adaptively.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    eps2 = float(epsilon) ** 2
    alpha = float(alpha)
    if np.any(s_arr < eps2):
        raise ValueError("chi is defined on [epsilon^2, inf)")
    out = np.empty_like(s_arr)
    for i, si in enumerate(s_arr):
        y = (si - eps2) / eps2
        if y == 0.0:
            out[i] = 0.0
            continue
        # split at u = 1 so the quadrature sees the kink scale of the integrand
        pieces = [(0.0, min(y, 1.0))]
        if y > 1.0:
            pieces.append((1.0, y))
        total = 0.0
        for lo, hi in pieces:
            val, _ = integrate.quad(_chi_scalar_integrand, lo, hi, args=(alpha,),
                                    epsabs=0.0, epsrel=rtol, limit=200)
            total += val
        out[i] = eps2 ** alpha / alpha * total
    return out if np.ndim(s) else float(out[0])


def chi_profile(rho, epsilon, alpha):
    """``chi(sigma_norm(rho) + eps^2)`` on an increasing array of nodes.

    Accumulates short Gauss-Kronrod panels between consecutive nodes, so the
    cost is one small quadrature per node and neighbouring values share all
    but one panel (keeps finite differences of the result smooth).
    """
    rho = np.asarray(rho, dtype=float)
    eps2 = float(epsilon) ** 2
    alpha = float(alpha)
    u = sigma_norm(rho) / eps2
    order = np.argsort(u, kind="stable")
    us = u[order]
    F = np.empty_like(us)
    acc, prev = 0.0, 0.0
    for i, ui in enumerate(us):
        if ui > prev:
            val, _ = integrate.quad(_chi_scalar_integrand, prev, ui, args=(alpha,),
                                    epsabs=0.0, epsrel=1e-13, limit=100)
            acc += val
            prev = ui
        F[i] = acc
    out = np.empty_like(F)
    out[order] = eps2 ** alpha / alpha * F
    return out


def chi_profile_slope(rho, epsilon, alpha):
    """rho-derivative of :func:`chi_profile`, in closed form.

    ``d/drho chi(sigma + eps^2) = eps^(2 alpha)/alpha ((1 + y)^alpha - 1)(1 - sigma)``
    with ``y = sigma/eps^2``.
    """
    rho = np.asarray(rho, dtype=float)
    eps2 = float(epsilon) ** 2
    alpha = float(alpha)
    y = sigma_norm(rho) / eps2
    return eps2 ** alpha / alpha * np.expm1(alpha * np.log1p(y)) * special.expit(-rho)


def theta_and_logderivs(rho, epsilon):
    """``theta = 1 + eps^2 (1 + e^-rho)`` and the first three derivatives of ``log theta``.

    With ``q = expit(-(rho + L))``, ``L = log((1 + eps^2)/eps^2)``:
    ``(log theta)' = -q``, ``'' = q(1-q)``, ``''' = -q(1-q)(1-2q)``.
    """
    rho = np.asarray(rho, dtype=float)
    eps2 = float(epsilon) ** 2
    log_theta = np.logaddexp(0.0, np.log(eps2) + np.logaddexp(0.0, -rho))
    L = np.log1p(eps2) - np.log(eps2)
    q = special.expit(-(rho + L))
    d1 = -q
    d2 = q * (1.0 - q)
    d3 = -q * (1.0 - q) * (1.0 - 2.0 * q)
    return np.exp(log_theta), d1, d2, d3


def log_theta(rho, epsilon):
    rho = np.asarray(rho, dtype=float)
    eps2 = float(epsilon) ** 2
    return np.logaddexp(0.0, np.log(eps2) + np.logaddexp(0.0, -rho))


# Central difference stencils: (offsets, weights) per derivative order, scaled by h^-order.
STENCILS = {
    "central2": {
        1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
        2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
        3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
    },
    "central4": {
        1: (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
        2: (np.array([-2, -1, 0, 1, 2]), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
        3: (np.array([-3, -2, -1, 1, 2, 3]),
            np.array([1.0, -8.0, 13.0, -13.0, 8.0, -1.0]) / 8.0),
    },
}
GHOSTS = 3


def _lagrange(xs, x):
    """Weights of the interpolating polynomial through ``xs`` evaluated at ``x``."""
    xs = np.asarray(xs, dtype=float)
    out = np.ones(len(xs))
    for m in range(len(xs)):
        for n in range(len(xs)):
            if n != m:
                out[m] *= (x - xs[n]) / (xs[m] - xs[n])
    return out


def _ghost_rules(grid: Grid, weights_for):
    # weights_for(j) -> weights on the 1st, 2nd, ... node inward from the end
    N = grid.N
    left, right = [], []
    for j in range(1, GHOSTS + 1):
        wts = weights_for(j)
        left.append({m: float(c) for m, c in enumerate(wts) if c != 0.0})
        right.append({N - 1 - m: float(c) for m, c in enumerate(wts) if c != 0.0})
    return left, right


def ghost_weights(grid: Grid, boundary: str):
    """Linear rule producing ghost values of ``w`` from interior values.

    Returns ``(left, right)``: ``left[j]`` is a dict ``{node index: weight}``
    giving ghost ``-(j+1)``; same for the right end mirrored.

    ``"neumann"`` reflects ``w`` evenly about the end node (zero first
    difference).  ``"exponential"`` extrapolates ``w`` quadratically in
    ``s = e^rho`` on the left and ``s = e^-rho`` on the right, the smooth
    extension across the divisor truncated after the ``s^2`` term.
    """
    h = grid.h
    if boundary == "neumann":
        return _ghost_rules(grid, lambda j: np.eye(j + 1)[j])
    if boundary == "exponential":
        # s measured in units of its value at the end node
        r = math.exp(h)
        return _ghost_rules(grid, lambda j: _lagrange([1.0, r, r * r], math.exp(-j * h)))
    raise ValueError(f"unknown boundary rule {boundary!r}")


def slope_ghost_weights(grid: Grid, boundary: str):
    """Ghost rule for the slope ``u = w'`` matching :func:`ghost_weights`.

    ``"neumann"`` reflects ``u`` oddly.  ``"exponential"`` uses
    ``u = s dw/ds = c_1 s + c_2 s^2``, which vanishes at the divisor ``s = 0``.
    """
    h = grid.h
    if boundary == "neumann":
        return _ghost_rules(grid, lambda j: -np.eye(j + 1)[j])
    if boundary == "exponential":
        r = math.exp(h)
        return _ghost_rules(grid, lambda j: _lagrange([0.0, 1.0, r], math.exp(-j * h))[1:])
    raise ValueError(f"unknown boundary rule {boundary!r}")


def extend(w: np.ndarray, grid: Grid, boundary: str, slope: bool = False) -> np.ndarray:
    left, right = (slope_ghost_weights if slope else ghost_weights)(grid, boundary)
    lg = [sum(c * w[i] for i, c in rule.items()) for rule in left]
    rg = [sum(c * w[i] for i, c in rule.items()) for rule in right]
    return np.concatenate([lg[::-1], w, rg])


def integrate_slope(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Antiderivative of ``u`` on the nodes, zero at the center (cumulative Simpson)."""
    u = np.asarray(u, dtype=float)
    c, h = grid.center, grid.h
    right = integrate.cumulative_simpson(u[c:], dx=h, initial=0.0)
    left = integrate.cumulative_simpson(u[c::-1], dx=-h, initial=0.0)
    return np.concatenate([left[:0:-1], right])


def difference(w_ext: np.ndarray, grid: Grid, order: int, stencil: str) -> np.ndarray:
    offsets, weights = STENCILS[stencil][order]
    N, g = grid.N, GHOSTS
    out = np.zeros(N)
    for off, wt in zip(offsets, weights):
        out += wt * w_ext[g + off: g + off + N]
    return out / grid.h ** order


@dataclass
class Profile:
    """Momentum potential ``v = vhat_t + w`` on the grid at time ``t``.

    ``w`` is the stored state; ``v`` and its finite-difference derivatives are
    derived on demand.  Derivatives combine the analytic reference
    derivatives with central differences of ``w`` whose ghost values follow
    ``boundary``.  When the slope ``u = w'`` is supplied it is used instead,
    so the second and third derivatives are first and second differences of ``u``.
    """

    grid: Grid
    params: SurfaceParams
    t: float
    w: np.ndarray
    stencil: str = "central4"
    boundary: str = "exponential"
    u: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_values(cls, grid, params, t, v, **kwargs):
        vhat, _, _ = reference_potential(params, t, grid.nodes)
        return cls(grid=grid, params=params, t=float(t), w=np.asarray(v, float) - vhat, **kwargs)

    @classmethod
    def from_slope(cls, grid, params, t, u, **kwargs):
        """Profile with slope ``u``, integrated and pinned so that ``v(0) = 0``."""
        u = np.asarray(u, dtype=float)
        return cls(grid=grid, params=params, t=float(t), w=integrate_slope(u, grid), u=u,
                   **kwargs).normalized()

    @property
    def rho(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def v(self) -> np.ndarray:
        if "v" not in self._cache:
            vhat, _, _ = reference_potential(self.params, self.t, self.rho)
            self._cache["v"] = vhat + self.w
        return self._cache["v"]

    @property
    def class_ab(self):
        a_t, b_t = class_at(self.params, float(self.t))
        return float(a_t), float(b_t)

    def _derivs(self):
        if "d" not in self._cache:
            r1, r2, r3 = reference_derivatives(self.params, self.t, self.rho)
            if self.u is not None:
                u_ext = extend(self.u, self.grid, self.boundary, slope=True)
                self._cache["d"] = (
                    r1 + self.u,
                    r2 + difference(u_ext, self.grid, 1, self.stencil),
                    r3 + difference(u_ext, self.grid, 2, self.stencil),
                )
                return self._cache["d"]
            w_ext = extend(self.w, self.grid, self.boundary)
            self._cache["d"] = (
                r1 + difference(w_ext, self.grid, 1, self.stencil),
                r2 + difference(w_ext, self.grid, 2, self.stencil),
                r3 + difference(w_ext, self.grid, 3, self.stencil),
            )
        return self._cache["d"]

    @property
    def d1(self) -> np.ndarray:
        return self._derivs()[0]

    @property
    def slope(self) -> np.ndarray:
        """``u = w'``, stored or differenced from ``w``."""
        if self.u is not None:
            return self.u
        _, r1, _ = reference_potential(self.params, self.t, self.rho)
        return self.d1 - r1

    @property
    def d2(self) -> np.ndarray:
        return self._derivs()[1]

    @property
    def d3(self) -> np.ndarray:
        return self._derivs()[2]

    def is_positive(self) -> bool:
        return bool(np.all(self.d1 > 0) and np.all(self.d2 > 0))

    def check_positive(self):
        bad1 = np.flatnonzero(~(self.d1 > 0))
        bad2 = np.flatnonzero(~(self.d2 > 0))
        if bad1.size or bad2.size:
            idx = bad2[0] if bad2.size else bad1[0]
            raise PositivityViolation(
                f"discrete v'/v'' not positive at {bad1.size + bad2.size} node(s), "
                f"first at rho={self.rho[idx]:.6g} (t={self.t:.6g})")

    def normalized(self) -> "Profile":
        """Copy with the constant shifted so that ``v(0) = 0``."""
        c = self.v[self.grid.center]
        return Profile(self.grid, self.params, self.t, self.w - c,
                       stencil=self.stencil, boundary=self.boundary, u=self.u)


def initial_profile(p: SurfaceParams, reg: Regularization, grid: Grid,
                    stencil: str = "central4", boundary: str = "exponential") -> Profile:
    """Regularized conical starting potential ``vhat + delta chi(|sigma|^2 + eps^2)``.

    Normalized so ``v(0) = 0``; raises :class:`PositivityViolation` if ``delta``
    is too large for the discrete Kähler condition.
    """
    rho = grid.nodes
    if reg.delta > 0:
        bump = reg.delta * chi_profile(rho, reg.epsilon, float(p.alpha))
        slope = reg.delta * chi_profile_slope(rho, reg.epsilon, float(p.alpha))
    else:
        bump = np.zeros_like(rho)
        slope = np.zeros_like(rho)
    prof = Profile(grid, p, 0.0, bump, stencil=stencil, boundary=boundary, u=slope).normalized()
    prof.check_positive()
    return prof
