"""Falsifiable numerical versions of the a priori bounds along the flow.

Every bound of the form "there is a uniform C" is turned into a frozen
number: C is fitted once on the initial snapshot (1.1 times the observed
value) and every later snapshot must satisfy ``observed <= bound * 1.05``.
Refitting is never done, otherwise a check could not fail.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cohomology import ClassState, Regime, SurfaceParams, class_state, classify_regime
from .profile import Profile, Regularization, theta_and_logderivs

log = logging.getLogger(__name__)

__all__ = [
    "Check",
    "MonitorReport",
    "EstimatesMonitor",
    "SLACK",
    "FIT_FACTOR",
    "check_lemma51",
    "check_lemma52_H",
    "check_volume_form_bound",
    "check_lemma61",
    "check_v2_rate",
    "check_Q_monitor",
    "mass_conservation",
    "potential_drift_trend",
    "h_function",
]

SLACK = 0.05
FIT_FACTOR = 1.1
EDGE_TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    observed: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound - self.observed


def _upper(name, observed, bound, slack=SLACK) -> Check:
    observed, bound = float(observed), float(bound)
    ok = bool(np.isfinite(observed) and observed <= bound + slack * abs(bound))
    return Check(name, observed, bound, ok)


@dataclass
class MonitorReport:
    t: float
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.checks]


def _state(profile: Profile) -> ClassState:
    return class_state(profile.params, float(profile.t))


# -- contracting regime -------------------------------------------------------

def slope_decay_observed(profile: Profile, cs: ClassState) -> float:
    alpha = float(profile.params.alpha)
    return float(np.max((profile.d1 - float(cs.a_t)) * np.exp(-alpha * profile.rho / 2)))


def check_lemma51(profile: Profile, cs: ClassState, C51: float) -> Check:
    """``v' <= C e^{alpha rho/2} + a_t`` as ``max (v' - a_t) e^{-alpha rho/2} <= C``."""
    return _upper("slope_decay", slope_decay_observed(profile, cs), C51)


def h_function(profile: Profile, cs: ClassState):
    """``H = log(v'' / ((v' - a_t)(b_t - v')))`` on nodes away from the band edges.

    Returns ``(H, mask)``; nodes with v' within ``EDGE_TOL (b_t - a_t)`` of
    either edge are masked out.
    """
    a_t, b_t = float(cs.a_t), float(cs.b_t)
    lo = profile.d1 - a_t
    hi = b_t - profile.d1
    tol = EDGE_TOL * (b_t - a_t)
    mask = (lo > tol) & (hi > tol) & (profile.d2 > 0)
    H = np.full(profile.grid.N, np.nan)
    H[mask] = np.log(profile.d2[mask]) - np.log(lo[mask]) - np.log(hi[mask])
    return H, mask


def check_lemma52_H(profile: Profile, cs: ClassState, H0: float):
    H, mask = h_function(profile, cs)
    excluded = int(profile.grid.N - mask.sum())
    if excluded:
        log.debug("H monitor at t=%.4g: %d node(s) excluded at the band edges", profile.t, excluded)
    H_max = float(np.nanmax(H)) if mask.any() else float("nan")
    # additive bound; slack handled by the log 2 allowance
    return H_max, Check("H_bound", H_max, H0 + math.log(2.0),
                        bool(np.isfinite(H_max) and H_max <= H0 + math.log(2.0)))


def volume_form_observed(profile: Profile) -> float:
    alpha = float(profile.params.alpha)
    return float(np.max(profile.d1 * profile.d2 * np.exp(-alpha * profile.rho)))


def check_volume_form_bound(profile: Profile, C_vf: float) -> Check:
    """``v' v'' <= C e^{alpha rho}``: volume form against |sigma|^{-2(1-alpha)}."""
    return _upper("volume_form", volume_form_observed(profile), C_vf)


# -- collapsing regime --------------------------------------------------------

def _envelope(profile: Profile, cs: ClassState):
    alpha = float(profile.params.alpha)
    rho = profile.rho
    # e^{alpha rho} / (1 + e^rho)^{1+alpha}, in log form
    log_env = alpha * rho - (1 + alpha) * np.logaddexp(0.0, rho)
    return np.exp(log_env)


def collapse_observed(profile: Profile, cs: ClassState, window=(-5.0, 5.0)) -> dict:
    a_t = float(cs.a_t)
    T, t = float(cs.T), float(profile.t)
    p = profile.params
    a_T = float(p.a + p.a_rate * cs.T)
    sel = (profile.rho >= window[0]) & (profile.rho <= window[1])
    band = profile.d1 - a_t
    gap = max(T - t, 0.0)
    env = np.minimum(_envelope(profile, cs), gap) if gap > 0 else _envelope(profile, cs)
    return {
        "band_low": float(np.min(band)),
        "band_high": float(np.max(band)),
        "band_width": (1 + float(p.alpha)) * gap,
        "ii": float(np.max(np.abs(profile.v[sel] - a_T * profile.rho[sel]))),
        "iii": float(np.max(profile.d2 / env)),
        "iv": float(np.max(np.abs(profile.d3) / profile.d2)),
    }


def check_lemma61(profile: Profile, cs: ClassState, constants: dict, band_tol=1e-6):
    """Four checks: (i) v' band, (ii) v - a_T rho shrinking, (iii) v'' envelope, (iv) |v'''| <= C v''."""
    obs = collapse_observed(profile, cs)
    width = obs["band_width"]
    tol = band_tol + constants.get("boundary_residual", 0.0)
    band_ok = obs["band_low"] > -tol and obs["band_high"] < width + tol
    # observed/bound recorded as the worst excursion beyond the band
    excess = max(-obs["band_low"], obs["band_high"] - width)
    return [
        Check("slope_band", excess, tol, bool(band_ok)),
        _upper("potential_drift", obs["ii"], constants["ii0"]),
        _upper("v2_envelope", obs["iii"], constants["C_envelope"]),
        _upper("v3_ratio", obs["iv"], constants["C_v3_ratio"]),
    ]


def v2_rate_observed(profile: Profile, cs: ClassState) -> float:
    gap = float(cs.T) - float(profile.t)
    return float(np.max(profile.d2)) / gap


def check_v2_rate(profile: Profile, cs: ClassState, C: float) -> Check:
    """``sup v'' <= C (T - t)``."""
    return _upper("v2_rate", v2_rate_observed(profile, cs), C)


def q_values(profile: Profile, reg: Regularization) -> np.ndarray:
    _, lt1, _, _ = theta_and_logderivs(profile.rho, reg.epsilon)
    return profile.d3 / profile.d2 + (1 - float(profile.params.alpha)) * lt1


def check_Q_monitor(profile: Profile, reg: Regularization, q0: tuple, A: float = 2.0):
    """``Q = v'''/v'' + (1-alpha)(log theta)'`` stays in ``[min0 - 1, max0 + A t + 1]``.

    With psi = 0, ``|(log theta)'| <= 1`` so the drift constant is ``A = 2``.
    """
    q = q_values(profile, reg)
    q_max, q_min = float(np.max(q)), float(np.min(q))
    t = float(profile.t)
    hi = q0[1] + A * t + 1.0
    lo = q0[0] - 1.0
    return (q_max, q_min), [
        Check("Q_max", q_max, hi, bool(q_max <= hi)),
        Check("Q_min", -q_min, -lo, bool(q_min >= lo)),
    ]


# -- any regime ----------------------------------------------------------------

def trapezoid(y, h):
    return h * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def mass_error(profile: Profile, cs: ClassState) -> float:
    """``trapezoid(v'') - (b_t - a_t)`` over the grid."""
    return float(trapezoid(profile.d2, profile.grid.h) - (float(cs.b_t) - float(cs.a_t)))


def mass_conservation(profile: Profile, cs: ClassState) -> Check:
    """Integral of v'' against the class gap ``b_t - a_t``.

    Tolerance: the mass of ``vhat_t''`` beyond +-R plus ``10 h^2 (b - a)``.
    """
    p = profile.params
    R, h = profile.grid.R, profile.grid.h
    gap0 = float(p.b - p.a)
    gap = float(cs.b_t) - float(cs.a_t)
    tail = 2.0 * gap / (1.0 + math.exp(R))
    err = abs(mass_error(profile, cs))
    return _upper("mass", err, tail + 10 * h * h * gap0, slack=0.0)


def potential_drift_trend(series) -> bool:
    """Final ``sup |v - a_T rho|`` is below a tenth of the initial one."""
    series = list(series)
    return len(series) >= 2 and series[-1] < 0.1 * series[0]


class EstimatesMonitor:
    """Fits every constant on the initial profile and checks later snapshots against them."""

    def __init__(self, p: SurfaceParams, reg: Regularization, initial: Profile):
        self.params, self.reg = p, reg
        self.regime = classify_regime(p)
        cs = _state(initial)
        c = {}
        c["C_vf"] = FIT_FACTOR * volume_form_observed(initial)
        if self.regime is Regime.CONTRACTING:
            c["C51"] = FIT_FACTOR * slope_decay_observed(initial, cs)
            H, _ = h_function(initial, cs)
            c["H0"] = float(np.nanmax(H))
        if self.regime is Regime.COLLAPSING:
            obs = collapse_observed(initial, cs)
            c["ii0"] = obs["ii"]
            c["C_envelope"] = FIT_FACTOR * obs["iii"]
            c["C_v3_ratio"] = FIT_FACTOR * obs["iv"]
            c["C_rate"] = FIT_FACTOR * v2_rate_observed(initial, cs)
            q = q_values(initial, reg)
            c["Q0_min"], c["Q0_max"] = float(np.min(q)), float(np.max(q))
        self.constants = c

    def report(self, profile: Profile) -> MonitorReport:
        cs = _state(profile)
        c = self.constants
        rep = MonitorReport(t=float(profile.t), constants=dict(c))
        rep.checks.append(mass_conservation(profile, cs))
        rep.checks.append(check_volume_form_bound(profile, c["C_vf"]))
        H, _ = h_function(profile, cs)
        rep.diagnostics["H_max"] = float(np.nanmax(H)) if np.isfinite(H).any() else float("nan")
        # H tends to -log(b_t - a_t) in both tails; this removes the class drift
        rep.diagnostics["H_max_normalized"] = rep.diagnostics["H_max"] + math.log(
            float(cs.b_t) - float(cs.a_t))
        rep.diagnostics["mass_error"] = mass_error(profile, cs)
        rep.diagnostics["sup_v2"] = float(np.max(profile.d2))
        if self.regime is Regime.CONTRACTING:
            rep.checks.append(check_lemma51(profile, cs, c["C51"]))
            _, chk = check_lemma52_H(profile, cs, c["H0"])
            rep.checks.append(chk)
        elif self.regime is Regime.COLLAPSING:
            rep.checks.extend(check_lemma61(profile, cs, c))
            rep.checks.append(check_v2_rate(profile, cs, c["C_rate"]))
            (q_max, q_min), checks = check_Q_monitor(profile, self.reg, (c["Q0_min"], c["Q0_max"]))
            rep.checks.extend(checks)
            rep.diagnostics["Q_max"], rep.diagnostics["Q_min"] = q_max, q_min
            rep.diagnostics["potential_drift"] = rep["potential_drift"].observed
        return rep
