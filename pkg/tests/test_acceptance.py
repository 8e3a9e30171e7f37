"""Acceptance suite: one test per criterion (sub-criteria split out).

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with a
PASS/FAIL table.  Fixed tolerances are the published ones and are never
loosened; runs that fall short are left failing.
"""

import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate

from conekrf import gh
from conekrf.cohomology import (Regime, SurfaceParams, class_at, classify_regime, limit_lambda,
                                singularity_time, threshold)
from conekrf.monitor import (check_lemma51, check_lemma52_H, check_lemma61, check_Q_monitor,
                             check_v2_rate, check_volume_form_bound, mass_conservation)
from conekrf.profile import Grid, Profile, Regularization, chi, initial_profile
from conekrf.solver import SolverConfig, Termination, consistency_check_eq5, run
from conekrf.surfaces import (ConeComponent, ContractionType, ContradictionWitness, SchemaError,
                              SurfaceData, bundled_surface, classify_contraction, parse_surface)
from conekrf.cohomology import class_state

from conftest import ACCEPT_GRID, ACCEPT_REG, COLLAPSING, CONTRACTING

criterion = pytest.mark.criterion
RUN_BUDGET = 300.0


def hirzebruch(k, a, b, alpha):
    gram = ((-k, 0, 1), (0, k, 1), (1, 1, 0))
    ambient = (F(a) * k, F(b) * k, F(b) - F(a))
    cone = (ConeComponent(1 - F(alpha), curve=0),)
    return SurfaceData(("D0", "Dinf", "F"), gram, (k - 2, -k - 2, -2), cone, ambient)


# -- 1 --------------------------------------------------------------------------

ALPHAS = [F(j, 20) for j in range(1, 20)] + [F(1, 3)]


def direct_regime(k, a, b, alpha):
    tau = F(2, k) - (1 + F(2, k)) * a / b
    if 0 < alpha < min(tau, 1):
        return Regime.CONTRACTING
    if max(tau, 0) < alpha < 1:
        return Regime.COLLAPSING
    if 0 < alpha == tau:
        return Regime.LOGFANO
    raise AssertionError("no regime")


@criterion("1", "regime classification agrees with the three inequalities on a 20^3 rational grid, k=1..4, < 1 s")
def test_1_regime_sweep():
    t0 = time.perf_counter()
    n = agree = 0
    seen = set()
    for k in range(1, 5):
        for a in range(1, 21):
            for b in range(1, 21):
                if b <= a:
                    continue
                for alpha in ALPHAS:
                    r = classify_regime(SurfaceParams(k, a, b, alpha))
                    seen.add(r)
                    n += 1
                    agree += r is direct_regime(k, F(a), F(b), alpha)
    elapsed = time.perf_counter() - t0
    assert seen == set(Regime)
    assert agree == n
    assert elapsed < 1.0


# -- 2 --------------------------------------------------------------------------

@criterion("2", "lambda = k a_T for 10^4 random collapsing sets; contracting T = predicted_time(D0); < 1 s")
def test_2_singularity_identities():
    t0 = time.perf_counter()
    rng = random.Random(20240607)
    hits = 0
    while hits < 10_000:
        k = rng.randint(1, 6)
        a = F(rng.randint(1, 60), rng.randint(1, 12))
        b = a + F(rng.randint(1, 60), rng.randint(1, 12))
        alpha = F(rng.randint(1, 99), 100)
        p = SurfaceParams(k, a, b, alpha)
        if classify_regime(p) is not Regime.COLLAPSING:
            continue
        a_T, _ = class_at(p, singularity_time(p))
        assert limit_lambda(p) == k * a_T
        hits += 1
    assert classify_contraction("D0", bundled_surface("hirzebruch_k2")).predicted_time == \
        singularity_time(CONTRACTING)
    for k, a, b, alpha in [(1, 1, 4, F(1, 2)), (3, 2, 9, F(1, 5)), (4, 1, 7, F(1, 10))]:
        p = SurfaceParams(k, a, b, alpha)
        assert classify_contraction("D0", hirzebruch(k, a, b, alpha)).predicted_time == \
            singularity_time(p)
    assert time.perf_counter() - t0 < 1.0


# -- 3 --------------------------------------------------------------------------

@criterion("3", "contracting run reaches 0.99 T within 5 min")
def test_3_contracting_run(contracting_run):
    tr = contracting_run
    assert tr.terminated_reason is Termination.REACHED_STOP_TIME
    assert tr.snapshots[-1].t == pytest.approx(0.99 * 4 / 3, rel=1e-12)
    assert tr.wall_time <= RUN_BUDGET


@criterion("3a", "contracting: |mass error| <= 1e-3 (b-a) at every snapshot")
def test_3a_mass(contracting_run):
    worst = max(abs(s.report.diagnostics["mass_error"]) for s in contracting_run.snapshots)
    assert worst <= 1e-3 * 3


@criterion("3b", "contracting: slope-decay and H checks pass at every snapshot")
def test_3b_slope_decay_and_H(contracting_run):
    bad = [(s.t, c.name, c.observed, c.bound) for s in contracting_run.snapshots
           for c in s.report.checks if c.name in ("slope_decay", "H_bound") and not c.passed]
    assert not bad, f"{len(bad)} failing, first {bad[0]}"


@criterion("3c", "contracting: zero-section volume extrapolates to 0 within 1% of T = 4/3")
def test_3c_zero_section(contracting_run):
    series = [(s.t, 2 * math.pi * 2 * float(s.profile.d1[0])) for s in contracting_run.snapshots]
    e = gh.extrapolate_to_T(series, gh.Model.LINEAR, 4 / 3)
    assert abs(e.root / (4 / 3) - 1) <= 0.01


@criterion("3d", "contracting: W_delta log-log slope at the final snapshot in [0.2, 0.3]")
def test_3d_wdelta_slope(contracting_run):
    last = contracting_run.snapshots[-1].profile
    deltas = [1e-1, 1e-2, 1e-3, 1e-4]
    W = [gh.wdelta_diameter(last, d, 2) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(W), 1)[0]
    assert 0.2 <= slope <= 0.3, f"slope {slope:.4f}"


# -- 4 --------------------------------------------------------------------------

@criterion("4", "collapsing run reaches 0.99 T within 5 min")
def test_4_collapsing_run(collapsing_run):
    tr = collapsing_run
    assert tr.terminated_reason is Termination.REACHED_STOP_TIME
    assert tr.snapshots[-1].t == pytest.approx(0.99 * 12 / 7, rel=1e-12)
    assert tr.wall_time <= RUN_BUDGET


@criterion("4a", "collapsing: slope band, potential drift, v'' envelope, v'''/v'' checks pass throughout")
def test_4a_collapse_checks(collapsing_run):
    names = ("slope_band", "potential_drift", "v2_envelope", "v3_ratio")
    bad = [(s.t, n) for s in collapsing_run.snapshots for n in names if not s.report[n].passed]
    assert not bad
    series = [s.report.diagnostics["potential_drift"] for s in collapsing_run.snapshots]
    assert series[-1] < 0.1 * series[0]


@criterion("4b", "collapsing: sup v''/(T-t) below the frozen C times 1.05")
def test_4b_v2_rate(collapsing_run):
    C = collapsing_run.monitor.constants["C_rate"]
    T = 12 / 7
    worst = max(float(np.max(s.profile.d2)) / (T - s.t) for s in collapsing_run.snapshots)
    assert worst <= 1.05 * C


@criterion("4c", "collapsing: fiber length power-law exponent in [0.4, 0.6]")
def test_4c_fiber_exponent(collapsing_run):
    series = [(s.t, gh.fiber_radial_length(s.profile)) for s in collapsing_run.snapshots]
    e = gh.extrapolate_to_T(series, gh.Model.POWER_LAW, 12 / 7)
    assert 0.4 <= e.exponent <= 0.6, f"exponent {e.exponent:.4f}"


@criterion("4d", "collapsing: base diameter at stop within 2% of pi sqrt(lambda/2), lambda = 8/7")
def test_4d_base_diameter(collapsing_run):
    lam = limit_lambda(COLLAPSING)
    assert lam == F(8, 7)
    got = gh.base_diameter_proxy(collapsing_run.snapshots[-1].profile, 2)
    target = math.pi * math.sqrt(float(lam) / 2)
    assert abs(got / target - 1) <= 0.02, f"{got:.5f} vs {target:.5f}"


@criterion("4e", "collapsing: mass = (1+alpha)(T-t) within 1e-3 (b-a) at every snapshot")
def test_4e_mass(collapsing_run):
    h = ACCEPT_GRID.h
    worst = 0.0
    for s in collapsing_run.snapshots:
        mass = integrate.trapezoid(s.profile.d2, dx=h)
        worst = max(worst, abs(mass - 1.75 * (12 / 7 - s.t)))
    assert worst <= 1e-3 * 3


# -- 5 --------------------------------------------------------------------------

@criterion("5", "epsilon sequence 1e-2, 5e-3, 2.5e-3: sup |v'_eps - v'_eps/2| at 0.5 T shrinks; < 15 min")
def test_5_epsilon_convergence():
    t0 = time.perf_counter()
    sel = np.abs(ACCEPT_GRID.nodes) <= 5
    for p in (CONTRACTING, COLLAPSING):
        T = float(singularity_time(p))
        v1 = {}
        for eps in (1e-2, 5e-3, 2.5e-3):
            cfg = SolverConfig(stop_time=0.5 * T, snapshot_times=[0.5 * T], monitor=False)
            tr = run(p, Regularization(eps, 1e-2), ACCEPT_GRID, cfg)
            assert tr.terminated_reason is Termination.REACHED_STOP_TIME
            v1[eps] = tr.snapshots[-1].profile.d1
        d1 = np.max(np.abs(v1[1e-2] - v1[5e-3])[sel])
        d2 = np.max(np.abs(v1[5e-3] - v1[2.5e-3])[sel])
        assert d2 / d1 < 1.0
    assert time.perf_counter() - t0 < 900


# -- 6 --------------------------------------------------------------------------

@criterion("6", "consistency residual drops by >= 1.8 when h and dt are halved (central2)")
def test_6_scheme_order():
    for p in (CONTRACTING, COLLAPSING):
        T = float(singularity_time(p))
        res = []
        for N, n in [(1025, 41), (2049, 81)]:
            cfg = SolverConfig(derivative_stencil="central2", stop_time=0.5 * T, n_snapshots=n,
                               monitor=False)
            tr = run(p, ACCEPT_REG, Grid(15.0, N), cfg)
            res.append(consistency_check_eq5(tr, (-5.0, 5.0), (0.1 * T, 0.5 * T)))
        assert res[0] / res[1] >= 1.8


# -- 7 --------------------------------------------------------------------------

@criterion("7", "oracles: fiber on vhat 1e-6, orbifold distance 1e-10, chi vs 10^7-panel sum 1e-8")
def test_7_oracles(chi_oracle):
    ref = initial_profile(CONTRACTING, Regularization(1e-2, 0.0), ACCEPT_GRID)
    assert gh.fiber_radial_length(ref) == pytest.approx(math.pi * math.sqrt(1.5), rel=1e-6)
    for alpha, k in [(0.25, 2), (0.5, 1), (0.1, 3), (0.9, 2), (0.3, 4)]:
        for delta in (1e-4, 1e-2, 0.3):
            e = (alpha * k - 2) / 2
            val, _ = integrate.quad(lambda r: float(k), 0.0, delta, weight="alg", wvar=(e, 0.0),
                                    epsabs=0.0, epsrel=1e-13)
            assert gh.orbifold_model_distance(delta, alpha, k) == pytest.approx(val, rel=1e-10)
    assert len(chi_oracle["points"]) == 20
    for pt in chi_oracle["points"]:
        assert chi(pt["s"], pt["epsilon"], pt["alpha"]) == pytest.approx(pt["chi"], rel=1e-8)


# -- 8 --------------------------------------------------------------------------

def _corrupt(prof, extra):
    return Profile.from_slope(prof.grid, prof.params, prof.t, prof.slope + extra)


@criterion("8", "falsifiability: every corruption fixture is detected")
def test_8_falsifiability(contracting_run, collapsing_run):
    rho = ACCEPT_GRID.nodes
    bump = lambda c, amp=1.0, w=0.5: amp * np.exp(-((rho - c) / w) ** 2)
    wiggle = 1e-3 * np.sin(40 * rho) * np.exp(-rho ** 2)
    detected = {}

    s = contracting_run.snapshots[50]
    cs = class_state(CONTRACTING, s.t)
    c = contracting_run.monitor.constants
    assert check_lemma51(s.profile, cs, c["C51"]).passed
    detected["lemma51, v' + 1 near rho = -10"] = not check_lemma51(
        _corrupt(s.profile, bump(-10.0)), cs, c["C51"]).passed
    detected["H, v'' spike"] = not check_lemma52_H(
        _corrupt(s.profile, bump(-3.0, 0.05, 0.05)), cs, c["H0"])[1].passed
    detected["volume form, v'' bump at rho = -10"] = not check_volume_form_bound(
        _corrupt(s.profile, bump(-10.0, 0.5, 0.3)), c["C_vf"]).passed
    detected["mass, v' offset on the right"] = not mass_conservation(
        _corrupt(s.profile, 0.01 * (np.tanh(rho) + 1)), cs).passed

    s = collapsing_run.snapshots[60]
    cs = class_state(COLLAPSING, s.t)
    c = collapsing_run.monitor.constants
    assert all(ch.passed for ch in check_lemma61(s.profile, cs, c))
    fails = {ch.name for ch in check_lemma61(_corrupt(s.profile, wiggle), cs, c) if not ch.passed}
    detected["v3 ratio, oscillation"] = "v3_ratio" in fails
    fails = {ch.name for ch in check_lemma61(_corrupt(s.profile, bump(0.0, 0.5, 2.0)), cs, c)
             if not ch.passed}
    detected["slope band excursion"] = "slope_band" in fails
    detected["v'' rate, central spike"] = not check_v2_rate(
        _corrupt(s.profile, bump(0.0, 0.2, 0.1)), cs, c["C_rate"]).passed
    _, qc = check_Q_monitor(_corrupt(s.profile, wiggle), ACCEPT_REG, (c["Q0_min"], c["Q0_max"]))
    detected["Q monitor, oscillation"] = not all(ch.passed for ch in qc)

    try:
        parse_surface({"curves": ["A", "B"], "gram": [[-1, 1], [0, -1]], "canonical": [-1, -1],
                       "ambient_class": [1, 1]})
        detected["asymmetric gram"] = False
    except SchemaError:
        detected["asymmetric gram"] = True
    witness = SurfaceData(("E",), ((-1,),), (1,), (ConeComponent(F(1, 2), pairing=(-4,)),), (F(1),))
    try:
        classify_contraction("E", witness)
        detected["p_a = 1 witness"] = False
    except ContradictionWitness:
        detected["p_a = 1 witness"] = True
    missed = [k for k, v in detected.items() if not v]
    assert not missed, missed


# -- 9 --------------------------------------------------------------------------

@criterion("9", "classifier: Hirzebruch D0 TypeII with threshold 2/k; k=1 alpha->1 limit is 3a < b")
def test_9_classifier():
    v = classify_contraction("D0", bundled_surface("hirzebruch_k2"))
    assert v.type is ContractionType.TYPE_II and v.angle_threshold == 1
    for k in range(1, 5):
        v = classify_contraction("D0", hirzebruch(k, 1, 4, F(1, 10)))
        assert v.type is ContractionType.TYPE_II and v.angle_threshold == F(2, k)
    near_one = F(999_999, 1_000_000)
    for a in range(1, 31):
        for b in range(a + 1, 91):
            p = SurfaceParams(1, a, b, near_one)
            # alpha = 1 in the contracting condition alpha < min(tau, 1)
            assert (1 < threshold(p)) == (3 * a < b)
            if 3 * a != b:
                assert (classify_regime(p) is Regime.CONTRACTING) == (3 * a < b)
