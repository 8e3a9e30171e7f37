"""Which way does the flow degenerate?  Pure class arithmetic, no PDE.

For the degree-2 Hirzebruch surface with initial class 2 pi (4 D_inf - D_0)
we sweep the cone angle and watch the regime switch at the threshold
alpha = 2/k - (1 + 2/k) a/b = 1/2.
"""

from fractions import Fraction

from conekrf.cohomology import (Curve, Regime, SurfaceParams, class_at, classify_regime,
                                curve_volume, limit_lambda, logfano_time_alternative,
                                singularity_time, threshold)

k, a, b = 2, 1, 4
print(f"threshold for k={k}, a={a}, b={b}: {threshold(SurfaceParams(k, a, b, '1/2'))}")
print()
print(f"{'alpha':>6} {'regime':>12} {'T':>7} {'a_T':>6} {'b_T':>6}  note")
for alpha in ["1/8", "1/4", "3/8", "1/2", "5/8", "3/4", "7/8"]:
    p = SurfaceParams(k, a, b, alpha)
    T = singularity_time(p)
    a_T, b_T = class_at(p, T)
    reg = classify_regime(p)
    if reg is Regime.COLLAPSING:
        note = f"base sphere scale lambda = {limit_lambda(p)}"
    elif reg is Regime.CONTRACTING:
        note = f"D0 area at T: {curve_volume(p, T, Curve.ZERO_SECTION):.3g}"
    else:
        note = f"both roots meet; printed closed form would say {logfano_time_alternative(p)}"
    print(f"{alpha:>6} {reg.value:>12} {str(T):>7} {str(a_T):>6} {str(b_T):>6}  {note}")

# smooth limit for k = 1: the zero section contracts iff 3a < b
print()
for a, b in [(1, 2), (1, 3), (1, 4)]:
    tau = threshold(SurfaceParams(1, a, b, Fraction(1, 2)))
    print(f"k=1 a={a} b={b}: threshold {tau}, contracts as alpha -> 1: {tau > 1}")
