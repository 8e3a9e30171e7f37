"""Which curves can a conical flow contract?  Intersection numbers only.

Runs the classifier on the two bundled surfaces and then on the fibers-as-
cone-divisor family, where the cone breaks the symmetry the PDE relies on
and only the class arithmetic is available.
"""

from fractions import Fraction

from conekrf.surfaces import (bundled_surface, classify_contraction, conjecture_91_arithmetic,
                              hodge_matrix, proposition_71_check)

for name in ("hirzebruch_k2", "p2_blowup"):
    data = bundled_surface(name)
    print(name)
    for curve in data.curves:
        v = classify_contraction(curve, data)
        extra = f", alpha < {v.angle_threshold}" if v.angle_threshold is not None else ""
        print(f"  {curve:5s} {v.type.value:16s} g={v.genus} T={v.predicted_time}{extra}")
    print("  disjoint pairs:", [(data.curves[i], data.curves[j])
                                for i, row in enumerate(hodge_matrix(data))
                                for j, ok in enumerate(row) if ok and i < j])

pv = proposition_71_check("D0", bundled_surface("hirzebruch_k2"))
print(f"\nD0: arithmetic genus {pv.arithmetic_genus}, forced by {pv.case.value}")

print("\nfibers as cone divisor, a=1, beta=1/2")
for k, b in [(1, 10), (1, 5), (1, 3), (2, 10)]:
    r = conjecture_91_arithmetic(k, 1, b, [Fraction(1, 2)])
    print(f"  k={k} b={b}: case ({r.case}) T={r.T}  a_t rate {r.a_rate}, b_t rate {r.b_rate}")
