"""Intersection-theoretic classification of curves contracted by the conical flow.

A surface is described only by intersection numbers: the Gram matrix of the
candidate curves, their canonical degrees ``K.E``, the cone divisor
``D = sum beta_i D_i`` (components are either listed curves or external
classes given by their pairings with the curves) and the pairings of the
initial class with the curves, in units of ``2 pi``.

All arithmetic is exact (:class:`fractions.Fraction`).  Verdicts are
predictions of which curves the flow can contract, not theorems.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Optional

from .cohomology import as_fraction

log = logging.getLogger(__name__)

__all__ = [
    "ContractionType",
    "SchemaError",
    "NonIntegralGenus",
    "ContradictionWitness",
    "ConeComponent",
    "SurfaceData",
    "ContractionVerdict",
    "Prop71Verdict",
    "FiberConeReport",
    "load_surface",
    "parse_surface",
    "bundled_surface",
    "adjunction_genus",
    "classify_contraction",
    "hodge_disjointness",
    "hodge_matrix",
    "proposition_71_check",
    "conjecture_91_arithmetic",
    "verdict_to_json",
]


class ContractionType(str, enum.Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"
    NOT_CONTRACTIBLE = "NotContractible"


class SchemaError(ValueError):
    """Malformed surface description; the message names the offending field."""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path, self.line = path, line
        where = f"{path}" + (f" (line {line})" if line is not None else "")
        super().__init__(f"{where}: {message}")


class NonIntegralGenus(ValueError):
    """``(K.E + E^2 + 2)/2`` is not a nonnegative integer."""


class ContradictionWitness(ValueError):
    """Intersection data that passes the contraction hypotheses yet violates
    the conclusions forced by them; such data cannot come from a surface."""

    def __init__(self, curve: str, reason: str, numbers: dict):
        self.curve, self.reason, self.numbers = curve, reason, numbers
        nums = ", ".join(f"{k}={v}" for k, v in numbers.items())
        super().__init__(f"{curve}: {reason} ({nums})")


@dataclass(frozen=True)
class ConeComponent:
    """``beta * C`` with C either a listed curve (``curve`` index) or an
    external class given by its pairings with every listed curve."""

    beta: Fraction
    curve: Optional[int] = None
    pairing: Optional[tuple] = None
    name: str = ""


@dataclass(frozen=True)
class SurfaceData:
    curves: tuple
    gram: tuple
    canonical: tuple
    cone: tuple
    ambient_class: tuple

    def __post_init__(self):
        n = len(self.curves)
        if len(set(self.curves)) != n:
            raise SchemaError("curves", "curve names must be unique")
        if len(self.gram) != n or any(len(row) != n for row in self.gram):
            raise SchemaError("gram", f"must be a {n}x{n} matrix")
        for i in range(n):
            for j in range(i + 1, n):
                if self.gram[i][j] != self.gram[j][i]:
                    raise SchemaError(f"gram[{i}][{j}]",
                                      f"not symmetric: {self.gram[i][j]} != gram[{j}][{i}]={self.gram[j][i]}")
        if len(self.canonical) != n:
            raise SchemaError("canonical", f"needs {n} entries")
        if len(self.ambient_class) != n:
            raise SchemaError("ambient_class", f"needs {n} entries")
        for i, c in enumerate(self.ambient_class):
            if not c > 0:
                raise SchemaError(f"ambient_class[{i}]", f"initial class must be positive on every curve, got {c}")
        seen = set()
        for m, comp in enumerate(self.cone):
            if not 0 < comp.beta < 1:
                raise SchemaError(f"cone[{m}].beta", f"must lie in (0, 1), got {comp.beta}")
            if (comp.curve is None) == (comp.pairing is None):
                raise SchemaError(f"cone[{m}]", "give exactly one of 'curve' or 'pairing'")
            if comp.curve is not None:
                if not 0 <= comp.curve < n:
                    raise SchemaError(f"cone[{m}].curve", f"index {comp.curve} out of range")
                if comp.curve in seen:
                    raise SchemaError(f"cone[{m}].curve", "curve listed twice in the cone divisor")
                seen.add(comp.curve)
            elif len(comp.pairing) != n:
                raise SchemaError(f"cone[{m}].pairing", f"needs {n} entries")

    def index(self, E) -> int:
        if isinstance(E, int) and not isinstance(E, bool):
            if not 0 <= E < len(self.curves):
                raise KeyError(E)
            return E
        try:
            return self.curves.index(E)
        except ValueError:
            raise KeyError(E) from None

    def self_intersection(self, i) -> Fraction:
        return Fraction(self.gram[i][i])

    def cone_pairing(self, i, exclude: Optional[int] = None) -> Fraction:
        """``D . E_i``, optionally with the component ``exclude`` removed."""
        total = Fraction(0)
        for comp in self.cone:
            if comp.curve is not None:
                if comp.curve == exclude:
                    continue
                total += comp.beta * self.gram[comp.curve][i]
            else:
                total += comp.beta * comp.pairing[i]
        return total

    def cone_coefficient(self, i) -> Optional[Fraction]:
        for comp in self.cone:
            if comp.curve == i:
                return comp.beta
        return None

    def log_canonical_pairing(self, i) -> Fraction:
        """``(K_X + D) . E_i``."""
        return Fraction(self.canonical[i]) + self.cone_pairing(i)


# -- parsing -------------------------------------------------------------------

def _int(x, path):
    if isinstance(x, bool) or not isinstance(x, int):
        if isinstance(x, float) and x.is_integer():
            return int(x)
        raise SchemaError(path, f"expected an integer, got {x!r}")
    return x


def _rational(x, path):
    if isinstance(x, bool):
        raise SchemaError(path, f"expected a rational number, got {x!r}")
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise SchemaError(path, f"expected a rational number, got {x!r}") from exc


def _list(obj, key, path=None):
    path = path or key
    if key not in obj:
        raise SchemaError(path, "missing field")
    val = obj[key]
    if not isinstance(val, list):
        raise SchemaError(path, f"expected a list, got {type(val).__name__}")
    return val


def parse_surface(obj) -> SurfaceData:
    """Build :class:`SurfaceData` from the decoded JSON object."""
    if not isinstance(obj, dict):
        raise SchemaError("$", "top level must be an object")
    curves = _list(obj, "curves")
    for i, c in enumerate(curves):
        if not isinstance(c, str) or not c:
            raise SchemaError(f"curves[{i}]", "curve names must be nonempty strings")
    gram_raw = _list(obj, "gram")
    gram = []
    for i, row in enumerate(gram_raw):
        if not isinstance(row, list):
            raise SchemaError(f"gram[{i}]", "rows must be lists")
        gram.append(tuple(_int(x, f"gram[{i}][{j}]") for j, x in enumerate(row)))
    canonical = tuple(_int(x, f"canonical[{i}]") for i, x in enumerate(_list(obj, "canonical")))
    ambient = tuple(_rational(x, f"ambient_class[{i}]")
                    for i, x in enumerate(_list(obj, "ambient_class")))
    cone = []
    for m, entry in enumerate(obj.get("cone", [])):
        path = f"cone[{m}]"
        if not isinstance(entry, dict):
            raise SchemaError(path, "entries must be objects")
        if "beta" not in entry:
            raise SchemaError(f"{path}.beta", "missing field")
        beta = _rational(entry["beta"], f"{path}.beta")
        if "curve" in entry:
            ref = entry["curve"]
            if isinstance(ref, str):
                if ref not in curves:
                    raise SchemaError(f"{path}.curve", f"unknown curve {ref!r}")
                ref = curves.index(ref)
            else:
                ref = _int(ref, f"{path}.curve")
            cone.append(ConeComponent(beta=beta, curve=ref, name=curves[ref] if 0 <= ref < len(curves) else ""))
        elif "pairing" in entry:
            pv = entry["pairing"]
            if not isinstance(pv, list):
                raise SchemaError(f"{path}.pairing", "expected a list")
            pairing = tuple(_rational(x, f"{path}.pairing[{j}]") for j, x in enumerate(pv))
            cone.append(ConeComponent(beta=beta, pairing=pairing, name=str(entry.get("name", ""))))
        else:
            raise SchemaError(path, "give one of 'curve' or 'pairing'")
    return SurfaceData(tuple(curves), tuple(gram), canonical, tuple(cone), ambient)


def load_surface(path) -> SurfaceData:
    """Read a surface description file; decoding errors report line and column."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    try:
        return parse_surface(obj)
    except SchemaError as exc:
        line = _locate(text, exc.path)
        if line is not None and exc.line is None:
            raise SchemaError(exc.path, str(exc).split(": ", 1)[1], line=line) from exc
        raise


def _locate(text: str, path: str) -> Optional[int]:
    # best effort: line of the first occurrence of the top-level key
    key = path.split("[", 1)[0].split(".", 1)[0]
    if key in ("", "$"):
        return None
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return n
    return None


def bundled_surface(name: str) -> SurfaceData:
    """One of the packaged descriptions, e.g. ``"hirzebruch_k2"``."""
    ref = resources.files("conekrf").joinpath("data").joinpath(f"{name}.json")
    with resources.as_file(ref) as p:
        return load_surface(p)


# -- classification ------------------------------------------------------------

def adjunction_genus(E, data: SurfaceData) -> int:
    """``g = (K.E + E^2 + 2)/2``."""
    i = data.index(E)
    twice = Fraction(data.canonical[i]) + data.self_intersection(i) + 2
    g = twice / 2
    if g.denominator != 1 or g < 0:
        raise NonIntegralGenus(
            f"{data.curves[i]}: (K.E + E^2 + 2)/2 = {g} is not a nonnegative integer")
    return int(g)


@dataclass(frozen=True)
class ContractionVerdict:
    curve: str
    type: ContractionType
    genus: int
    angle_threshold: Optional[Fraction] = None
    predicted_time: Optional[Fraction] = None


def _predicted_time(data: SurfaceData, i) -> Optional[Fraction]:
    # root of ([omega_0] + t (K + D)) . E
    kd = data.log_canonical_pairing(i)
    if kd == 0:
        return None
    t = -Fraction(data.ambient_class[i]) / kd
    return t if t > 0 else None


def classify_contraction(E, data: SurfaceData) -> ContractionVerdict:
    """Type of ``E`` under the trichotomy for contracted curves.

    ``E`` can be contracted only if ``(K + D).E < 0`` and ``E^2 <= -1``.  Then
    it is a component of D (TypeII, with threshold
    ``alpha < (2 - D'.E)/(-E^2)`` on its cone angle), disjoint from D (TypeI)
    or meets D without being a component (TypeIII).  Raises
    :class:`ContradictionWitness` when the data pass the hypotheses but
    violate what they force (only possible for infeasible data).
    """
    i = data.index(E)
    name = data.curves[i]
    g = adjunction_genus(i, data)
    E2 = data.self_intersection(i)
    kd = data.log_canonical_pairing(i)
    T = _predicted_time(data, i)
    if not kd < 0 or E2 >= 0:
        return ContractionVerdict(name, ContractionType.NOT_CONTRACTIBLE, g, None, T)
    beta = data.cone_coefficient(i)
    numbers = {"K.E": data.canonical[i], "E^2": E2, "D.E": data.cone_pairing(i)}
    if g != 0:
        raise ContradictionWitness(name, "(K+D).E < 0 and E^2 < 0 force genus 0", {**numbers, "g": g})
    if beta is not None:
        d_prime = data.cone_pairing(i, exclude=i)
        return ContractionVerdict(name, ContractionType.TYPE_II, g, (2 - d_prime) / (-E2), T)
    DE = data.cone_pairing(i)
    if DE == 0:
        if E2 != -1:
            raise ContradictionWitness(name, "a contracted curve disjoint from D must be a (-1)-curve", numbers)
        return ContractionVerdict(name, ContractionType.TYPE_I, g, None, T)
    if not (E2 == -1 and 0 <= DE < 1):
        raise ContradictionWitness(name, "a contracted curve meeting D needs E^2 = -1 and 0 <= D.E < 1", numbers)
    return ContractionVerdict(name, ContractionType.TYPE_III, g, None, T)


def hodge_disjointness(Ei, Ej, data: SurfaceData, T=None) -> bool:
    """Whether two curves contracted together are disjoint, ``E_i . E_j = 0``.

    If ``T`` is given, both curves must have ``([omega_0] + T(K + D)).E = 0``.
    A nonzero pairing makes ``(E_i + E_j)^2 >= 0``, against the Hodge index
    theorem, and is logged.
    """
    i, j = data.index(Ei), data.index(Ej)
    if i == j:
        raise ValueError("disjointness of a curve with itself is not defined")
    if T is not None:
        T = as_fraction(T)
        for m in (i, j):
            val = Fraction(data.ambient_class[m]) + T * data.log_canonical_pairing(m)
            if val != 0:
                raise ValueError(f"{data.curves[m]} is not contracted at T={T} (pairing {val})")
    disjoint = data.gram[i][j] == 0
    if not disjoint:
        log.warning("%s and %s meet (E_i.E_j = %s): contracting both contradicts the Hodge index "
                    "theorem since (E_i + E_j)^2 = %s", data.curves[i], data.curves[j], data.gram[i][j],
                    2 * data.gram[i][j] + data.gram[i][i] + data.gram[j][j])
    return disjoint


def hodge_matrix(data: SurfaceData) -> list:
    """Pairwise disjointness, ``None`` on the diagonal."""
    n = len(data.curves)
    return [[None if i == j else data.gram[i][j] == 0 for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class Prop71Verdict:
    curve: str
    arithmetic_genus: int
    case: Optional[ContractionType]
    hypotheses_hold: bool


def proposition_71_check(E, data: SurfaceData) -> Prop71Verdict:
    """Arithmetic genus of a contracted curve, which must vanish.

    Returns the case that forces ``p_a = 0``.  If the hypotheses fail the
    verdict has ``case = NotContractible``.  Raises
    :class:`ContradictionWitness` for ``p_a > 0`` under the hypotheses.
    """
    i = data.index(E)
    name = data.curves[i]
    p_a = adjunction_genus(i, data)
    kd = data.log_canonical_pairing(i)
    E2 = data.self_intersection(i)
    if not kd < 0 or E2 >= 0:
        return Prop71Verdict(name, p_a, ContractionType.NOT_CONTRACTIBLE, False)
    if p_a > 0:
        raise ContradictionWitness(
            name, "p_a > 0 although (K+D).E < 0 and E^2 <= -1",
            {"K.E": data.canonical[i], "E^2": E2, "D.E": data.cone_pairing(i), "p_a": p_a})
    verdict = classify_contraction(i, data)
    return Prop71Verdict(name, p_a, verdict.type, True)


# -- fibers as cone divisor ----------------------------------------------------

@dataclass(frozen=True)
class FiberConeReport:
    k: int
    a: Fraction
    b: Fraction
    beta: Fraction
    case: str                  # "i", "ii" or "iii"
    a_rate: Fraction
    b_rate: Fraction
    T: Fraction
    contraction_time: Optional[Fraction]
    collapse_time: Fraction
    contracts: Optional[str]


def conjecture_91_arithmetic(k: int, a, b, betas) -> FiberConeReport:
    """Class evolution and predicted singularity when the cone divisor is a sum of fibers.

    With ``D = sum beta_i F_i`` and ``beta = sum beta_i`` the class
    ``2 pi (b_t D_inf - a_t D_0)`` moves with
    ``a_t = a - ((2 - beta)/k - 1) t`` and ``b_t = b - (1 + (2 - beta)/k) t``,
    so ``b_t - a_t = (b - a) - 2t``.
    """
    k = int(k)
    a, b = as_fraction(a), as_fraction(b)
    betas = [as_fraction(x) for x in betas]
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    if any(not 0 < x < 1 for x in betas):
        raise ValueError("each beta_i must lie in (0, 1)")
    beta = sum(betas, Fraction(0))
    a_rate = -(Fraction(2) - beta) / k + 1
    b_rate = -(1 + (Fraction(2) - beta) / k)
    collapse = (b - a) / 2
    contraction = a / (1 - beta) if (k == 1 and beta < 1) else None
    if k == 1 and beta < 1:
        lhs = 2 * a / (b - a)
        if lhs < 1 - beta:
            return FiberConeReport(k, a, b, beta, "i", a_rate, b_rate, contraction,
                                      contraction, collapse, "D0")
        if lhs == 1 - beta:
            return FiberConeReport(k, a, b, beta, "ii", a_rate, b_rate, contraction,
                                      contraction, collapse, None)
    return FiberConeReport(k, a, b, beta, "iii", a_rate, b_rate, collapse,
                              contraction, collapse, None)


# -- serialization ---------------------------------------------------------------

def _q(x):
    if x is None:
        return None
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def verdict_to_json(v: ContractionVerdict) -> dict:
    return {
        "curve": v.curve,
        "type": v.type.value,
        "genus": v.genus,
        "angle_threshold": _q(v.angle_threshold),
        "predicted_time": _q(v.predicted_time),
    }
