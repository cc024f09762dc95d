"""Exact symbolic functions on the null cone in C^{n+2}.

Homogeneous coordinates: zeta_0, and zeta' = (zeta_1, ..., zeta_{n+1}) with
zeta_j = zeta_0 z_j on the cone over the sphere.  A cone function is a finite
sum of terms

    c * zeta_0^s zetabar_0^s' * zeta'^alpha zetabar'^beta

with rational coefficient c and rational exponents s, s' (half-integers occur
for the conformally covariant weights).  The ambient Lorentz-Kaehler metric
has Hermitian signature (-, +, ..., +); its positive-convention Laplacian is

    Delta = 2 (d0 dbar0 - sum_j dj dbarj)

so that the induced operator on the sphere has positive spectrum.  Relative
to writing Delta as c_D * (-d0 dbar0 + sum_j dj dbarj), this fixes the
calibrated constant c_D = -2; the single calibration point is that the order
k = 1 operator acts on constants by n^2/4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .errors import HomogeneityViolationError
from .operators import OperatorSpec
from .polynomials import PolyDict

# key: (s, s', alpha, beta); exponents on zeta_0/zetabar_0 are Fractions,
# alpha/beta are integer tuples over zeta_1..zeta_{n+1}
ConeKey = Tuple[Fraction, Fraction, Tuple[int, ...], Tuple[int, ...]]
ConeDict = Dict[ConeKey, Fraction]

AMBIENT_LAPLACIAN_CD = -2  # in the convention Delta = c_D * (-d0 dbar0 + sum dj dbarj)


@dataclass
class ConePolynomial:
    """Finite sum of cone terms with exact rational coefficients."""

    nvars: int  # number of zeta' coordinates = n + 1
    terms: ConeDict = field(default_factory=dict)

    def copy(self) -> "ConePolynomial":
        return ConePolynomial(self.nvars, dict(self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def add_term(self, key: ConeKey, c: Fraction) -> None:
        c2 = self.terms.get(key, Fraction(0)) + c
        if c2:
            self.terms[key] = c2
        elif key in self.terms:
            del self.terms[key]

    def plus(self, other: "ConePolynomial") -> "ConePolynomial":
        out = self.copy()
        for key, c in other.terms.items():
            out.add_term(key, c)
        return out

    def scaled(self, c) -> "ConePolynomial":
        c = Fraction(c)
        if not c:
            return ConePolynomial(self.nvars)
        return ConePolynomial(self.nvars, {k: v * c for k, v in self.terms.items()})

    def times(self, other: "ConePolynomial") -> "ConePolynomial":
        out = ConePolynomial(self.nvars)
        for (s1, t1, a1, b1), c1 in self.terms.items():
            for (s2, t2, a2, b2), c2 in other.terms.items():
                key = (s1 + s2, t1 + t2,
                       tuple(x + y for x, y in zip(a1, a2)),
                       tuple(x + y for x, y in zip(b1, b2)))
                out.add_term(key, c1 * c2)
        return out

    def bidegrees(self) -> set:
        """Set of (holomorphic, antiholomorphic) homogeneities over all terms."""
        return {(s + sum(a), t + sum(b)) for (s, t, a, b) in self.terms}

    def dump(self) -> str:
        """Audit format: one term per line, exponents then numerator/denominator."""
        lines = []
        for (s, t, a, b) in sorted(self.terms, key=lambda k: (k[0], k[1], k[2], k[3])):
            c = self.terms[(s, t, a, b)]
            astr = ",".join(map(str, a))
            bstr = ",".join(map(str, b))
            lines.append(f"{s} {t} {astr} {bstr} {c.numerator}/{c.denominator}")
        return "\n".join(lines)


def cone_monomial(nvars: int, s, sp, alpha=None, beta=None, coeff=1) -> ConePolynomial:
    alpha = tuple(alpha) if alpha is not None else tuple(0 for _ in range(nvars))
    beta = tuple(beta) if beta is not None else tuple(0 for _ in range(nvars))
    return ConePolynomial(nvars, {(Fraction(s), Fraction(sp), alpha, beta): Fraction(coeff)})


def defining_polynomial(nvars: int) -> ConePolynomial:
    """rho = zeta_0 zetabar_0 - sum_j zeta_j zetabar_j, the cone's defining function."""
    out = cone_monomial(nvars, 1, 1)
    for j in range(nvars):
        e = tuple(1 if q == j else 0 for q in range(nvars))
        out.add_term((Fraction(0), Fraction(0), e, e), Fraction(-1))
    return out


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def _derivative(p: ConePolynomial, which: str, j: int = 0) -> ConePolynomial:
    """which in {'d0','dbar0','dj','dbarj'}; j indexes zeta' coordinates."""
    out = ConePolynomial(p.nvars)
    for (s, t, a, b), c in p.terms.items():
        if which == "d0":
            if s:
                out.add_term((s - 1, t, a, b), c * s)
        elif which == "dbar0":
            if t:
                out.add_term((s, t - 1, a, b), c * t)
        elif which == "dj":
            if a[j]:
                a2 = tuple(x - (1 if q == j else 0) for q, x in enumerate(a))
                out.add_term((s, t, a2, b), c * a[j])
        else:
            if b[j]:
                b2 = tuple(x - (1 if q == j else 0) for q, x in enumerate(b))
                out.add_term((s, t, a, b2), c * b[j])
    return out


def euler_degrees(p: ConePolynomial) -> Tuple[Fraction, Fraction]:
    """(w, w') with Z p = w p and Zbar p = w' p; raises if p is not homogeneous."""
    degs = p.bidegrees()
    if len(degs) > 1:
        raise HomogeneityViolationError(f"mixed homogeneities {degs}")
    return next(iter(degs)) if degs else (Fraction(0), Fraction(0))


def holomorphic_euler(p: ConePolynomial) -> ConePolynomial:
    """Z = sum_i zeta_i d/dzeta_i applied symbolically (term-wise degree factor)."""
    out = ConePolynomial(p.nvars)
    for (s, t, a, b), c in p.terms.items():
        f = s + sum(a)
        if f:
            out.add_term((s, t, a, b), c * f)
    return out


def antiholomorphic_euler(p: ConePolynomial) -> ConePolynomial:
    out = ConePolynomial(p.nvars)
    for (s, t, a, b), c in p.terms.items():
        f = t + sum(b)
        if f:
            out.add_term((s, t, a, b), c * f)
    return out


def ambient_laplacian(p: ConePolynomial) -> ConePolynomial:
    """Delta = 2 (d0 dbar0 - sum_j dj dbarj); maps bidegree (w,w') to (w-1,w'-1)."""
    out = _derivative(_derivative(p, "d0"), "dbar0")
    for j in range(p.nvars):
        out = out.plus(_derivative(_derivative(p, "dj", j), "dbarj", j).scaled(-1))
    return out.scaled(2)


# ---------------------------------------------------------------------------
# Lift / restrict and the operator family
# ---------------------------------------------------------------------------

def lift(poly: PolyDict, nvars: int, w, wp) -> ConePolynomial:
    """Extend a sphere polynomial to bidegree (w, w'): each monomial z^a zbar^b
    becomes zeta_0^(w-|a|) zetabar_0^(w'-|b|) zeta'^a zetabar'^b."""
    w = Fraction(w)
    wp = Fraction(wp)
    out = ConePolynomial(nvars)
    for (a, b), c in poly.items():
        out.add_term((w - sum(a), wp - sum(b), tuple(a), tuple(b)), Fraction(c))
    return out


def restrict_to_sphere(p: ConePolynomial) -> PolyDict:
    """Undo the lift: requires every term to have cancelling zeta_0 exponents.

    A term zeta_0^s zetabar_0^t zeta'^a zetabar'^b equals z^a zbar^b on the
    sphere section exactly when s + |a| = 0 and t + |b| = 0; anything else is
    a homogeneity bookkeeping failure.
    """
    out: PolyDict = {}
    for (s, t, a, b), c in p.terms.items():
        if s + sum(a) != 0 or t + sum(b) != 0:
            raise HomogeneityViolationError(
                f"term with exponents s={s}, s'={t}, |a|={sum(a)}, |b|={sum(b)} "
                "does not restrict to the sphere")
        out[(a, b)] = out.get((a, b), Fraction(0)) + c
    return {k: v for k, v in out.items() if v}


def gjms_ambient(spec: OperatorSpec, poly: PolyDict) -> PolyDict:
    """Apply the order-2k operator through the ambient construction, exactly.

    Lifts with weights (w, w'), applies (Delta/2)^k, multiplies by
    zeta_0^(k-w) zetabar_0^(k-w'), and restricts back to the sphere.
    """
    nvars = spec.n + 1
    f = lift(poly, nvars, spec.w, spec.wp)
    for _ in range(spec.k):
        f = ambient_laplacian(f).scaled(Fraction(1, 2))
    shifted = ConePolynomial(nvars)
    dw = Fraction(spec.k) - spec.w
    dwp = Fraction(spec.k) - spec.wp
    for (s, t, a, b), c in f.terms.items():
        shifted.add_term((s + dw, t + dwp, a, b), c)
    return restrict_to_sphere(shifted)


# ---------------------------------------------------------------------------
# Coordinate commutator identity on the cone
# ---------------------------------------------------------------------------

def _lie_x(p: ConePolynomial, j: int) -> ConePolynomial:
    """Derivation along X_j = zeta_0 grad(zeta_j) - zeta_j grad(zeta_0).

    With the signature (-,+,...,+) the metric gradients of the coordinate
    functions are grad(zeta_j) = d/dzetabar_j and grad(zeta_0) = -d/dzetabar_0,
    so X_j = zeta_0 d/dzetabar_j + zeta_j d/dzetabar_0.
    """
    t1 = cone_monomial(p.nvars, 1, 0).times(_derivative(p, "dbarj", j))
    e = tuple(1 if q == j else 0 for q in range(p.nvars))
    t2 = cone_monomial(p.nvars, 0, 0, alpha=e).times(_derivative(p, "dbar0"))
    return t1.plus(t2)


def verify_lemma_com(n: int, k: int, j: int, f: ConePolynomial,
                     wrong_factor: bool = False) -> ConePolynomial:
    """Residual of zeta_0 Delta^k (zeta_j f) - zeta_j Delta^k (zeta_0 f)
    + 2k X_j (Delta^(k-1) f); identically zero for every cone polynomial f.

    `wrong_factor` replaces 2k by 2k+1 as a negative control.
    """
    nvars = n + 1
    zj = cone_monomial(nvars, 0, 0,
                       alpha=tuple(1 if q == j else 0 for q in range(nvars)))
    z0 = cone_monomial(nvars, 1, 0)

    def delta_pow(p: ConePolynomial, m: int) -> ConePolynomial:
        for _ in range(m):
            p = ambient_laplacian(p)
        return p

    lhs = z0.times(delta_pow(zj.times(f), k)).plus(
        zj.times(delta_pow(z0.times(f), k)).scaled(-1))
    factor = 2 * k + (1 if wrong_factor else 0)
    rhs = _lie_x(delta_pow(f, k - 1), j).scaled(factor)
    return lhs.plus(rhs)
