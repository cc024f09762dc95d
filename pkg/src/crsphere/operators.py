"""Intrinsic operators on the CR sphere as diagonal multipliers on H_{j,l}.

The sub-Laplacian, Reeb derivative, the first-order-in-spectrum factors
L_mu = (1/2) Delta_b + (i/2) mu T + (1/4)(n-mu)(n+mu), and their products
P_{w,w'} all act diagonally on the bidegree spaces.  Closed forms used here:

    Delta_b  on H_{j,l}:  2jl + n(j+l)
    T        on H_{j,l}:  i (j - l)
    L_mu     on H_{j,l}:  (j + (n+mu)/2) (l + (n-mu)/2)

The Delta_b value is confirmed (exactly, in rational arithmetic) by an
independent oracle: the Rayleigh quotient of the Levi-form Dirichlet energy,
computed by symbolic differentiation and closed-form moments.  The Reeb sign
convention is REEB_SIGN = +1, i.e. T = i (sum z d/dz - sum zbar d/dzbar),
the Hopf field dual to the contact form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Tuple

import numpy as np

from .errors import OrderOutOfRangeError
from .harmonics import HarmonicBasis, HarmonicExpansion, multiply_by_conjugate_coordinate, multiply_by_coordinate
from .polynomials import (
    PolyDict,
    inner_product_exact,
    poly_add,
    poly_mul,
    poly_scale,
    total_volume,
    wirtinger_derivative,
)

# T = i * REEB_SIGN * (holomorphic Euler - antiholomorphic Euler); fixed by the
# requirement theta_0(T) = 1 and confirmed by the ambient cross-validation.
REEB_SIGN = 1


def sublaplacian_multiplier(n: int, j: int, l: int) -> Fraction:
    """Eigenvalue of Delta_b on H_{j,l}: 2jl + n(j+l)."""
    return Fraction(2 * j * l + n * (j + l))


def reeb_multiplier(n: int, j: int, l: int) -> Fraction:
    """Scalar tau with T F = i tau F on H_{j,l}; tau = j - l."""
    return Fraction(REEB_SIGN * (j - l))


def l_mu_multiplier(n: int, mu, j: int, l: int) -> Fraction:
    """Eigenvalue of L_mu = (1/2)Delta_b + (i/2) mu T + (1/4)(n-mu)(n+mu)."""
    mu = Fraction(mu)
    return (Fraction(j) + Fraction(n + mu, 2)) * (Fraction(l) + Fraction(n - mu, 2))


def bare_product_multiplier(n: int, w, wp, j: int, l: int) -> Fraction:
    """Eigenvalue of the factorized product prod_m L_{w'-w+k-2m-1} on H_{j,l}.

    k = w + w' + n + 1 factors; k = 0 gives the identity.
    """
    w = Fraction(w)
    wp = Fraction(wp)
    k = w + wp + n + 1
    if k.denominator != 1 or k < 0:
        raise ValueError(f"w + w' + n + 1 must be a nonnegative integer, got {k}")
    out = Fraction(1)
    for m in range(int(k)):
        out *= l_mu_multiplier(n, wp - w + int(k) - 2 * m - 1, j, l)
    return out


@dataclass(frozen=True)
class OperatorSpec:
    """Parameters (w, w') of a GJMS-type operator of order 2k, k = w+w'+n+1."""

    n: int
    w: Fraction
    wp: Fraction

    def __post_init__(self):
        object.__setattr__(self, "w", Fraction(self.w))
        object.__setattr__(self, "wp", Fraction(self.wp))
        if (self.w - self.wp).denominator != 1:
            raise ValueError("w - w' must be an integer")
        k = self.w + self.wp + self.n + 1
        if k.denominator != 1 or k < 1:
            raise ValueError(f"k = w + w' + n + 1 must be a positive integer, got {k}")

    @property
    def k(self) -> int:
        return int(self.w + self.wp + self.n + 1)

    @classmethod
    def sharp(cls, n: int, k: int) -> "OperatorSpec":
        """The conformally covariant choice w = w' = (k-1-n)/2 used in the inequality."""
        if not 1 <= k < n + 1:
            raise OrderOutOfRangeError(f"sharp operator needs 1 <= k < n+1, got k={k}, n={n}")
        w = Fraction(k - 1 - n, 2)
        return cls(n, w, w)


def gjms_multiplier(spec: OperatorSpec, j: int, l: int, kappa=Fraction(1)) -> Fraction:
    """kappa times the bare factorized product; kappa = 2^k for the sharp operator."""
    return Fraction(kappa) * bare_product_multiplier(spec.n, spec.w, spec.wp, j, l)


@dataclass(frozen=True)
class SpectralMultiplier:
    """A diagonal operator (j,l) -> kappa * lambda(j,l) with its defining spec."""

    spec: OperatorSpec
    kappa: Fraction = Fraction(1)

    def value(self, j: int, l: int) -> Fraction:
        return gjms_multiplier(self.spec, j, l, self.kappa)

    def __call__(self, j: int, l: int) -> float:
        return float(self.value(j, l))

    @classmethod
    def sharp(cls, n: int, k: int) -> "SpectralMultiplier":
        return cls(OperatorSpec.sharp(n, k), Fraction(2) ** k)


def apply_operator(mult: SpectralMultiplier, e: HarmonicExpansion) -> HarmonicExpansion:
    """Coefficient-wise multiplication by the spectral values."""
    out = {k: float(mult.value(*k)) * v for k, v in e.coeffs.items()}
    return HarmonicExpansion(e.n, e.cutoff, out)


# ---------------------------------------------------------------------------
# Sharp constants
# ---------------------------------------------------------------------------

def gamma_ratio_sq(n: int, k: int) -> Fraction:
    """Gamma((n+1+k)/2)^2 / Gamma((n+1-k)/2)^2 as an exact rational."""
    x = Fraction(n + 1 - k, 2)
    ratio = Fraction(1)
    for i in range(k):
        ratio *= x + i
    return ratio * ratio


def sharp_constant(n: int, k: int) -> float:
    """Best constant C_{n,2k} = (1/4 pi)^k Gamma((n+1-k)/2)^2 / Gamma((n+1+k)/2)^2."""
    if not 1 <= k < n + 1:
        raise OrderOutOfRangeError(f"need 1 <= k < n+1, got k={k}, n={n}")
    return (4.0 * math.pi) ** (-k) / float(gamma_ratio_sq(n, k))


def sharp_constant_inverse(n: int, k: int) -> float:
    """The energy floor C_{n,2k}^{-1}, e.g. pi for n = k = 1."""
    return (4.0 * math.pi) ** k * float(gamma_ratio_sq(n, k))


def measured_kappa(n: int, k: int, rule, basis) -> float:
    """Normalization fixed by equality on constants: quadrature measurement.

    Computes the constant kappa for which the quotient of constants equals
    the inverse sharp constant; the frozen value is 2^k.
    """
    V = rule.total_mass
    p = 2.0 * (2 * n + 2) / (2 * n + 2 - 2 * k)
    lam0 = float(bare_product_multiplier(n, Fraction(k - 1 - n, 2), Fraction(k - 1 - n, 2), 0, 0))
    # quotient of constants with kappa = 1: lam0 * V^((p-2)/p)
    return sharp_constant_inverse(n, k) / (lam0 * V ** ((p - 2.0) / p))


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------

def energy_quadratic(e: HarmonicExpansion, mult: SpectralMultiplier) -> float:
    """A(F) = integral conj(F) P F = sum of lambda(j,l) |c|^2 over the expansion."""
    total = 0.0
    for (j, l), c in e.coeffs.items():
        total += float(mult.value(j, l)) * float(np.sum(np.abs(c) ** 2))
    return total


def lp_norm_power(values: np.ndarray, rule, p: float) -> float:
    """B(F) = integral |F|^p by quadrature."""
    return float(np.real(rule.integrate(np.abs(values) ** p)))


# ---------------------------------------------------------------------------
# Commutator identity and positivity combination
# ---------------------------------------------------------------------------

def commutator_defect(spec: OperatorSpec, e: HarmonicExpansion, basis: HarmonicBasis,
                      wrong_coefficient: bool = False) -> float:
    """L2 norm of sum_i zbar_i [P_{w,w'}, z_i] F + k(w'-k+1) P_{w-1,w'} F.

    The identity makes this vanish on every band-limited F (one block of
    headroom is required).  `wrong_coefficient` replaces k(w'-k+1) by
    k(w'-k+2) as a negative control.
    """
    n = spec.n
    k = spec.k
    acc: HarmonicExpansion | None = None
    P = SpectralMultiplier(spec)
    PF = apply_operator(P, e)
    for i in range(n + 1):
        ziF = multiply_by_coordinate(e, i, basis)
        PziF = apply_operator(P, ziF)
        ziPF = multiply_by_coordinate(PF, i, basis)
        bracket = PziF.plus(ziPF.scaled(-1.0))
        term = multiply_by_conjugate_coordinate(bracket, i, basis)
        acc = term if acc is None else acc.plus(term)
    shift = 2 if wrong_coefficient else 1
    coeff = k * (spec.wp - k + shift)
    lower = {key: float(bare_product_multiplier(n, spec.w - 1, spec.wp, *key)) * v
             for key, v in e.coeffs.items()}
    acc = acc.plus(HarmonicExpansion(e.n, e.cutoff, lower).scaled(float(coeff)))
    return math.sqrt(acc.norm2_sq())


def positivity_combination(n: int, k: int, j: int, l: int) -> Fraction:
    """(p-2) lambda_{w,w}(j,l) + k(w-k+1) lambda_{w-1,w}(j,l), w = (k-1-n)/2.

    Nonnegative on the whole (j,l) grid with a zero exactly at (0,0).
    """
    if not 1 <= k < n + 1:
        raise OrderOutOfRangeError(f"need 1 <= k < n+1, got k={k}, n={n}")
    w = Fraction(k - 1 - n, 2)
    p_minus_2 = Fraction(2 * k, n + 1 - k)
    lam = bare_product_multiplier(n, w, w, j, l)
    lam_low = bare_product_multiplier(n, w - 1, w, j, l)
    return p_minus_2 * lam + k * (w - k + 1) * lam_low


def positivity_combination_factorized(n: int, k: int, j: int, l: int) -> Fraction:
    """Same combination in product form: (p-2) (L-factor with mu = 1-k) * lower product."""
    p_minus_2 = Fraction(2 * k, n + 1 - k)
    # (1/2)Delta_b + (i/2)(1-k)T has multiplier jl + n(j+l)/2 - ((1-k)/2)(j-l)
    head = (Fraction(j * l) + Fraction(n * (j + l), 2)
            - Fraction(1 - k, 2) * (j - l))
    tail = Fraction(1)
    for m in range(k - 1):
        tail *= l_mu_multiplier(n, k - 2 * m - 1, j, l)
    return p_minus_2 * head * tail


def positivity_scan(n: int, k: int, j_max: int, l_max: int) -> List[Tuple[Tuple[int, int], Fraction]]:
    """Exact values of the positivity combination on the grid [0,j_max]x[0,l_max]."""
    return [((j, l), positivity_combination(n, k, j, l))
            for j in range(j_max + 1) for l in range(l_max + 1)]


def multiplier_table_csv(n: int, k: int, j_max: int, l_max: int, path: str) -> None:
    """Per-(n,k) table of sharp multipliers and the positivity combination."""
    spec = OperatorSpec.sharp(n, k)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "l", "lambda", "combination_value"])
        for j in range(j_max + 1):
            for l in range(l_max + 1):
                lam = gjms_multiplier(spec, j, l, Fraction(2) ** k)
                comb = positivity_combination(n, k, j, l)
                writer.writerow([j, l, f"{float(lam):.17g}", f"{float(comb):.17g}"])


# ---------------------------------------------------------------------------
# Independent oracles for the frozen closed forms
# ---------------------------------------------------------------------------

def sublaplacian_energy_quotient(n: int, poly: PolyDict) -> Fraction:
    """Rayleigh quotient of the Levi-form Dirichlet energy, exactly.

    For u a polynomial restricted to the sphere, the horizontal energy is
    sum_a |du(Z_a)|^2 over a Levi-orthonormal frame plus its conjugate,
    which in ambient terms is |grad_hol u|^2 - |radial_hol u|^2 plus the
    antiholomorphic twin.  On H_{j,l} the quotient equals 2jl + n(j+l).
    """
    nv = n + 1
    norm2 = inner_product_exact(n, poly, poly)
    if norm2 == 0:
        raise ValueError("zero polynomial")
    energy = Fraction(0)
    zero = tuple(0 for _ in range(nv))
    for conjugate in (False, True):
        radial: PolyDict = {}
        for a in range(nv):
            d = wirtinger_derivative(poly, a, conjugate=conjugate)
            if not d:
                continue
            energy += inner_product_exact(n, d, d)
            coord = ((tuple(1 if q == a else 0 for q in range(nv)), zero)
                     if not conjugate else
                     (zero, tuple(1 if q == a else 0 for q in range(nv))))
            radial = poly_add(radial, poly_mul({coord: Fraction(1)}, d))
        if radial:
            energy -= inner_product_exact(n, radial, radial)
    return energy / norm2


def reeb_symbolic(poly: PolyDict) -> PolyDict:
    """(1/i) T acting on a polynomial: holomorphic minus antiholomorphic Euler field."""
    out: PolyDict = {}
    for (a, b), c in poly.items():
        factor = REEB_SIGN * (sum(a) - sum(b))
        if factor:
            out[(a, b)] = c * factor
    return out
