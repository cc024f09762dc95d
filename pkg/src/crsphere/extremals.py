"""The extremal family, recentering by automorphisms, and variational checks.

The optimizers of the sharp inequality are u(eta) = C / |1 - xi.conj(eta)|^s
with s = (Q-2k)/2 and |xi| < 1.  They arise from constants through the
conformal action: act_on_function with the automorphism centered at -xi
carries the constant to the extremal with pole parameter xi.  Recentering
finds the automorphism that kills the first moments of |F|^p, by damped
Gauss-Newton on the center parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NegativeDensityError, NoConvergenceError, NotBalancedError
from .geometry import (
    AutomorphismParam,
    Dimension,
    QuadratureRule,
    act_on_function,
    automorphism_points,
    conformal_factor_points,
)
from .harmonics import HarmonicBasis, HarmonicExpansion, analyze, multiply_by_coordinate, synthesize
from .operators import SpectralMultiplier, apply_operator, energy_quadratic


@dataclass(frozen=True)
class ExtremalParams:
    """Pole parameter, amplitude, and order of one member of the extremal family."""

    xi: np.ndarray
    amplitude: complex
    k: int

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=complex)
        object.__setattr__(self, "xi", xi)
        if np.linalg.norm(xi) >= 1.0:
            raise ValueError("extremal pole parameter must satisfy |xi| < 1")


def extremal_exponent(dim: Dimension, k: int) -> float:
    """Decay exponent (Q-2k)/2 of the extremal family."""
    return 0.5 * (dim.Q - 2 * k)


def extremal_function(params: ExtremalParams, dim: Dimension) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise evaluator of C / |1 - xi.conj(eta)|^((Q-2k)/2)."""
    s = extremal_exponent(dim, params.k)
    xi = params.xi
    C = params.amplitude

    def u(points: np.ndarray) -> np.ndarray:
        return C / np.abs(1.0 - np.conj(points) @ xi) ** s

    return u


def normalized_extremal(xi, k: int, dim: Dimension) -> ExtremalParams:
    """Extremal with unit L^p mass: |C| = V^(-1/p) (1-|xi|^2)^((Q-2k)/4)."""
    xi = np.asarray(xi, dtype=complex)
    p = dim.p(k)
    C = dim.volume ** (-1.0 / p) * (1.0 - np.vdot(xi, xi).real) ** ((dim.Q - 2 * k) / 4.0)
    return ExtremalParams(xi, C, k)


def automorphism_for_extremal(xi) -> AutomorphismParam:
    """The automorphism whose conformal action carries constants to the
    extremal with pole parameter xi (its center is -xi)."""
    return AutomorphismParam.from_center(-np.asarray(xi, dtype=complex))


# ---------------------------------------------------------------------------
# Moments and recentering
# ---------------------------------------------------------------------------

def complex_moment(density: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """First moments int z_i dnu of the normalized density, as a complex vector."""
    density = np.real(density)
    if np.min(density) < -1e-10 * max(1.0, np.max(np.abs(density))):
        raise NegativeDensityError("density has negative values")
    mass = float(rule.integrate(density).real)
    if mass <= 0:
        raise NegativeDensityError("density has no mass")
    return (rule.weights * density) @ rule.nodes / mass


def center_of_mass(density: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Moment vector over the 2n+2 real coordinate functions (x_1, y_1, ...)."""
    m = complex_moment(density, rule)
    out = np.empty(2 * m.shape[0])
    out[0::2] = m.real
    out[1::2] = m.imag
    return out


def _to_complex(v: np.ndarray) -> np.ndarray:
    return v[0::2] + 1j * v[1::2]


def recenter(F: Callable[[np.ndarray], np.ndarray], p: float, dim: Dimension,
             rule: QuadratureRule, tol: float = 1e-9, max_iter: int = 60) -> AutomorphismParam:
    """Automorphism parameter a with |center_of_mass(|F^a|^p)| < tol.

    Gauss-Newton on the center xi with a finite-difference Jacobian,
    backtracking on the moment norm, and a trust cap |xi| <= 0.95.
    """

    def moments(xi_real: np.ndarray) -> np.ndarray:
        xi = _to_complex(xi_real)
        a = AutomorphismParam.from_center(xi)
        vals = act_on_function(a, F, p, dim)(rule.nodes)
        return center_of_mass(np.abs(vals) ** p, rule)

    d = 2 * (dim.n + 1)
    xi_real = np.zeros(d)
    r = moments(xi_real)
    rnorm = np.linalg.norm(r)
    if rnorm < tol:
        return AutomorphismParam.identity(dim.n)

    h = 1e-6
    for _ in range(max_iter):
        J = np.empty((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            J[:, i] = (moments(xi_real + e) - moments(xi_real - e)) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        scale = 1.0
        improved = False
        for _ in range(25):
            cand = xi_real + scale * step
            cz = np.linalg.norm(_to_complex(cand))
            if cz < 0.95:
                rc = moments(cand)
                if np.linalg.norm(rc) < rnorm:
                    xi_real, r, rnorm = cand, rc, np.linalg.norm(rc)
                    improved = True
                    break
            scale *= 0.5
        if rnorm < tol:
            return AutomorphismParam.from_center(_to_complex(xi_real))
        if not improved:
            break
    raise NoConvergenceError(
        f"recentering stalled with moment norm {rnorm:.3e} (tol {tol:.1e})", residual=rnorm)


# ---------------------------------------------------------------------------
# Variational residuals
# ---------------------------------------------------------------------------

def euler_lagrange_residual(values: np.ndarray, dim: Dimension, k: int,
                            basis: HarmonicBasis, rule: QuadratureRule) -> float:
    """L2 norm of P_k F - A(F) F^(p-1) for real F with unit L^p mass.

    The input is normalized to B(F) = 1 internally.  P_k F is evaluated
    spectrally at the basis cutoff, so the residual includes the truncation
    error and decreases as the cutoff grows.
    """
    p = dim.p(k)
    values = np.real(values)
    B = float(rule.integrate(np.abs(values) ** p).real)
    values = values / B ** (1.0 / p)
    e = analyze(values.astype(complex), basis, rule)
    mult = SpectralMultiplier.sharp(dim.n, k)
    A = energy_quadratic(e, mult)
    pf = synthesize(apply_operator(mult, e), basis, rule.nodes).real
    resid = pf - A * np.sign(values) * np.abs(values) ** (p - 1.0)
    return math.sqrt(float(rule.integrate(resid ** 2).real))


def second_variation_gap(values: np.ndarray, dim: Dimension, k: int,
                         basis: HarmonicBasis, rule: QuadratureRule,
                         balance_tol: float = 1e-6) -> float:
    """sum_j int zbar_j u [P_k, z_j](u) - (p-2) int u P_k u for balanced u.

    Zero on constants; on a balanced positive local minimizer the value is
    nonnegative.  Perturbing a constant inside a higher bidegree block makes
    the value strictly negative, reflecting that only constants satisfy the
    minimizer inequality (the magnitude reproduces the spectral positivity
    combination).  Raises NotBalancedError when the first moments of |u|^p
    exceed `balance_tol`.
    """
    p = dim.p(k)
    values = np.real(values)
    moments = center_of_mass(np.abs(values) ** p, rule)
    if np.linalg.norm(moments) > balance_tol:
        raise NotBalancedError(
            f"first moments {np.linalg.norm(moments):.3e} exceed {balance_tol:.1e}")
    # one block of headroom for the coordinate multiplications
    e = analyze(values.astype(complex), basis, rule, cutoff=basis.J_max - 1)
    mult = SpectralMultiplier.sharp(dim.n, k)
    Pu = apply_operator(mult, e)
    total = 0.0
    for i in range(dim.n + 1):
        ziu = multiply_by_coordinate(e, i, basis)
        bracket = apply_operator(mult, ziu).plus(multiply_by_coordinate(Pu, i, basis).scaled(-1.0))
        # int zbar_i u [P, z_i] u = <[P, z_i]u, z_i u> for real u
        for key, c in bracket.coeffs.items():
            if key in ziu.coeffs:
                total += float(np.real(np.sum(c * np.conj(ziu.coeffs[key]))))
    A = energy_quadratic(e, mult)
    return total - (p - 2.0) * A
