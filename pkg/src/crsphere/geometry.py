"""Model spaces: the CR sphere, the Heisenberg group, and maps between them.

Conventions.  The sphere S^{2n+1} sits in C^{n+1} with contact form
theta_0 = sum_i (x_i dy_i - y_i dx_i); the associated volume form
theta_0 ^ (d theta_0)^n equals 2^n n! times Euclidean surface measure, for a
total mass of (2 pi)^(n+1).  The Heisenberg group is C^n x R with its
canonical contact form, whose volume form is 4^n n! times Lebesgue measure
on R^{2n+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    NonPositiveDeltaError,
    ResolutionTooLowError,
    SouthPoleError,
)
from .polynomials import total_volume

SPHERE_TOL = 1e-12
SOUTH_POLE_TOL = 1e-14


@dataclass(frozen=True)
class Dimension:
    """CR dimension n with derived homogeneous dimension Q = 2n+2."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"CR dimension must be >= 1, got {self.n}")

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    def p(self, k: int) -> float:
        """Critical exponent 2Q/(Q-2k) for an operator of order 2k."""
        if not 1 <= k < self.n + 1:
            raise ValueError(f"order k={k} outside 1 <= k < n+1 = {self.n + 1}")
        return 2.0 * self.Q / (self.Q - 2 * k)

    @property
    def volume(self) -> float:
        return total_volume(self.n)


@dataclass(frozen=True)
class SpherePoint:
    """Point of S^{2n+1} as a unit vector in C^{n+1}."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        object.__setattr__(self, "w", w)
        r = np.linalg.norm(w)
        if abs(r - 1.0) > SPHERE_TOL:
            raise ValueError(f"sphere point has norm {r}, off unit sphere")

    @property
    def n(self) -> int:
        return self.w.shape[0] - 1


@dataclass(frozen=True)
class HeisenbergPoint:
    """Point (z, t) of the Heisenberg group H^n = C^n x R."""

    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex)
        object.__setattr__(self, "z", z)
        if not (np.all(np.isfinite(z.view(float))) and math.isfinite(self.t)):
            raise ValueError("Heisenberg point must be finite")

    @property
    def n(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class AutomorphismParam:
    """Sphere automorphism U . phi_xi: Moebius factor with center xi, then a unitary."""

    xi: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=complex)
        U = np.asarray(self.U, dtype=complex)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "U", U)
        if np.linalg.norm(xi) >= 1.0:
            raise ValueError("automorphism center must satisfy |xi| < 1")
        if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > SPHERE_TOL:
            raise ValueError("U is not unitary within 1e-12")

    @classmethod
    def identity(cls, n: int) -> "AutomorphismParam":
        return cls(np.zeros(n + 1, dtype=complex), np.eye(n + 1, dtype=complex))

    @classmethod
    def from_center(cls, xi) -> "AutomorphismParam":
        xi = np.asarray(xi, dtype=complex)
        return cls(xi, np.eye(xi.shape[0], dtype=complex))


# ---------------------------------------------------------------------------
# Cayley transform
# ---------------------------------------------------------------------------

def cayley(h: HeisenbergPoint, dim: Dimension) -> SpherePoint:
    """Cayley transform H^n -> S^{2n+1} minus the south pole."""
    denom = 1.0 + np.vdot(h.z, h.z).real + 1j * h.t
    w = np.empty(dim.n + 1, dtype=complex)
    w[: dim.n] = 2.0 * h.z / denom
    w[dim.n] = (1.0 - np.vdot(h.z, h.z).real - 1j * h.t) / denom
    return SpherePoint(w)


def cayley_inverse(s: SpherePoint) -> HeisenbergPoint:
    """Inverse Cayley transform; errors at the excluded south pole."""
    last = s.w[-1]
    if abs(1.0 + last) < SOUTH_POLE_TOL:
        raise SouthPoleError("south pole (0,...,0,-1) is not in the image of the Cayley transform")
    z = s.w[:-1] / (1.0 + last)
    t = (2.0 / (1.0 + last)).imag
    return HeisenbergPoint(z, float(t))


def cayley_conformal_factor(h: HeisenbergPoint, dim: Dimension) -> float:
    """Factor lambda with C_* theta_0 = lambda theta_c; volume density is lambda^(n+1)."""
    r2 = np.vdot(h.z, h.z).real
    return 2.0 / ((1.0 + r2) ** 2 + h.t ** 2)


def heisenberg_volume_density(n: int) -> float:
    """Contact volume of H^n relative to Lebesgue measure dz dzbar dt: 4^n n!."""
    return 4.0 ** n * math.factorial(n)


def dilate(delta: float, h: HeisenbergPoint) -> HeisenbergPoint:
    """Anisotropic dilation (z, t) -> (z/delta, t/delta^2)."""
    if delta <= 0:
        raise NonPositiveDeltaError(f"dilation parameter must be positive, got {delta}")
    return HeisenbergPoint(h.z / delta, h.t / delta ** 2)


# ---------------------------------------------------------------------------
# Sphere automorphisms (unit-ball Moebius maps restricted to the boundary)
# ---------------------------------------------------------------------------

def _mobius_points(xi: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply the Moebius translation tau_xi to an (N, n+1) array of sphere points.

    tau_xi(z) = (xi + P_xi z + s Q_xi z) / (1 + <z, xi>) with s = sqrt(1-|xi|^2):
    tau_xi(0) = xi, tau_0 is the identity (the family is smooth in xi), and
    tau_{-xi} inverts tau_xi.  Preserves the sphere.
    """
    a2 = np.vdot(xi, xi).real
    if a2 == 0.0:
        return points.copy()
    s = math.sqrt(1.0 - a2)
    ip = points @ np.conj(xi)  # <z, xi>
    proj = np.outer(ip / a2, xi)  # P_xi z
    orth = points - proj
    return (xi[None, :] + proj + s * orth) / (1.0 + ip)[:, None]


def automorphism_points(a: AutomorphismParam, points: np.ndarray) -> np.ndarray:
    """Apply U . phi_xi to an (N, n+1) array of sphere points."""
    return _mobius_points(a.xi, points) @ a.U.T


def automorphism_apply(a: AutomorphismParam, s: SpherePoint) -> SpherePoint:
    out = automorphism_points(a, s.w[None, :])[0]
    out = out / np.linalg.norm(out)
    return SpherePoint(out)


def conformal_factor_points(a: AutomorphismParam, points: np.ndarray, dim: Dimension) -> np.ndarray:
    """Volume density |J_Phi| at sphere points: (1-|xi|^2)^(n+1) / |1 + <eta, xi>|^Q.

    This is the extremal-family shape c / |1 - zeta . conj(eta)|^Q with pole
    parameter zeta = -xi.  Normalized so the density integrates to the total
    contact volume; the unitary factor contributes density one.
    """
    a2 = np.vdot(a.xi, a.xi).real
    ip = points @ np.conj(a.xi)  # <eta, xi>
    return ((1.0 - a2) / np.abs(1.0 + ip) ** 2) ** (dim.n + 1)


def conformal_factor(a: AutomorphismParam, s: SpherePoint, dim: Dimension) -> float:
    return float(conformal_factor_points(a, s.w[None, :], dim)[0])


def act_on_function(a: AutomorphismParam, F: Callable[[np.ndarray], np.ndarray],
                    p: float, dim: Dimension) -> Callable[[np.ndarray], np.ndarray]:
    """Conformal action F -> |J_Phi|^(1/p) (F o Phi); preserves the L^p norm."""
    if p <= 0:
        raise ValueError("conformal weight requires p > 0")

    def acted(points: np.ndarray) -> np.ndarray:
        jac = conformal_factor_points(a, points, dim)
        return jac ** (1.0 / p) * F(automorphism_points(a, points))

    return acted


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights integrating the contact volume on S^{2n+1}.

    Exact for every monomial z^alpha zbar^beta whose holomorphic and
    antiholomorphic total degrees are both <= `degree` (hence for all
    polynomials of total degree <= `degree`).  Weights sum to (2 pi)^(n+1).
    """

    n: int
    degree: int
    nodes: np.ndarray  # (N, n+1) complex
    weights: np.ndarray  # (N,) positive

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values: np.ndarray) -> float | complex:
        # numpy pairwise summation keeps the reduction deterministic and
        # independent of any node partitioning.
        return np.sum(self.weights * values)

    def rule_id(self) -> str:
        return f"hopf-gl-n{self.n}-deg{self.degree}-N{self.nodes.shape[0]}"

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(f"# quadrature n={self.n} degree={self.degree} nodes={self.nodes.shape[0]}\n")
            for row, w in zip(self.nodes, self.weights):
                coords = []
                for c in row:
                    coords.append(f"{c.real:.17g}")
                    coords.append(f"{c.imag:.17g}")
                fh.write(" ".join(coords) + f" {w:.17g}\n")

    @classmethod
    def load(cls, path: str) -> "QuadratureRule":
        with open(path) as fh:
            header = fh.readline().strip()
            meta = dict(kv.split("=") for kv in header.lstrip("# ").split())
            n = int(meta["n"])
            degree = int(meta["degree"])
            rows = []
            weights = []
            for line in fh:
                vals = [float(x) for x in line.split()]
                re = vals[:-1:2]
                im = vals[1:-1:2]
                rows.append([complex(a, b) for a, b in zip(re, im)])
                weights.append(vals[-1])
        return cls(n, degree, np.array(rows, dtype=complex), np.array(weights))


def _gauss_legendre_01(g: int):
    x, w = np.polynomial.legendre.leggauss(g)
    return 0.5 * (x + 1.0), 0.5 * w


def build_quadrature(n: int, degree: int, phase_points: Optional[int] = None,
                     radial_points: Optional[int] = None) -> QuadratureRule:
    """Tensor quadrature in Hopf-type coordinates z_j = sqrt(u_j) e^(i phi_j).

    The radial simplex (u_1,...,u_{n+1}) is parametrized by stick-breaking
    variables v_i in [0,1] carrying Gauss-Legendre nodes; each phase angle
    carries a uniform grid.  With M phase points per angle and g radial
    points per variable the rule integrates z^alpha zbar^beta exactly
    whenever max(|alpha|, |beta|) <= degree, which requires
    M >= degree + 1 and 2g - 1 >= degree + n - 1.

    Raises ResolutionTooLowError if explicit sizes cannot certify `degree`.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    need_phase = degree + 1
    need_radial = (degree + n + 1) // 2
    M = need_phase if phase_points is None else phase_points
    g = max(need_radial, 1) if radial_points is None else radial_points
    if M < need_phase or g < max(need_radial, 1):
        raise ResolutionTooLowError(
            f"need >= {need_phase} phase and >= {max(need_radial, 1)} radial points "
            f"for exactness degree {degree}, got ({M}, {g})")

    v_nodes, v_weights = _gauss_legendre_01(g)
    phi = 2.0 * math.pi * np.arange(M) / M
    phase_w = 2.0 * math.pi / M

    # Accumulate the simplex factor: u-coordinates and radial weights.
    # u_i = v_i * prod_{r<i}(1 - v_r), u_{n+1} = prod(1 - v_r); the measure
    # du_1...du_n picks up the Jacobian prod_i (1 - v_i)^(n-1-i).
    u_cols: list = []
    w_rad = np.ones(1)
    remaining = np.ones(1)
    for i in range(n):
        jac = v_weights * (1.0 - v_nodes) ** (n - 1 - i)
        new_col = (remaining[:, None] * v_nodes[None, :]).ravel()
        u_cols = [np.repeat(col, g) for col in u_cols]
        u_cols.append(new_col)
        w_rad = (w_rad[:, None] * jac[None, :]).ravel()
        remaining = (remaining[:, None] * (1.0 - v_nodes)[None, :]).ravel()
    u_cols.append(remaining)
    u = np.stack(u_cols, axis=1)

    # Tensor with the phase grids.
    mesh = np.meshgrid(*([phi] * (n + 1)), indexing="ij")
    phases = np.stack([m.ravel() for m in mesh], axis=1)
    n_rad = u.shape[0]
    n_ph = phases.shape[0]

    radii = np.sqrt(u)
    nodes = (radii[:, None, :] * np.exp(1j * phases)[None, :, :]).reshape(n_rad * n_ph, n + 1)
    weights = (math.factorial(n) * phase_w ** (n + 1)) * np.repeat(w_rad, n_ph)
    return QuadratureRule(n, degree, nodes, weights)
