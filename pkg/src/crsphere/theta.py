"""Moment-constrained minimization of sum nu_i^theta over atomic measures.

The admissible set consists of probability measures on the sphere whose
integrals against every mean-zero polynomial of bidegree at most (w, w')
vanish.  The optimizer follows an augmented-Lagrangian outer loop with a
projected-gradient inner loop: atom positions move by tangent steps followed
by renormalization, weights by Euclidean projection onto the probability
simplex.  Restarts are seeded independently and reduced deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InfeasibleError
from .geometry import build_quadrature
from .polynomials import exponent_tuples, total_volume, uniform_moment

WEIGHT_DELETE_TOL = 1e-7
ATOM_MERGE_TOL = 1e-4


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many sphere atoms with positive weights summing to one."""

    atoms: np.ndarray  # (K, n+1) complex unit rows
    weights: np.ndarray  # (K,) positive

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=complex)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if abs(float(np.sum(weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one within 1e-12")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if np.max(np.abs(np.linalg.norm(atoms, axis=1) - 1.0)) > 1e-10:
            raise ValueError("atoms must lie on the unit sphere")

    @property
    def support_size(self) -> int:
        return self.atoms.shape[0]

    def serialize(self) -> str:
        rows = []
        for x, w in sorted(zip(self.atoms.tolist(), self.weights.tolist()),
                           key=lambda t: (round(t[1], 12), [(round(c.real, 10), round(c.imag, 10)) for c in t[0]])):
            rows.append(json.dumps({"atom": [[c.real, c.imag] for c in x], "weight": w}))
        return "\n".join(rows)


def theta_objective(m: DiscreteMeasure, theta: float) -> float:
    """sum_i nu_i^theta; equals 1 at theta = 1 by normalization."""
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    return float(np.sum(m.weights ** theta))


# ---------------------------------------------------------------------------
# Moment systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSystem:
    """Orthonormalized real constraint functions spanning the mean-zero span
    of all monomials z^a zbar^b with |a| <= w, |b| <= w'."""

    n: int
    w: int
    wp: int
    mono_keys: List[Tuple[Tuple[int, ...], Tuple[int, ...]]]
    combo: np.ndarray  # (m, nmono) complex; constraint = Re(combo . monos) - shift
    shift: np.ndarray  # (m,)

    @property
    def size(self) -> int:
        return self.combo.shape[0]


def _mono_values(keys, points: np.ndarray) -> np.ndarray:
    """(N, nmono) monomial values at sphere points."""
    conj = np.conj(points)
    out = np.empty((points.shape[0], len(keys)), dtype=complex)
    for t, (a, b) in enumerate(keys):
        v = np.ones(points.shape[0], dtype=complex)
        for i, e in enumerate(a):
            if e:
                v *= points[:, i] ** e
        for i, e in enumerate(b):
            if e:
                v *= conj[:, i] ** e
        out[:, t] = v
    return out


def build_moment_system(n: int, w: int, wp: int) -> MomentSystem:
    """Assemble and orthonormalize the constraint family for (w, w')."""
    if w < 0 or wp < 0 or (w, wp) == (0, 0):
        raise ValueError("need nonnegative (w, w') with w + w' >= 1")
    keys = []
    for a_deg in range(w + 1):
        for b_deg in range(wp + 1):
            if a_deg == 0 and b_deg == 0:
                continue
            for a in exponent_tuples(n + 1, a_deg):
                for b in exponent_tuples(n + 1, b_deg):
                    keys.append((a, b))
    # real candidate constraints: Re and Im of each centered monomial, with
    # conjugate duplicates dropped
    rows = []
    shifts = []
    seen = set()
    for (a, b) in keys:
        if (b, a) in seen:
            continue
        seen.add((a, b))
        t = keys.index((a, b))
        c0 = float(uniform_moment(n, a, b))
        row = np.zeros(len(keys), dtype=complex)
        row[t] = 1.0
        rows.append(row)
        shifts.append(c0)
        if a != b:
            rows.append(-1j * row)  # Im part; its uniform mean is zero
            shifts.append(0.0)
    combo = np.array(rows)
    shift = np.array(shifts)

    # orthonormalize against the uniform probability measure (conditioning)
    rule = build_quadrature(n, max(2 * (w + wp), 2))
    vals = np.real(_mono_values(keys, rule.nodes) @ combo.T) - shift[None, :]
    V = total_volume(n)
    G = (vals.T * rule.weights) @ vals / V
    evals, evecs = np.linalg.eigh(G)
    keep = evals > 1e-12 * np.max(evals)
    O = (evecs[:, keep] / np.sqrt(evals[keep])).T
    return MomentSystem(n, w, wp, keys, O @ combo, O @ shift)


def moment_residuals(m: DiscreteMeasure, sys: MomentSystem) -> np.ndarray:
    """Vector of integrals of the orthonormalized constraints against the measure."""
    mono = _mono_values(sys.mono_keys, m.atoms)
    g = np.real(mono @ sys.combo.T) - sys.shift[None, :]
    return m.weights @ g


# ---------------------------------------------------------------------------
# Known optimal configuration for the (1,1) system
# ---------------------------------------------------------------------------

def simplex_configuration(n: int) -> DiscreteMeasure:
    """n+2 equally weighted vertices of a regular simplex of unit vectors in
    R^{n+1} (embedded in C^{n+1}); admissible for the (1,1) system."""
    m = n + 2
    # vertices of the regular simplex in the hyperplane sum(x) = 0 of R^m,
    # expressed in an orthonormal (Helmert) basis of that hyperplane
    verts = np.eye(m) - np.ones((m, m)) / m
    helmert = np.zeros((n + 1, m))
    for k in range(1, m):
        helmert[k - 1, :k] = 1.0
        helmert[k - 1, k] = -k
        helmert[k - 1] /= math.sqrt(k * (k + 1))
    x = verts @ helmert.T
    x /= np.linalg.norm(x, axis=1)[:, None]
    return DiscreteMeasure(x.astype(complex), np.full(m, 1.0 / m))


def orthonormality_defect(m: DiscreteMeasure) -> float:
    """Max deviation from orthonormality of the n+2 weight-coordinate vectors
    (sqrt(nu_i))_i and (sqrt((n+1) nu_i) x_{i,j})_i characterizing (1,1)-optimality."""
    nplus1 = m.atoms.shape[1]
    vs = [np.sqrt(m.weights).astype(complex)]
    for j in range(nplus1):
        vs.append(np.sqrt((nplus1) * m.weights) * m.atoms[:, j])
    V = np.array(vs)
    G = V @ np.conj(V).T
    return float(np.max(np.abs(G - np.eye(nplus1 + 1))))


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / (np.arange(len(v)) + 1) > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _realify(points: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape + (2,))
    out[..., 0] = points.real
    out[..., 1] = points.imag
    return out.reshape(points.shape[0], -1)


def _complexify(x: np.ndarray, nvars: int) -> np.ndarray:
    r = x.reshape(x.shape[0], nvars, 2)
    return r[..., 0] + 1j * r[..., 1]


class _Problem:
    """Residuals and Jacobians for one (n, w, w') system at support size K."""

    def __init__(self, sys: MomentSystem):
        self.sys = sys
        self.n = sys.n
        # derivative tables: d(mono_t)/dz_c and /dzbar_c as (factor, source key index)
        keys = sys.mono_keys
        self.key_index = {k: i for i, k in enumerate(keys)}
        extra = {}
        self.dz = []  # per coordinate: list of (t, factor, key)
        self.dzb = []
        allkeys = list(keys)

        def key_id(k):
            if k in self.key_index:
                return self.key_index[k]
            if k not in extra:
                extra[k] = len(allkeys)
                allkeys.append(k)
            return extra[k]

        nv = sys.n + 1
        for c in range(nv):
            dz_c = []
            dzb_c = []
            for t, (a, b) in enumerate(keys):
                if a[c]:
                    a2 = tuple(x - (1 if q == c else 0) for q, x in enumerate(a))
                    dz_c.append((t, a[c], key_id((a2, b))))
                if b[c]:
                    b2 = tuple(x - (1 if q == c else 0) for q, x in enumerate(b))
                    dzb_c.append((t, b[c], key_id((a, b2))))
            self.dz.append(dz_c)
            self.dzb.append(dzb_c)
        self.allkeys = allkeys

    def constraint_values(self, atoms: np.ndarray) -> np.ndarray:
        """g_q(x_k) as a (K, m) real matrix."""
        mono = _mono_values(self.sys.mono_keys, atoms)
        return np.real(mono @ self.sys.combo.T) - self.sys.shift[None, :]

    def residuals(self, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
        return weights @ self.constraint_values(atoms)

    def jacobians(self, atoms: np.ndarray, weights: np.ndarray):
        """(residuals, d r/d nu (m,K), d r/d coords (m, K, 2(n+1)))."""
        vals = _mono_values(self.allkeys, atoms)  # (K, nall)
        K = atoms.shape[0]
        m = self.sys.size
        nv = self.n + 1
        g = np.real(vals[:, :len(self.sys.mono_keys)] @ self.sys.combo.T) - self.sys.shift[None, :]
        r = weights @ g
        Jnu = g.T  # (m, K)... transposed below
        Jx = np.zeros((m, K, 2 * nv))
        for c in range(nv):
            dz_val = np.zeros((K, len(self.sys.mono_keys)), dtype=complex)
            for (t, fac, src) in self.dz[c]:
                dz_val[:, t] = fac * vals[:, src]
            dzb_val = np.zeros((K, len(self.sys.mono_keys)), dtype=complex)
            for (t, fac, src) in self.dzb[c]:
                dzb_val[:, t] = fac * vals[:, src]
            gz = dz_val @ self.sys.combo.T  # (K, m) complex: d(combo.monos)/dz_c
            gzb = dzb_val @ self.sys.combo.T
            # d Re(f)/dx = Re(df/dz + df/dzbar); d Re(f)/dy = Re(i(df/dz - df/dzbar))
            Jx[:, :, 2 * c] = (weights[:, None] * np.real(gz + gzb)).T
            Jx[:, :, 2 * c + 1] = (weights[:, None] * np.real(1j * (gz - gzb))).T
        return r, Jnu, Jx


def _al_solve(prob: _Problem, atoms0: np.ndarray, weights0: np.ndarray, theta: float,
              feas_tol: float = 1e-10, max_outer: int = 30) -> Tuple[np.ndarray, np.ndarray, float]:
    """Augmented-Lagrangian loop; returns (atoms, weights, feasibility)."""
    atoms = atoms0.copy()
    weights = weights0.copy()
    nv = prob.n + 1
    lam = np.zeros(prob.sys.size)
    rho = 10.0
    nu_floor = 1e-12

    def merit(atoms, weights):
        r = prob.residuals(atoms, weights)
        f = float(np.sum(np.maximum(weights, nu_floor) ** theta))
        return f + lam @ r + 0.5 * rho * float(r @ r), r

    for outer in range(max_outer):
        step = 0.1
        value, r = merit(atoms, weights)
        for inner in range(400):
            rr, Jnu, Jx = prob.jacobians(atoms, weights)
            y = lam + rho * rr
            grad_nu = theta * np.maximum(weights, nu_floor) ** (theta - 1.0) + Jnu.T @ y
            grad_x = np.einsum("m,mkc->kc", y, Jx)
            # tangent projection per atom (real geometry of the unit sphere)
            xr = _realify(atoms)
            grad_x -= (np.sum(grad_x * xr, axis=1) / np.sum(xr * xr, axis=1))[:, None] * xr
            gnorm = math.sqrt(float(np.sum(grad_nu ** 2) + np.sum(grad_x ** 2)))
            if gnorm < 1e-12:
                break
            improved = False
            while step > 1e-14:
                w_new = _project_simplex(weights - step * grad_nu)
                w_new = np.maximum(w_new, nu_floor)
                w_new /= w_new.sum()
                x_new = xr - step * grad_x
                x_new /= np.linalg.norm(x_new, axis=1)[:, None]
                atoms_new = _complexify(x_new, nv)
                val_new, r_new = merit(atoms_new, w_new)
                if val_new < value - 1e-14:
                    atoms, weights, value, r = atoms_new, w_new, val_new, r_new
                    step *= 1.6
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        r = prob.residuals(atoms, weights)
        if float(np.linalg.norm(r)) < feas_tol and outer >= 2:
            break
        lam = lam + rho * r
        rho = min(rho * 4.0, 1e9)
    return atoms, weights, float(np.linalg.norm(prob.residuals(atoms, weights)))


def _cleanup(atoms: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Delete near-zero weights and merge coincident atoms."""
    keep = weights > WEIGHT_DELETE_TOL
    atoms, weights = atoms[keep], weights[keep]
    weights = weights / weights.sum()
    merged = True
    while merged:
        merged = False
        K = atoms.shape[0]
        for i in range(K):
            for j in range(i + 1, K):
                if np.linalg.norm(atoms[i] - atoms[j]) < ATOM_MERGE_TOL:
                    weights[i] += weights[j]
                    atoms = np.delete(atoms, j, axis=0)
                    weights = np.delete(weights, j)
                    merged = True
                    break
            if merged:
                break
    return atoms, weights


def minimize_theta(n: int, w: int, wp: int, theta: float, K_max: Optional[int] = None,
                   restarts: int = 10, seed: int = 0,
                   feas_tol: float = 1e-9) -> Tuple[DiscreteMeasure, float]:
    """Best locally optimal admissible measure over seeded restarts.

    Each restart draws a support size in [2, K_max] and random atoms/weights,
    runs the augmented-Lagrangian solver, prunes the support, and re-solves.
    Results are reduced deterministically: smallest objective, ties broken by
    the serialized measure.  Raises InfeasibleError when no restart reaches
    the feasibility tolerance.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    sys = build_moment_system(n, w, wp)
    if K_max is None:
        K_max = sys.size + 2
    if K_max < 2:
        raise ValueError("K_max must be at least 2")
    prob = _Problem(sys)
    root = np.random.default_rng(seed)
    child_seeds = root.integers(0, 2 ** 63 - 1, size=restarts)

    best: Tuple[float, str, DiscreteMeasure] | None = None
    k_cycle = list(range(2, K_max + 1))
    for ri in range(restarts):
        rng = np.random.default_rng(child_seeds[ri])
        K = k_cycle[ri % len(k_cycle)]
        raw = rng.normal(size=(K, n + 1)) + 1j * rng.normal(size=(K, n + 1))
        atoms0 = raw / np.linalg.norm(raw, axis=1)[:, None]
        weights0 = rng.dirichlet(np.ones(K))
        atoms, weights, feas = _al_solve(prob, atoms0, weights0, theta, feas_tol)
        atoms, weights = _cleanup(atoms, weights)
        atoms, weights, feas = _al_solve(prob, atoms, weights, theta, feas_tol)
        if feas > feas_tol:
            continue
        measure = DiscreteMeasure(atoms, weights / weights.sum())
        value = theta_objective(measure, theta)
        key = (round(value, 12), measure.serialize())
        if best is None or key < (round(best[0], 12), best[1]):
            best = (value, measure.serialize(), measure)
    if best is None:
        raise InfeasibleError(
            f"no admissible measure found for (w,w')=({w},{wp}) at K_max={K_max}")
    return best[2], best[0]


def measure_record(n: int, w: int, wp: int, theta: float, measure: DiscreteMeasure,
                   value: float, seed: int, sys: Optional[MomentSystem] = None) -> str:
    """JSON result record for the CLI and experiment logs."""
    sys = sys or build_moment_system(n, w, wp)
    resid = float(np.linalg.norm(moment_residuals(measure, sys)))
    rec = {
        "n": n,
        "w": w,
        "w_prime": wp,
        "theta": theta,
        "value": value,
        "atoms": [[[c.real, c.imag] for c in row] for row in measure.atoms.tolist()],
        "weights": measure.weights.tolist(),
        "residual_norm": resid,
        "seed": seed,
    }
    return json.dumps(rec, sort_keys=True)
