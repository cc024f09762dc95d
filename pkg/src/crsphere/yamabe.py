"""Rayleigh-quotient minimization, bubble experiments, and CR invariance.

The quotient A(F)/B(F)^(2/p) with the order-2k covariant operator is bounded
below by the inverse sharp constant, with the extremal family attaining the
bound.  Concentrating superpositions of extremals ("bubbles") probe the
improved inequality floors: m equally weighted bubbles at a moment-admissible
configuration drive the quotient to m^(2k/Q) times the single-bubble floor.

Bubble energies are evaluated through the closed Euler-Lagrange identity
P_k u = Lambda0 V^((p-2)/p) u^(p-1) for the normalized extremal family (the
identity itself is verified spectrally at moderate concentration), which
reduces every term to integrals of products of extremals; those are computed
on panel grids geometrically refined toward the bubble poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NoConvergenceError, ZeroFunctionError
from .geometry import (
    AutomorphismParam,
    Dimension,
    HeisenbergPoint,
    QuadratureRule,
    act_on_function,
    build_quadrature,
    cayley_conformal_factor,
)
from .harmonics import (
    HarmonicBasis,
    RealHarmonicBasis,
    analyze,
    build_basis,
    build_real_basis,
)
from .operators import (
    SpectralMultiplier,
    energy_quadratic,
    gamma_ratio_sq,
    lp_norm_power,
    sharp_constant_inverse,
)
from .extremals import normalized_extremal, extremal_function
from .theta import MomentSystem, build_moment_system

# ---------------------------------------------------------------------------
# Quotients
# ---------------------------------------------------------------------------

def rayleigh_quotient(values: np.ndarray, dim: Dimension, k: int,
                      basis: HarmonicBasis, rule: QuadratureRule) -> float:
    """A(F)/B(F)^(2/p) with the 2^k-normalized operator, from sampled values."""
    p = dim.p(k)
    B = lp_norm_power(values, rule, p)
    if B <= 0:
        raise ZeroFunctionError("quotient undefined for the zero function")
    e = analyze(np.asarray(values, dtype=complex), basis, rule)
    A = energy_quadratic(e, SpectralMultiplier.sharp(dim.n, k))
    return A / B ** (2.0 / p)


def cr_invariance_check(F: Callable[[np.ndarray], np.ndarray], dim: Dimension, k: int,
                        a: AutomorphismParam, basis: HarmonicBasis,
                        rule: QuadratureRule) -> float:
    """|quotient(F^Phi) - quotient(F)|; zero up to truncation of F^Phi."""
    p = dim.p(k)
    q1 = rayleigh_quotient(F(rule.nodes), dim, k, basis, rule)
    q2 = rayleigh_quotient(act_on_function(a, F, p, dim)(rule.nodes), dim, k, basis, rule)
    return abs(q1 - q2)


# ---------------------------------------------------------------------------
# Coefficient-space minimization
# ---------------------------------------------------------------------------

@dataclass
class MinimizeOptions:
    max_iter: int = 20000
    gtol: float = 3e-5
    step0: float = 0.05
    amplitude: float = 0.3  # scale of the random start around the constant
    polish_steps: int = 6  # Newton-CG rounds between the descent phases
    symmetry_rounds: int = 3  # recentering moves quotienting the flat valley
    rule_degree: Optional[int] = None  # coarser optimization rule; final value
    # is always re-evaluated at the exact degree p * J_max


@dataclass
class MinimizeResult:
    coeffs: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    basis: RealHarmonicBasis
    rule: QuadratureRule

    def values(self, points: Optional[np.ndarray] = None) -> np.ndarray:
        pts = self.rule.nodes if points is None else points
        return self.coeffs @ self.basis.values(pts)


def minimize_quotient(n: int, k: int, J_max: int, seed: int = 0,
                      opts: Optional[MinimizeOptions] = None) -> Tuple[MinimizeResult, float]:
    """Projected gradient descent on real harmonic coefficients of A at B = 1.

    The p-norm constraint is kept exact by renormalizing after every step
    (B is homogeneous of degree p in the coefficients); steps use the
    gradient projected on the tangent of {B = 1} with Armijo backtracking.
    """
    if J_max < 2:
        raise ValueError("J_max must be at least 2")
    opts = opts or MinimizeOptions()
    dim = Dimension(n)
    p = dim.p(k)
    if abs(p - round(p)) > 1e-12:
        raise ValueError("coefficient-space minimization requires integer p")
    p = int(round(p))
    basis = build_basis(n, J_max)
    rbasis = build_real_basis(basis)
    rule = build_quadrature(n, opts.rule_degree or p * J_max)
    vals_matrix = rbasis.values(rule.nodes)  # (dim, N)
    lam = np.array([float(SpectralMultiplier.sharp(n, k).value(j, l))
                    for (j, l) in rbasis.bidegree])

    rng = np.random.default_rng(seed)
    c = rng.normal(size=rbasis.dim) * opts.amplitude
    c[0] += 1.0  # bias toward the positive cone; start remains generic

    def B_of(c):
        F = c @ vals_matrix
        return float(rule.integrate(F ** p).real) if p % 2 == 0 else \
            float(rule.integrate(np.abs(F) ** p).real)

    def normalize(c):
        b = B_of(c)
        if b <= 0:
            raise ZeroFunctionError("flat start: B vanished")
        return c / b ** (1.0 / p)

    def grad(c):
        # gradient of A on {B = 1}; c is kept retracted so A(c) is the quotient
        F = c @ vals_matrix
        gA = 2.0 * lam * c
        Fp1 = np.sign(F) * np.abs(F) ** (p - 1) if p % 2 else F ** (p - 1)
        gB = p * (vals_matrix @ (rule.weights * Fp1))
        A = float(np.sum(lam * c * c))
        return gA - (2.0 * A / p) * gB

    def descend(c, A, g, budget):
        # Barzilai-Borwein steps, retracting onto {B = 1} after each move
        c_prev = g_prev = None
        step = opts.step0
        it = 0
        while it < budget and float(np.linalg.norm(g)) >= opts.gtol:
            it += 1
            if c_prev is not None:
                dc, dg = c - c_prev, g - g_prev
                denom = float(dc @ dg)
                if denom > 0:
                    step = min(max(float(dc @ dc) / denom, 1e-12), 50.0)
            trial = step
            for _ in range(40):
                c_new = normalize(c - trial * g)
                A_new = float(np.sum(lam * c_new * c_new))
                if A_new < A + 1e-13 * abs(A):
                    c_prev, g_prev = c, g
                    c, A, g = c_new, A_new, grad(c_new)
                    break
                trial *= 0.5
            else:
                break
        return c, A, g, it

    def hessvec(c, v, h=1e-6):
        return (grad(normalize(c + h * v)) - grad(normalize(c - h * v))) / (2 * h)

    def polish(c, A, g):
        # truncated Newton on the flat valley; accepts only quotient decrease
        for _ in range(opts.polish_steps):
            gn = float(np.linalg.norm(g))
            if gn < 1e-12:
                break
            d = np.zeros_like(c)
            r = -g.copy()
            pcg = r.copy()
            rs = float(r @ r)
            for cg in range(40):
                Hp = hessvec(c, pcg)
                pHp = float(pcg @ Hp)
                if pHp <= 1e-14 * float(pcg @ pcg):
                    if cg == 0:
                        d = -g
                    break
                alpha = rs / pHp
                d += alpha * pcg
                r -= alpha * Hp
                rs_new = float(r @ r)
                if math.sqrt(rs_new) < 1e-4 * gn:
                    break
                pcg = r + (rs_new / rs) * pcg
                rs = rs_new
            t, moved = 1.0, False
            for _ in range(30):
                c_new = normalize(c + t * d)
                A_new = float(np.sum(lam * c_new * c_new))
                if A_new <= A + 1e-15 * abs(A):
                    c, A, g, moved = c_new, A_new, grad(c_new), True
                    break
                t *= 0.5
            if not moved:
                break
        return c, A, g

    def symmetry_reduce(c, A, g):
        # the quotient is flat along the conformal orbit of the minimizing
        # family; recentering jumps along the orbit to the balanced
        # representative, where the Euler-Lagrange defect of the truncated
        # iterate is smallest.  Accept only if the quotient does not go up.
        from .extremals import recenter

        def F(points):
            return c @ rbasis.values(points)

        try:
            a = recenter(F, float(p), dim, rule, tol=1e-10, max_iter=40)
        except Exception:
            return c, A, g
        acted = act_on_function(a, F, float(p), dim)(rule.nodes).real
        c_new = normalize(vals_matrix @ (rule.weights * acted))
        A_new = float(np.sum(lam * c_new * c_new))
        if A_new <= A * (1.0 + 1e-12):
            return c_new, A_new, grad(c_new)
        return c, A, g

    c = normalize(c)
    A = float(np.sum(lam * c * c))
    g = grad(c)
    it1 = 0
    for _ in range(max(1, opts.symmetry_rounds)):
        c, A, g, used = descend(c, A, g, opts.max_iter - it1)
        it1 += used
        c2, A2, g2 = symmetry_reduce(c, A, g)
        if A2 == A and np.array_equal(c2, c):
            break
        c, A, g = c2, A2, g2
    c, A, g = polish(c, A, g)
    c, A, g, it2 = descend(c, A, g, max(200, opts.max_iter // 10))
    gnorm = float(np.linalg.norm(g))
    if gnorm >= opts.gtol:
        raise NoConvergenceError(
            f"quotient descent: gradient {gnorm:.2e} after {it1 + it2} iterations",
            residual=gnorm)
    if opts.rule_degree is not None and opts.rule_degree < p * J_max:
        # report the quotient at the exact-degree rule
        exact_rule = build_quadrature(n, p * J_max)
        F = c @ rbasis.values(exact_rule.nodes)
        B = float(exact_rule.integrate(np.abs(F) ** p).real)
        c = c / B ** (1.0 / p)
        A = float(np.sum(lam * c * c))
        rule = exact_rule
    result = MinimizeResult(c, A, gnorm, it1 + it2, rbasis, rule)
    return result, A


# ---------------------------------------------------------------------------
# Bubble families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleSpec:
    """Superposition of extremal bubbles: per-bubble (center, scale, amplitude)."""

    centers: np.ndarray  # (m, n+1) complex unit rows
    deltas: np.ndarray  # (m,) in (0, 1]
    amplitudes: np.ndarray  # (m,) real
    k: int

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=complex)
        deltas = np.asarray(self.deltas, dtype=float)
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "amplitudes", amplitudes)
        if np.any(deltas <= 0) or np.any(deltas > 1):
            raise ValueError("bubble scales must lie in (0, 1]")
        if centers.shape[0] != deltas.shape[0]:
            raise ValueError("one scale per center required")

    @classmethod
    def equal(cls, centers, delta: float, k: int) -> "BubbleSpec":
        centers = np.asarray(centers, dtype=complex)
        m = centers.shape[0]
        return cls(centers, np.full(m, delta), np.ones(m), k)

    def poles(self) -> np.ndarray:
        """Extremal parameters xi_i = (1 - delta_i) center_i."""
        return (1.0 - self.deltas)[:, None] * self.centers


def bubble_family(spec: BubbleSpec, dim: Dimension) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise sum of per-bubble L^p-normalized extremals."""
    parts = [extremal_function(normalized_extremal(xi, spec.k, dim), dim)
             for xi in spec.poles()]
    amps = spec.amplitudes

    def F(points: np.ndarray) -> np.ndarray:
        out = amps[0] * parts[0](points)
        for a, g in zip(amps[1:], parts[1:]):
            out = out + a * g(points)
        return np.real(out)

    return F


# -- adapted panel integration ----------------------------------------------

def _panel_nodes(edges: np.ndarray, g: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(g)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes = (edges[:-1, None] + np.diff(edges)[:, None] * x[None, :]).ravel()
    weights = (np.diff(edges)[:, None] * w[None, :]).ravel()
    return nodes, weights


def _geometric_edges(lo: float, hi: float, scale: float, per_decade: float = 2.5) -> np.ndarray:
    """Panel edges on [lo, hi] geometrically refined toward `lo` at `scale`."""
    start = max(scale, lo + 1e-300)
    if start >= hi:
        return np.array([lo, hi])
    ratios = np.geomspace(start, hi, max(2, int(per_decade * math.log10(hi / start)) + 2))
    return np.concatenate([[lo], ratios])


def _angle_edges(scale: float, per_decade: float = 2.5) -> np.ndarray:
    """Panel edges on [0, 2 pi] refined toward 0, pi, and 2 pi (poles of
    axis-concentrated factors sit at phase 0 or pi)."""
    quarter = _geometric_edges(0.0, math.pi / 2, scale, per_decade)
    half = np.concatenate([quarter, (math.pi - quarter[::-1])[1:]])
    return np.concatenate([half, (2 * math.pi - half[::-1])[1:]])


def integrate_axis_functions(n: int, f_of_h: Callable[[np.ndarray], np.ndarray],
                             scale: float, g: int = 10) -> float:
    """Integral over the sphere of a function of the last coordinate h = eta_{n+1}.

    Uses the exact marginal: int f dxi = V int_0^1 int f(sqrt(1-w) e^(i phi))
    n w^(n-1) dw dphi/(2 pi), with panels refined toward w = 0 and phi in
    {0, pi} where bubbles along the axis concentrate at scale `scale`.
    """
    V = (2 * math.pi) ** (n + 1)
    w_edges = _geometric_edges(0.0, 1.0, min(0.01 * scale ** 2, 1e-4))
    wn, ww = _panel_nodes(w_edges, g)
    pn, pw = _panel_nodes(_angle_edges(min(0.01 * scale, 1e-3)), g)
    H = np.sqrt(1.0 - wn)[:, None] * np.exp(1j * pn)[None, :]
    dens = (n * wn ** (n - 1))[:, None] * ww[:, None] * pw[None, :] / (2 * math.pi)
    return V * float(np.sum(f_of_h(H.ravel()) * dens.ravel()))


def _adapted_grid_s3(dominant: np.ndarray, scale: float, g: int = 8,
                     phi1_panels: int = 8, per_decade: float = 2.5):
    """Nodes and weights on S^3 adapted to a spike of width `scale` at `dominant`.

    Rotates the dominant direction to (0, 1), uses Hopf coordinates
    eta = (sqrt(1-u) e^(i phi1), sqrt(u) e^(i phi2)) with measure du dphi1 dphi2,
    and refines panels toward u = 1, phi2 = 0.
    """
    x = np.asarray(dominant, dtype=complex)
    # unitary with U x = (0, 1): rows orthonormal, first row plain-dot
    # orthogonal to x so that the image has vanishing first coordinate
    v = x / np.linalg.norm(x)
    U = np.stack([np.array([-v[1], v[0]]), np.conj(v)])

    w_edges = _geometric_edges(0.0, 1.0, min(0.01 * scale ** 2, 1e-4), per_decade)
    wn, ww = _panel_nodes(w_edges, g)  # w = 1 - u toward 0
    p2n, p2w = _panel_nodes(_angle_edges(min(0.01 * scale, 1e-3), per_decade), g)
    p1n, p1w = _panel_nodes(np.linspace(0.0, 2 * math.pi, phi1_panels + 1), g)

    W, P1, P2 = np.meshgrid(wn, p1n, p2n, indexing="ij")
    WW = (ww[:, None, None] * p1w[None, :, None] * p2w[None, None, :])
    eta = np.stack([np.sqrt(W).ravel() * np.exp(1j * P1.ravel()),
                    np.sqrt(1.0 - W).ravel() * np.exp(1j * P2.ravel())], axis=1)
    return eta @ np.conj(U), WW.ravel()


def integrate_adapted_s3(f: Callable[[np.ndarray], np.ndarray], dominant: np.ndarray,
                         scale: float, g: int = 8, phi1_panels: int = 8,
                         per_decade: float = 2.5):
    pts, wts = _adapted_grid_s3(dominant, scale, g, phi1_panels, per_decade)
    vals = f(pts)
    if vals.ndim == 2:
        return wts @ vals
    return float(np.sum(vals * wts))


def _extremal_factors(spec: BubbleSpec, dim: Dimension):
    """Per-bubble (pole, exponent, normalization constant) for |1-xi.conj(eta)|^-s."""
    p = dim.p(spec.k)
    s = 0.5 * (dim.Q - 2 * spec.k)
    out = []
    for xi in spec.poles():
        C = dim.volume ** (-1.0 / p) * (1.0 - np.vdot(xi, xi).real) ** (s / 2.0)
        out.append((xi, s, C))
    return out


def _product_integral(spec: BubbleSpec, dim: Dimension, powers: Sequence[int],
                      extra: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                      coarse: bool = False):
    """integral of prod_i u_i^powers[i] (times optional smooth factors).

    Dispatches to the axis-adapted 2D reduction when every active bubble sits
    on the +/- last-coordinate axis, otherwise to the adapted S^3 grid
    (CR dimension 1 only).  `extra` may return a vector or an (N, m) stack of
    smooth factors; the return matches (scalar or length-m array).
    """
    powers = np.asarray(powers)
    active = np.nonzero(powers)[0]
    facts = _extremal_factors(spec, dim)
    scale = float(np.min(spec.deltas[active]))
    nv = dim.n + 1
    axis = np.zeros(nv)
    axis[-1] = 1.0
    on_axis = all(abs(abs(np.vdot(axis, spec.centers[i])) - 1.0) < 1e-13 for i in active)

    if on_axis and extra is None:
        signs = [np.sign(np.real(spec.centers[i][-1])) for i in active]

        def f_of_h(h):
            out = np.ones_like(h, dtype=float)
            for i, sg in zip(active, signs):
                xi, s, C = facts[i]
                rho = np.linalg.norm(xi)
                out *= (C / np.abs(1.0 - sg * rho * np.conj(h)) ** s) ** powers[i]
            return out

        return integrate_axis_functions(dim.n, f_of_h, scale)

    if dim.n != 1:
        raise NotImplementedError("off-axis bubble integrals implemented for n = 1")
    dom = active[int(np.argmax(powers[active]))]

    def f(pts):
        out = np.ones(pts.shape[0])
        for i in active:
            xi, s, C = facts[i]
            out *= (C / np.abs(1.0 - np.conj(pts) @ xi) ** s) ** powers[i]
        if extra is not None:
            ex = extra(pts)
            return ex * out[:, None] if ex.ndim == 2 else ex * out
        return out

    if coarse:
        return integrate_adapted_s3(f, spec.centers[dom], scale, g=6,
                                    phi1_panels=6, per_decade=1.5)
    return integrate_adapted_s3(f, spec.centers[dom], scale)


def _congruence_key(spec: BubbleSpec, powers: Sequence[int]):
    """Cache key invariant under relabelings realized by unitaries.

    Valid for vertex-transitive configurations (antipodal pairs, regular
    simplexes) where equal inner-product patterns imply congruence.
    """
    active = [i for i, q in enumerate(powers) if q]
    rows = []
    for i in active:
        dots = tuple(sorted((round(abs(np.vdot(spec.centers[i], spec.centers[j])), 12),
                             powers[j]) for j in active if j != i))
        rows.append((powers[i], round(spec.deltas[i], 14), dots))
    return tuple(sorted(rows))


def _compositions(total: int, m: int):
    if m == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, m - 1):
            yield (first,) + rest


def bubble_quotient(spec: BubbleSpec, dim: Dimension, symmetric: bool = False) -> dict:
    """Rayleigh quotient of the bubble superposition through the EL identity.

    A = Lambda0 V^((p-2)/p) sum_{i,j} c_i c_j int u_i u_j^(p-1); B expands
    multinomially (p must be an even integer).  With `symmetric` the
    configuration is taken vertex-transitive and congruent product integrals
    are computed once.  Returns the quotient with A, B, and the cross terms.
    """
    k = spec.k
    p = dim.p(k)
    if abs(p - round(p)) > 1e-12 or int(round(p)) % 2:
        raise ValueError("bubble quotient requires even integer p")
    p = int(round(p))
    m = spec.centers.shape[0]
    c = spec.amplitudes
    lam0 = 2.0 ** k * float(gamma_ratio_sq(dim.n, k))
    scaleA = lam0 * dim.volume ** ((p - 2.0) / p)

    cache: dict = {}

    def product_integral(pw) -> float:
        if not symmetric:
            return float(_product_integral(spec, dim, pw))
        key = _congruence_key(spec, pw)
        if key not in cache:
            cache[key] = float(_product_integral(spec, dim, pw))
        return cache[key]

    pair_cross = {}
    A = 0.0
    for i in range(m):
        for j in range(m):
            if i == j:
                A += c[i] * c[j] * scaleA
                continue
            pw = [0] * m
            pw[i] += 1
            pw[j] += p - 1
            I = product_integral(pw)
            pair_cross[(i, j)] = I
            A += c[i] * c[j] * scaleA * I

    B = 0.0
    for comp in _compositions(p, m):
        coef = math.factorial(p)
        for q in comp:
            coef //= math.factorial(q)
        amp = float(np.prod([ci ** qi for ci, qi in zip(c, comp)]))
        if coef == 0 or amp == 0.0:
            continue
        if len([q for q in comp if q]) == 1:
            I = 1.0
        else:
            I = product_integral(comp)
        B += coef * amp * I
    quotient = A / B ** (2.0 / p)
    return {"quotient": quotient, "A": A, "B": B, "cross": pair_cross,
            "floor_single": sharp_constant_inverse(dim.n, k)}


def two_bubble_quotient(n: int, k: int, delta: float) -> dict:
    """Antipodal two-bubble experiment; limit 2^(k/(n+1)) C^{-1} as delta -> 0."""
    dim = Dimension(n)
    nv = n + 1
    north = np.zeros(nv, dtype=complex)
    north[-1] = 1.0
    spec = BubbleSpec.equal(np.stack([north, -north]), delta, k)
    out = bubble_quotient(spec, dim, symmetric=True)
    out["floor_two"] = 2.0 ** (k / (n + 1.0)) * sharp_constant_inverse(n, k)
    return out


def simplex_bubble_quotient(k: int, delta: float) -> dict:
    """Three bubbles at the regular simplex on S^3; limit 3^(2k/Q) C^{-1}."""
    from .theta import simplex_configuration

    dim = Dimension(1)
    conf = simplex_configuration(1)
    spec = BubbleSpec.equal(conf.atoms, delta, k)
    out = bubble_quotient(spec, dim, symmetric=True)
    out["floor_simplex"] = 3.0 ** (2.0 * k / dim.Q) * sharp_constant_inverse(1, k)
    return out


# ---------------------------------------------------------------------------
# Moment gate and the improved-constant probe
# ---------------------------------------------------------------------------

def bubble_moment_residuals(spec: BubbleSpec, dim: Dimension, sys: MomentSystem) -> np.ndarray:
    """Moments of |F|^p dxi for the bubble superposition against the system.

    Expands |F|^p multinomially (even p); product terms are grouped by their
    dominant bubble and integrated together on one adapted grid per group.
    Implemented through the S^3 grids, so restricted to n = 1.
    """
    if dim.n != 1:
        raise NotImplementedError("bubble moment gate implemented for n = 1")
    p = dim.p(spec.k)
    if abs(p - round(p)) > 1e-12 or int(round(p)) % 2:
        raise ValueError("moment gate requires even integer p")
    p = int(round(p))
    m = spec.centers.shape[0]
    c = spec.amplitudes
    keys = sys.mono_keys
    facts = _extremal_factors(spec, dim)

    groups: dict = {}
    for comp in _compositions(p, m):
        coef = math.factorial(p)
        for q in comp:
            coef //= math.factorial(q)
        amp = float(np.prod([ci ** qi for ci, qi in zip(c, comp)]))
        if coef == 0 or amp == 0.0:
            continue
        dom = int(np.argmax(comp))
        groups.setdefault(dom, []).append((coef * amp, comp))

    totals = np.zeros(2 * len(keys) + 1)
    for dom, terms in groups.items():
        scale = float(np.min(spec.deltas))
        pts, wts = _adapted_grid_s3(spec.centers[dom], scale, g=6,
                                    phi1_panels=6, per_decade=1.5)
        base = np.stack([
            (C / np.abs(1.0 - np.conj(pts) @ xi) ** sexp)
            for (xi, sexp, C) in facts])
        stack = np.ones((pts.shape[0], 2 * len(keys) + 1))
        conj = np.conj(pts)
        for t, (a, b) in enumerate(keys):
            v = np.ones(pts.shape[0], dtype=complex)
            for i, e in enumerate(a):
                if e:
                    v *= pts[:, i] ** e
            for i, e in enumerate(b):
                if e:
                    v *= conj[:, i] ** e
            stack[:, 2 * t] = v.real
            stack[:, 2 * t + 1] = v.imag
        for weight, comp in terms:
            dens = np.ones(pts.shape[0])
            for i, q in enumerate(comp):
                if q:
                    dens = dens * base[i] ** q
            totals += weight * ((wts * dens) @ stack)
    mono_integrals = totals[0:-1:2] + 1j * totals[1:-1:2]
    moments = mono_integrals / totals[-1]
    return np.real(sys.combo @ moments) - sys.shift


def improved_constant_probe(n: int, k: int, w: int, wp: int, deltas: Sequence[float],
                            gate_scale: float = 10.0) -> dict:
    """Tabulate bubble quotients against the Theta-scaled floor.

    Configurations come from the optimal atom sets of the moment problem:
    two antipodal bubbles for first-moment systems, the regular simplex for
    (1,1).  Configurations failing the moment gate (residual above
    gate_scale * delta) are reported as rejected.
    """
    from .theta import simplex_configuration

    dim = Dimension(n)
    theta = (dim.Q - 2.0 * k) / dim.Q
    sys = build_moment_system(n, w, wp)
    if (w, wp) in ((1, 0), (0, 1)):
        m_atoms = 2
        nv = n + 1
        north = np.zeros(nv, dtype=complex)
        north[-1] = 1.0
        centers = np.stack([north, -north])
        theta_value = 2.0 ** (1.0 - theta)
    elif (w, wp) == (1, 1):
        if n != 1:
            raise NotImplementedError("simplex bubble probe implemented for n = 1")
        centers = simplex_configuration(n).atoms
        m_atoms = centers.shape[0]
        theta_value = (n + 2.0) ** (1.0 - theta)
    else:
        raise NotImplementedError("probe configurations exist for (1,0) and (1,1)")

    floor = theta_value * sharp_constant_inverse(n, k)
    rows = []
    for delta in deltas:
        spec = BubbleSpec.equal(centers, delta, k)
        gate = float(np.linalg.norm(bubble_moment_residuals(spec, dim, sys)))
        admissible = gate < gate_scale * delta
        q = bubble_quotient(spec, dim, symmetric=True)["quotient"] if admissible else float("nan")
        rows.append({"delta": delta, "gate_residual": gate, "admissible": admissible,
                     "quotient": q, "gap_to_floor": (q - floor) / floor if admissible else float("nan")})
    min_q = min((r["quotient"] for r in rows if r["admissible"]), default=float("nan"))
    return {"n": n, "k": k, "w": w, "wp": wp, "theta": theta, "floor": floor,
            "rows": rows, "min_quotient": min_q}


def single_bubble_gate_residual(n: int, k: int, delta: float, w: int = 1, wp: int = 0) -> float:
    """Moment-gate residual of one off-center bubble (should be rejected)."""
    dim = Dimension(n)
    sys = build_moment_system(n, w, wp)
    nv = n + 1
    north = np.zeros(nv, dtype=complex)
    north[-1] = 1.0
    spec = BubbleSpec.equal(north[None, :], delta, k)
    return float(np.linalg.norm(bubble_moment_residuals(spec, dim, sys)))


# ---------------------------------------------------------------------------
# Heisenberg-side bubble (equivalence of the two realizations)
# ---------------------------------------------------------------------------

def heisenberg_bubble(delta: float, dim: Dimension, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Transport of the dilated flat-model extremal to the sphere.

    G(z,t) = (2/((1+|z|^2)^2+t^2))^((Q-2k)/4) concentrated by the anisotropic
    dilation at scale delta, carried to the sphere with the conformal weight
    of the inverse Cayley transform.  Equals (up to one normalization
    constant) the extremal with pole (1-delta^2)/(1+delta^2) at the north pole.
    """
    p = dim.p(k)
    s4 = (dim.Q - 2 * k) / 4.0
    npow = dim.n + 1

    def F(points: np.ndarray) -> np.ndarray:
        last = points[:, -1]
        denom = 1.0 + last
        z = points[:, :-1] / denom[:, None]
        t = np.imag(2.0 / denom)
        r2 = np.sum(np.abs(z) ** 2, axis=1)
        lam = 2.0 / ((1.0 + r2) ** 2 + t ** 2)
        zd = np.abs(z) ** 2 / delta ** 2
        td = t / delta ** 2
        g = delta ** (-2.0 * s4) * (2.0 / ((1.0 + np.sum(np.abs(z / delta) ** 2, axis=1)) ** 2
                                           + td ** 2)) ** s4
        return g * (2.0 * lam ** npow) ** (-1.0 / p)

    return F
