"""Morse indices, kernels and unstable modes of the linearized operators.

Around a real critical point phi the linearization splits into

    L1 = -Delta_beta + omega - p phi^(p-1),     L2 = -Delta_beta + omega - phi^(p-1),

both with the delta-prime vertex condition.  Negative eigenvalues are
counted in two independent ways:

* shooting: on each edge an eigenfunction is a multiple of the decaying
  solution U(y; lam) of -U'' + (omega - c A sech^2(s y)) U = lam U, taken at
  y = x + a_j.  The vertex conditions reduce to a determinant whose factors
  are U'(a_g) (one per group of equal offsets, multiplicity = group size
  minus one) and a coupling bracket (multiplicity one).  Sign changes of
  these factors in lam are counted.  The bracket is the pole-free form of
  k/F_1 + (N-k)/F_N - beta with F = U'/U.
* inertia: Sylvester's law applied to the finite-element matrix K of the
  quadratic form; the mass matrix is positive definite, so the number of
  negative pivots of K equals the number of negative generalized
  eigenvalues.

Potentials are integrated exactly (Gauss quadrature of the analytic
profile), so the discrete eigenvalues are Rayleigh-Ritz upper bounds of
the continuous ones and a zero mode never turns into a spurious negative
one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import PreconditionError, Unresolved
from .graph_core import FormMatrices, Grid, ModelParams, assemble_forms, field_to_dofs, inertia
from .profiles import ProfileSpec

SCAN_POINTS = 2000
RENORM_EVERY = 50


class _Pole:
    """Marker returned when u(a) vanishes and u'/u is undefined."""

    def __repr__(self):
        return "Pole"


POLE = _Pole()


def _coupling(which: str, p: float) -> float:
    if which in ("L1", 1, "1"):
        return p
    if which in ("L2", 2, "2"):
        return 1.0
    raise PreconditionError(f"which must be 'L1' or 'L2', got {which!r}")


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def _integrate_down(params: ModelParams, c: float, lams: np.ndarray, stops, y_right: float,
                    step: float):
    """Decaying solution of the shooting equation, integrated from y_right down.

    Returns {stop: (U, U')} for each stop location, each array over ``lams``.
    Between renormalizations (u, u') is divided by a positive factor, so
    signs, and ratios within one lam, are unchanged.
    """
    om = params.omega
    depth = c * (params.p + 1) * om / 2.0
    s = (params.p - 1) * math.sqrt(om) / 2.0
    lams = np.asarray(lams, dtype=float)
    kappa = np.sqrt(om - lams)
    u = np.ones_like(lams)
    du = -kappa
    y = y_right
    out = {}
    count = 0
    for stop in sorted(stops, reverse=True):
        length = y - stop
        n = max(int(math.ceil(length / step)), 1)
        hh = -length / n
        ys = y + hh * np.arange(n + 1)
        w_full = depth * _sech2(s * ys)
        w_half = depth * _sech2(s * (ys[:-1] + hh / 2))
        base = om - lams
        for i in range(n):
            q0 = base - w_full[i]
            qh = base - w_half[i]
            q1 = base - w_full[i + 1]
            k1u, k1d = du, q0 * u
            u2 = u + 0.5 * hh * k1u
            d2 = du + 0.5 * hh * k1d
            k2u, k2d = d2, qh * u2
            u3 = u + 0.5 * hh * k2u
            d3 = du + 0.5 * hh * k2d
            k3u, k3d = d3, qh * u3
            u4 = u + hh * k3u
            d4 = du + hh * k3d
            k4u, k4d = d4, q1 * u4
            u = u + hh / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
            du = du + hh / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
            count += 1
            if count % RENORM_EVERY == 0:
                scale = np.maximum(np.abs(u), np.abs(du))
                u = u / scale
                du = du / scale
        y = stop
        scale = np.maximum(np.abs(u), np.abs(du))
        u, du = u / scale, du / scale
        out[stop] = (u.copy(), du.copy())
    return out


def _right_end(params: ModelParams, offsets, lam_max: float) -> float:
    return max(max(offsets), 0.0) + 40.0 / math.sqrt(params.omega - lam_max)


def shoot_log_derivative(lam: float, a: float, which: str, params: ModelParams,
                         step_scale: float = 0.005):
    """F(lam) = U'(a)/U(a) for the decaying solution, or POLE if U(a) ~ 0."""
    if lam > 0:
        raise PreconditionError("shooting is defined for lam <= 0")
    c = _coupling(which, params.p)
    kappa = math.sqrt(params.omega - lam)
    s = (params.p - 1) * params.sqrt_omega / 2.0
    step = step_scale / max(kappa, s)
    y_right = _right_end(params, [a], lam)
    u, du = _integrate_down(params, c, np.array([lam]), [a], y_right, step)[a]
    u, du = float(u[0]), float(du[0])
    if abs(u) < 1e-13 * math.hypot(u, du):
        return POLE
    return du / u


@dataclass
class SpectralReport:
    n1: int
    n2: int
    ker1_dim: int
    ker2_dim: int
    method: str
    lambda_unstable: List[float] = field(default_factory=list)
    eigenvalues1: List[float] = field(default_factory=list)
    eigenvalues2: List[float] = field(default_factory=list)

    def as_dict(self):
        return {"method": self.method, "n1": self.n1, "n2": self.n2,
                "ker1_dim": self.ker1_dim, "ker2_dim": self.ker2_dim,
                "lambda_unstable": list(self.lambda_unstable),
                "eigenvalues1": list(self.eigenvalues1),
                "eigenvalues2": list(self.eigenvalues2)}


def lambda_floor(params: ModelParams) -> float:
    """Lower end of the scan; below it L1 and L2 have no spectrum."""
    return -(1.0 + params.p * (params.p + 1) * params.omega / 2.0)


class _DeterminantFactors:
    """Factors of the vertex determinant for one operator and one profile."""

    def __init__(self, spec: ProfileSpec, which: str, step_scale: float = 0.05):
        self.spec = spec
        self.params = spec.params
        self.c = _coupling(which, self.params.p)
        self.groups = spec.groups()
        self.offsets = [a for a, _ in self.groups]
        lam_min = lambda_floor(self.params)
        kappa_max = math.sqrt(self.params.omega - lam_min)
        s = (self.params.p - 1) * self.params.sqrt_omega / 2.0
        self.step = step_scale / max(kappa_max, s)
        self.multiplicities = [m - 1 for _, m in self.groups] + [1]

    def __call__(self, lams, lam_max: float = 0.0) -> np.ndarray:
        """Factor values, shape (n_factors, len(lams))."""
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        y_right = _right_end(self.params, self.offsets, lam_max)
        vals = _integrate_down(self.params, self.c, lams, set(self.offsets), y_right, self.step)
        beta = self.params.beta
        if len(self.groups) == 1:
            u, du = vals[self.offsets[0]]
            N = self.params.N
            return np.vstack([du, N * u - beta * du])
        (a1, k), (aN, rest) = self.groups
        u1, d1 = vals[a1]
        uN, dN = vals[aN]
        bracket = k * u1 * dN + rest * uN * d1 - beta * dN * d1
        return np.vstack([d1, dN, bracket])


def _refine(factors: _DeterminantFactors, rows, lo, hi, flo, fhi, tol, max_iter=200):
    """Batched Illinois iteration on brackets; returns root estimates."""
    lo, hi, flo, fhi = (np.array(v, dtype=float) for v in (lo, hi, flo, fhi))
    rows = np.asarray(rows, dtype=int)
    if lo.size == 0:
        return lo
    side = np.zeros(lo.size, dtype=int)
    for it in range(max_iter):
        active = (hi - lo) > tol
        if not np.any(active):
            break
        x = (lo * fhi - hi * flo) / (fhi - flo)
        width = hi - lo
        bad = ~np.isfinite(x) | (x <= lo + 0.01 * width) | (x >= hi - 0.01 * width)
        if it % 3 == 2:
            bad[:] = True
        x = np.where(bad, 0.5 * (lo + hi), x)
        idx = np.nonzero(active)[0]
        fx_all = factors(x[idx], lam_max=float(np.max(hi)))
        fx = fx_all[rows[idx], np.arange(idx.size)]
        for j, i in enumerate(idx):
            v = fx[j]
            if v == 0.0:
                lo[i] = hi[i] = x[i]
                continue
            if np.sign(v) == np.sign(flo[i]):
                lo[i], flo[i] = x[i], v
                if side[i] == -1:
                    fhi[i] *= 0.5
                side[i] = -1
            else:
                hi[i], fhi[i] = x[i], v
                if side[i] == 1:
                    flo[i] *= 0.5
                side[i] = 1
    if np.any(hi - lo > tol):
        raise Unresolved("could not isolate a sign change of the vertex determinant")
    return 0.5 * (lo + hi)


def _count_by_shooting(spec: ProfileSpec, which: str, tau: float):
    """(count, eigenvalue estimates, near-kernel count) for one operator."""
    params = spec.params
    factors = _DeterminantFactors(spec, which)
    lam_min = lambda_floor(params)
    delta = 1e-8 * abs(lam_min)
    lams = np.linspace(lam_min, -delta, SCAN_POINTS)
    vals = factors(lams)
    rows, lo, hi, flo, fhi = [], [], [], [], []
    for r in range(vals.shape[0]):
        sgn = np.sign(vals[r])
        change = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        for i in change:
            rows.append(r)
            lo.append(lams[i]); hi.append(lams[i + 1])
            flo.append(vals[r, i]); fhi.append(vals[r, i + 1])
    roots = _refine(factors, rows, lo, hi, flo, fhi, tol=1e-10 * abs(lam_min))
    mult = factors.multiplicities
    eig = []
    for r, lam in zip(rows, roots):
        eig.extend([float(lam)] * mult[r])
    # near-kernel: sign changes across (-tau, tau)
    edge = factors(np.array([-tau, tau]), lam_max=tau)
    ker = sum(m for r, m in enumerate(mult) if np.sign(edge[r, 0]) * np.sign(edge[r, 1]) < 0)
    return len(eig), sorted(eig), ker


def kernel_tolerance(grid: Grid) -> float:
    """tau_0 = 10 h^2."""
    return 10.0 * grid.h ** 2


def morse_by_shooting(spec: ProfileSpec, points_per_edge: int = 1024) -> SpectralReport:
    """Morse indices of L1 and L2 from sign changes of the vertex determinant."""
    tau = kernel_tolerance(spec.default_grid(points_per_edge))
    n1, e1, k1 = _count_by_shooting(spec, "L1", tau)
    n2, e2, k2 = _count_by_shooting(spec, "L2", tau)
    return SpectralReport(n1, n2, k1, k2, "shooting", eigenvalues1=e1, eigenvalues2=e2)


@dataclass(frozen=True)
class OperatorPair:
    K1: FormMatrices
    K2: FormMatrices
    profile: ProfileSpec

    @property
    def grid(self) -> Grid:
        return self.K1.grid


def operator_pair(spec: ProfileSpec, points_per_edge: int = 1024,
                  grid: Optional[Grid] = None) -> OperatorPair:
    """Finite-element forms of L1 and L2 (vertex term and omega included)."""
    params = spec.params
    grid = grid or spec.default_grid(points_per_edge)
    om, p = params.omega, params.p
    K1 = assemble_forms(params, grid, lambda x: om - p * spec.power(x))
    K2 = assemble_forms(params, grid, lambda x: om - spec.power(x))
    return OperatorPair(K1, K2, spec)


def morse_by_inertia(spec: ProfileSpec, points_per_edge: int = 1024) -> SpectralReport:
    """Morse indices as numbers of negative LDL^T pivots of K1 and K2."""
    if points_per_edge < 512:
        raise PreconditionError("morse_by_inertia needs at least 512 points per edge")
    pair = operator_pair(spec, points_per_edge)
    n1 = inertia(pair.K1).negative
    n2 = inertia(pair.K2).negative
    ker = kernel_report(spec, points_per_edge)
    return SpectralReport(n1, n2, ker.ker1_dim, ker.ker2_dim, "inertia")


@dataclass
class KernelReport:
    ker1_dim: int
    ker2_dim: int
    overlaps: List[float]
    eigenvalues1: List[float]
    eigenvalues2: List[float]
    tolerance: float

    def as_dict(self):
        return {"ker1_dim": self.ker1_dim, "ker2_dim": self.ker2_dim,
                "overlaps": list(self.overlaps), "eigenvalues1": list(self.eigenvalues1),
                "eigenvalues2": list(self.eigenvalues2), "tolerance": self.tolerance}


def _near_zero_eigs(forms: FormMatrices, count: int):
    n = forms.dof_count
    count = min(count, n - 2)
    v0 = np.ones(n)  # fixed start vector keeps ARPACK output reproducible
    vals, vecs = spla.eigsh(forms.K.tocsc(), k=count, M=forms.Mmass.tocsc(), sigma=0.0,
                            which="LM", v0=v0)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _extrapolated(coarse, fine):
    """Pair eigenvalues of two grids and apply (4 fine - coarse)/3."""
    out = []
    for lam in coarse:
        j = int(np.argmin(np.abs(fine - lam)))
        out.append((4.0 * fine[j] - lam) / 3.0)
    return np.asarray(out)


def kernel_report(spec: ProfileSpec, points_per_edge: int = 512) -> KernelReport:
    """Near-kernel dimensions of L1 and L2 and overlaps of ker L2 with the profile.

    Eigenvalues closest to zero are computed on the grid and on its
    two-fold refinement; their O(h^2) error is removed by Richardson
    extrapolation before comparing with tau_0 = 10 h^2 of the finer grid.
    """
    count = spec.params.N + 3
    coarse_grid = spec.default_grid(points_per_edge)
    fine_grid = coarse_grid.refined(2)
    coarse = operator_pair(spec, grid=coarse_grid)
    fine = operator_pair(spec, grid=fine_grid)
    tau = kernel_tolerance(fine_grid)
    dims, eigs = [], []
    overlaps: List[float] = []
    phi = field_to_dofs(spec.field(fine_grid))
    for name in ("K1", "K2"):
        vc, _ = _near_zero_eigs(getattr(coarse, name), count)
        vf, vecs = _near_zero_eigs(getattr(fine, name), count)
        ext = _extrapolated(vc, vf)
        near = np.abs(ext) < tau
        dims.append(int(np.sum(near)))
        eigs.append([float(v) for v in ext])
        if name == "K2":
            Mm = fine.K2.Mmass
            for i in np.nonzero(near)[0]:
                j = int(np.argmin(np.abs(vf - vc[i])))
                v = vecs[:, j]
                cos = abs(v @ (Mm @ phi)) / math.sqrt((v @ (Mm @ v)) * (phi @ (Mm @ phi)))
                overlaps.append(float(cos))
    return KernelReport(dims[0], dims[1], overlaps, eigs[0], eigs[1], tau)


def _deflate_profile_mode(pair: OperatorPair, K2: np.ndarray, Mm: np.ndarray) -> np.ndarray:
    """Remove the discretization error of the L2 zero mode.

    The continuous L2 annihilates the profile exactly; its Galerkin
    counterpart has a small positive eigenvalue instead.  That eigenvalue is
    set to zero along its own eigenvector so the discrete linearization
    keeps the exact zero mode of the continuous one.
    """
    forms = pair.K2
    vals, vecs = _near_zero_eigs(forms, 3)
    phi = field_to_dofs(pair.profile.field(pair.grid))
    Mphi = Mm @ phi
    best, best_cos = None, 0.0
    for lam, v in zip(vals, vecs.T):
        cos = abs(v @ Mphi) / math.sqrt((v @ (Mm @ v)) * (phi @ Mphi))
        if cos > best_cos:
            best, best_cos = (lam, v), cos
    if best is None or best_cos < 0.99:
        return K2
    lam, v = best
    Mv = Mm @ v / math.sqrt(v @ (Mm @ v))
    return K2 - lam * np.outer(Mv, Mv)


def unstable_modes(spec: ProfileSpec, points_per_edge: int = 256,
                   return_all: bool = False):
    """Growth rates Re(lam) > tau_0 of the linearized flow, largest first.

    Eigenvalues mu of (M^-1 K2)(M^-1 K1) are computed densely; each gives
    lam = sqrt(-mu) of -L2 L1 w = lam^2 w.  Real negative mu give real growth
    rates; complex mu contribute the real part of their root.
    """
    if points_per_edge > 512:
        raise PreconditionError("dense eigen-solve is capped at 512 points per edge")
    pair = operator_pair(spec, points_per_edge)
    Mm = pair.K1.Mmass.toarray()
    K1 = pair.K1.K.toarray()
    K2 = _deflate_profile_mode(pair, pair.K2.K.toarray(), Mm)
    chol = scipy.linalg.cho_factor(Mm)
    A1 = scipy.linalg.cho_solve(chol, K1)
    A2 = scipy.linalg.cho_solve(chol, K2)
    mu = scipy.linalg.eigvals(A2 @ A1)
    lam = np.sqrt(-mu.astype(complex))
    tau = kernel_tolerance(pair.grid)
    rates = np.sort(lam.real[lam.real > tau])[::-1]
    if return_all:
        return [float(r) for r in rates], mu
    return [float(r) for r in rates]


def _constrained_negatives(forms: FormMatrices, c: np.ndarray) -> int:
    """Negative count of K restricted to {v : c . v = 0} (bordered inertia)."""
    n = inertia(forms).negative
    z = spla.spsolve(forms.K.tocsc(), c)
    return n - 1 if float(c @ z) < 0 else n


def grillakis_lower_bound(spec: ProfileSpec, points_per_edge: int = 512) -> int:
    """n(P L1 P) - n(P L2^-1 P), P the L^2 projection orthogonal to the profile.

    Both counts use the inertia of a matrix restricted to a hyperplane:
    n(K|c-perp) = n(K) - 1 if c^T K^-1 c < 0 and n(K) otherwise.  Because the
    profile spans ker L2, P L2^-1 P on the hyperplane is the inverse of L2
    restricted to it and has the same number of negative eigenvalues.
    """
    pair = operator_pair(spec, points_per_edge)
    c = pair.K1.Mmass @ field_to_dofs(spec.field(pair.grid))
    return _constrained_negatives(pair.K1, c) - _constrained_negatives(pair.K2, c)
