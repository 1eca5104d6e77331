"""Grids, fields, norms and quadratic forms on a truncated star graph.

A star graph is N half-lines glued at one vertex.  Each half-line is cut
at x = L and sampled on M equally spaced nodes, node 0 being the vertex.
Functions carry one value per edge at the vertex (no continuity across
edges), and the vertex coupling enters only through the rank-one term
(1/beta) |sum_j v_j(0)|^2 of the quadratic form

    F_beta(v) = ||v'||^2 + (1/beta) |sum_j v_j(0)|^2 .

Finite-element matrices use piecewise-linear elements with the outer node
x = L removed (homogeneous Dirichlet condition).  Reported functional
values are computed separately, by high-order differences and composite
Simpson quadrature on node samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .errors import PreconditionError

TAIL_TOL = 1e-14
GAUSS_POINTS = 6


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: nonlinearity p, frequency omega, coupling beta, N edges."""

    p: float
    omega: float
    beta: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.p) and self.p > 1):
            raise PreconditionError(f"p must be > 1, got {self.p}")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise PreconditionError(f"omega must be > 0, got {self.omega}")
        if not np.isfinite(self.beta) or self.beta == 0:
            raise PreconditionError("beta must be a nonzero finite number")
        if int(self.N) != self.N or self.N < 2:
            raise PreconditionError(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def omega_floor(self) -> float:
        return self.N**2 / self.beta**2

    @property
    def omega_star(self) -> float:
        return (self.p + 1) / (self.p - 1) * self.N**2 / self.beta**2

    @property
    def sqrt_omega(self) -> float:
        return math.sqrt(self.omega)

    @property
    def t_symmetric(self) -> float:
        """tanh parameter N/(|beta| sqrt(omega)) of the symmetric profile."""
        return self.N / (abs(self.beta) * self.sqrt_omega)

    def with_omega(self, omega: float) -> "ModelParams":
        return ModelParams(self.p, omega, self.beta, self.N)

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.p, self.omega, beta, self.N)

    def require_symmetric(self):
        if not self.omega > self.omega_floor:
            raise PreconditionError(
                f"omega={self.omega} must exceed N^2/beta^2={self.omega_floor}")

    def require_asymmetric(self):
        if not self.omega > self.omega_star:
            raise PreconditionError(
                f"omega={self.omega} must exceed omega_star={self.omega_star}")


@dataclass(frozen=True)
class Grid:
    """Shared uniform grid on every edge: M nodes on [0, L]."""

    N: int
    L: float
    M: int

    def __post_init__(self):
        if self.M < 3:
            raise PreconditionError("a grid needs at least 3 points per edge")
        if not self.L > 0:
            raise PreconditionError("L must be positive")
        if self.N < 2:
            raise PreconditionError("N must be >= 2")

    @property
    def h(self) -> float:
        return self.L / (self.M - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.M)

    @property
    def dof_count(self) -> int:
        return self.N * (self.M - 1)

    def refined(self, factor: int = 2) -> "Grid":
        """Grid on the same domain with the spacing divided by ``factor``."""
        return Grid(self.N, self.L, (self.M - 1) * factor + 1)

    def tail_ok(self, omega: float) -> bool:
        return math.exp(-math.sqrt(omega) * self.L) < TAIL_TOL


def make_grid(params: ModelParams, points_per_edge: int,
              t_max: Optional[float] = None) -> Grid:
    """Grid long enough that profile tails at the outer end are below 1e-14.

    ``t_max`` is the largest tanh parameter among the profiles that will
    live on the grid; by default the symmetric one is used.  For repulsive
    coupling the profile peak sits at 2 artanh(t)/((p-1) sqrt(omega)) and
    the length is measured from there.
    """
    if not isinstance(params, ModelParams):
        raise PreconditionError("params must be a ModelParams instance")
    if points_per_edge < 64:
        raise PreconditionError("points_per_edge must be >= 64")
    p, sw = params.p, params.sqrt_omega
    if t_max is None:
        t_max = min(params.t_symmetric, 0.999)
    t_max = float(np.clip(t_max, 0.0, 1.0 - 1e-15))
    width = 2.0 / ((p - 1) * sw)
    shift = width * safe_artanh(t_max)
    # the first term alone decays too slowly when p > 3, hence the second
    L = max(width * (safe_artanh(t_max) + 35.0), shift + 35.0 / sw)
    L = math.ceil(L * 10.0) / 10.0
    grid = Grid(params.N, L, int(points_per_edge))
    if not grid.tail_ok(params.omega):
        raise PreconditionError("grid too short for the tail tolerance")
    return grid


def safe_artanh(t):
    """artanh via 0.5 log((1+t)/(1-t)) with t clipped below 1 - 1e-15."""
    t = np.minimum(np.asarray(t, dtype=float), 1.0 - 1e-15)
    out = 0.5 * np.log((1.0 + t) / (1.0 - t))
    return float(out) if out.ndim == 0 else out


class GraphField:
    """A (complex or real) function sampled on every edge of a grid.

    ``values`` has shape (N, M); row j is edge j and column 0 the vertex.
    The array is stored read-only.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, copy=True)
        if values.shape != (grid.N, grid.M):
            raise PreconditionError(
                f"values shape {values.shape} does not match grid {(grid.N, grid.M)}")
        if not np.iscomplexobj(values):
            values = values.astype(float)
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @property
    def vertex_values(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(self.values.imag)

    def with_values(self, values) -> "GraphField":
        return GraphField(self.grid, values)

    def __add__(self, other):
        if isinstance(other, GraphField):
            _same_grid(self, other)
            return GraphField(self.grid, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GraphField):
            _same_grid(self, other)
            return GraphField(self.grid, self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return GraphField(self.grid, c * self.values)
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"GraphField(N={self.grid.N}, M={self.grid.M}, L={self.grid.L})"


def _same_grid(f: GraphField, g: GraphField):
    if f.grid != g.grid:
        raise PreconditionError("fields live on different grids")


def zero_field(grid: Grid, complex_valued: bool = False) -> GraphField:
    dtype = complex if complex_valued else float
    return GraphField(grid, np.zeros((grid.N, grid.M), dtype=dtype))


# ---------------------------------------------------------------------------
# quadrature and differences on node samples

def edge_integral(values: np.ndarray, h: float) -> np.ndarray:
    """Composite Simpson integral of each row."""
    return simpson(values, dx=h, axis=-1)


def fd_weights(z: float, xs, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at z (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs) - 1
    c = np.zeros((n + 1, m + 1))
    c1 = 1.0
    c4 = xs[0] - z
    c[0, 0] = 1.0
    for i in range(1, n + 1):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - z
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def _stencils(order: int, m: int):
    half = order // 2
    width = order + 1
    central = fd_weights(0.0, np.arange(-half, half + 1), m)
    left = [fd_weights(float(i), np.arange(width), m) for i in range(half)]
    return central, left


def edge_derivative(values: np.ndarray, h: float, order: int = 6, m: int = 1) -> np.ndarray:
    """m-th derivative along the last axis, accurate to O(h^order).

    Centered stencils in the interior and one-sided stencils of the same
    order at both ends.
    """
    if order % 2:
        raise ValueError("order must be even")
    values = np.asarray(values)
    n = values.shape[-1]
    half = order // 2
    if n < order + 2:
        raise PreconditionError("too few points for the derivative stencil")
    central, left = _stencils(order, m)
    out = np.zeros_like(values, dtype=np.result_type(values, float))
    for k, w in enumerate(central):
        out[..., half:n - half] += w * values[..., k:n - 2 * half + k]
    sign = -1.0 if m % 2 else 1.0
    for i, w in enumerate(left):
        out[..., i] = values[..., :order + 1] @ w
        out[..., n - 1 - i] = sign * (values[..., ::-1][..., :order + 1] @ w)
    return out / h**m


def lp_norm(f: GraphField, q) -> float:
    """(sum_j int_0^L |f_j|^q dx)^(1/q) by Simpson; q = inf gives the max."""
    if q == np.inf or q == "inf":
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    q = float(q)
    if not q >= 1:
        raise PreconditionError("q must be >= 1")
    total = float(np.sum(edge_integral(np.abs(f.values) ** q, f.grid.h)))
    return max(total, 0.0) ** (1.0 / q)


def gradient_norm_sq(f: GraphField) -> float:
    """||f'||^2 summed over edges."""
    df = edge_derivative(f.values, f.grid.h)
    return float(np.sum(edge_integral(np.abs(df) ** 2, f.grid.h)))


def vertex_term(f: GraphField, params: ModelParams) -> float:
    """(1/beta) |sum_j f_j(0)|^2."""
    return float(abs(np.sum(f.vertex_values)) ** 2 / params.beta)


def quadratic_form_F_beta(f: GraphField, params: ModelParams) -> float:
    """||f'||^2 + (1/beta) |sum_j f_j(0)|^2."""
    return gradient_norm_sq(f) + vertex_term(f, params)


def h1_inner(u: GraphField, v: GraphField) -> complex:
    """<u, v>_{H^1} = sum_j int (u_j conj(v_j) + u_j' conj(v_j')) dx."""
    _same_grid(u, v)
    h = u.grid.h
    du = edge_derivative(u.values, h)
    dv = edge_derivative(v.values, h)
    integrand = u.values * np.conj(v.values) + du * np.conj(dv)
    return complex(np.sum(edge_integral(integrand, h)))


def h1_norm(u: GraphField) -> float:
    return math.sqrt(max(h1_inner(u, u).real, 0.0))


# ---------------------------------------------------------------------------
# parameter integrals  int (1 - t^2)^alpha dt

def _half_beta(alpha: float) -> float:
    return 0.5 * beta_fn(0.5, alpha + 1.0)


def _integral_0_to(x: float, alpha: float) -> float:
    """int_0^x (1 - t^2)^alpha dt for 0 <= x <= 1 (regularized incomplete beta)."""
    x = min(max(x, 0.0), 1.0)
    return _half_beta(alpha) * betainc(0.5, alpha + 1.0, x * x)


def tanh_power_integral(lo: float, alpha: float, hi: float = 1.0) -> float:
    """int_lo^hi (1 - t^2)^alpha dt for -1 <= lo <= hi <= 1 and alpha > -1.

    Evaluated through the incomplete beta function, which handles the
    algebraic endpoint singularity at t = +-1 exactly.
    """
    if alpha <= -1:
        raise PreconditionError("alpha must exceed -1")
    if not -1.0 <= lo <= hi <= 1.0:
        raise PreconditionError("need -1 <= lo <= hi <= 1")

    def prim(x):  # odd antiderivative vanishing at 0
        return math.copysign(_integral_0_to(abs(x), alpha), x)

    return prim(hi) - prim(lo)


# ---------------------------------------------------------------------------
# finite-element assembly

Potential = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class FormMatrices:
    """Sparse P1 matrices on the N*(M-1) interior-plus-vertex unknowns.

    Unknowns are ordered edge by edge; the vertex unknown of edge j has
    index j*(M-1).
    """

    K: sp.csr_matrix
    Mmass: sp.csr_matrix
    grid: Grid

    @property
    def dof_count(self) -> int:
        return self.grid.dof_count

    @property
    def vertex_dofs(self) -> np.ndarray:
        return np.arange(self.grid.N) * (self.grid.M - 1)

    def shifted(self, sigma: float) -> sp.csr_matrix:
        """K - sigma * Mmass."""
        return (self.K - sigma * self.Mmass).tocsr()


def field_to_dofs(f: GraphField) -> np.ndarray:
    return np.asarray(f.values)[:, :-1].reshape(-1)


def dofs_to_field(v: np.ndarray, grid: Grid) -> GraphField:
    v = np.asarray(v).reshape(grid.N, grid.M - 1)
    full = np.zeros((grid.N, grid.M), dtype=v.dtype)
    full[:, :-1] = v
    return GraphField(grid, full)


def _gauss_rule():
    g, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    return (g + 1.0) / 2.0, w / 2.0


def _element_potential(grid: Grid, potential) -> np.ndarray:
    """Potential at Gauss points, shape (N, M-1, GAUSS_POINTS)."""
    g, _ = _gauss_rule()
    x = grid.x
    if callable(potential):
        xq = x[:-1, None] + grid.h * g[None, :]
        vq = np.asarray(potential(xq), dtype=float)
        return np.broadcast_to(vq, (grid.N,) + xq.shape)
    v = np.asarray(potential, dtype=float)
    if v.shape != (grid.N, grid.M):
        raise PreconditionError(
            f"potential shape {v.shape} does not match grid {(grid.N, grid.M)}")
    return v[:, :-1, None] * (1.0 - g) + v[:, 1:, None] * g


def assemble_forms(params: ModelParams, grid: Grid, potential: Potential = None,
                   include_vertex: bool = True) -> FormMatrices:
    """Stiffness + potential + vertex term, and the consistent mass matrix.

    ``potential`` is either node samples of shape (N, M), interpolated
    linearly on each element, or a callable V(x) returning an array that
    broadcasts to (N,) + x.shape, integrated exactly by Gauss quadrature.
    Constant shifts such as omega belong inside the potential.
    """
    if grid.N != params.N:
        raise PreconditionError("grid and params disagree on N")
    N, n, h = grid.N, grid.M - 1, grid.h
    # per-edge tridiagonal pieces in local numbering 0..n-1 (node n is x = L)
    k_main = np.full(n, 2.0 / h)
    k_main[0] = 1.0 / h
    k_off = np.full(n - 1, -1.0 / h)
    m_main = np.full(n, 2.0 * h / 3.0)
    m_main[0] = h / 3.0
    m_off = np.full(n - 1, h / 6.0)

    diag = np.tile(k_main, (N, 1))
    off = np.tile(k_off, (N, 1))
    if potential is not None:
        g, w = _gauss_rule()
        vq = _element_potential(grid, potential)
        b0, b1 = 1.0 - g, g
        e00 = h * np.sum(vq * (b0 * b0 * w), axis=-1)
        e11 = h * np.sum(vq * (b1 * b1 * w), axis=-1)
        e01 = h * np.sum(vq * (b0 * b1 * w), axis=-1)
        # element e joins local nodes e and e+1; node n is eliminated
        diag = diag + e00
        diag[:, 1:] += e11[:, :-1]
        off = off + e01[:, :-1]

    size = N * n
    rows, cols, vals = [], [], []
    base = np.arange(N)[:, None] * n
    idx = base + np.arange(n)[None, :]
    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    i0 = (base + np.arange(n - 1)[None, :]).ravel()
    rows += [i0, i0 + 1]; cols += [i0 + 1, i0]; vals += [off.ravel(), off.ravel()]
    if include_vertex:
        vd = np.arange(N) * n
        vr, vc = np.meshgrid(vd, vd, indexing="ij")
        rows.append(vr.ravel()); cols.append(vc.ravel())
        vals.append(np.full(N * N, 1.0 / params.beta))
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size)).tocsr()
    K.sum_duplicates()

    mass_edge = sp.diags([m_off, m_main, m_off], [-1, 0, 1])
    Mmass = sp.block_diag([mass_edge] * N, format="csr")
    return FormMatrices(K=K, Mmass=Mmass, grid=grid)


# ---------------------------------------------------------------------------
# inertia of star-structured symmetric matrices

@dataclass(frozen=True)
class Inertia:
    negative: int
    zero: int
    positive: int


def _dense_inertia(A: np.ndarray, tol: float) -> Inertia:
    _, d, _ = scipy.linalg.ldl(A, lower=True)
    ev = []
    i, n = 0, d.shape[0]
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            ev.extend(np.linalg.eigvalsh(d[i:i + 2, i:i + 2]))
            i += 2
        else:
            ev.append(d[i, i])
            i += 1
    ev = np.asarray(ev)
    return Inertia(int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol)),
                   int(np.sum(ev > tol)))


def inertia(forms: FormMatrices, sigma: float = 0.0) -> Inertia:
    """Inertia of K - sigma*Mmass by a structured LDL^T factorization.

    Each edge block is tridiagonal, so it is eliminated from the outer end
    towards the vertex; what remains is an N x N Schur complement on the
    vertex unknowns.  By Sylvester's law the signs of the pivots give the
    inertia.  A pivot that is numerically zero triggers a dense
    Bunch-Kaufman factorization instead.
    """
    A = forms.shifted(sigma) if sigma else forms.K
    grid = forms.grid
    N, n = grid.N, grid.M - 1
    d = A.diagonal().reshape(N, n).astype(float)
    e_full = np.append(A.diagonal(1), 0.0).reshape(N, n)
    e = e_full[:, :n - 1]
    scale = float(np.max(np.abs(d)))
    tiny = 1e-13 * scale
    piv = np.empty_like(d)
    piv[:, n - 1] = d[:, n - 1]
    for i in range(n - 2, 0, -1):
        piv[:, i] = d[:, i] - e[:, i] ** 2 / piv[:, i + 1]
    inner = piv[:, 1:]
    if np.any(np.abs(inner) <= tiny):
        return _dense_inertia(A.toarray(), tiny)
    vd = forms.vertex_dofs
    B = A[vd][:, vd].toarray()
    B[np.diag_indices(N)] -= e[:, 0] ** 2 / piv[:, 1]
    ev = np.linalg.eigvalsh(B)
    neg = int(np.sum(inner < 0)) + int(np.sum(ev < -tiny))
    zero = int(np.sum(np.abs(ev) <= tiny))
    return Inertia(neg, zero, A.shape[0] - neg - zero)
