"""Standing-wave profiles on the star graph.

Every critical point of the action is built from shifted half-line
solitons

    phi_a(x) = [ (p+1) omega / 2 * sech^2( (p-1) sqrt(omega) / 2 * (x + a) ) ]^(1/(p-1)).

The shift on edge j is encoded by t_j = tanh((p-1) sqrt(omega) |a_j| / 2).
The symmetric profile uses t_j = N/(|beta| sqrt(omega)) on every edge; the
asymmetric profile number k uses t_1 on the first k edges and t_N on the
remaining N-k, where (t_1, t_N) solves

    t_1^(p-1) - t_1^(p+1) = t_N^(p-1) - t_N^(p+1),
    k / t_1 + (N - k) / t_N = |beta| sqrt(omega).

Attractive coupling (beta < 0) gives positive shifts, so each edge carries
a decaying tail; repulsive coupling gives negative shifts and a bump on
each edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoRoot, PreconditionError
from .graph_core import (GraphField, Grid, ModelParams, edge_derivative, make_grid,
                         safe_artanh, tanh_power_integral)

SYMMETRIC = "symmetric"
ASYMMETRIC = "asymmetric"


def _log_sech(z):
    z = np.abs(z)
    return math.log(2.0) - z - np.log1p(np.exp(-2.0 * z))


def soliton_power(p: float, omega: float, a: float) -> Callable[[np.ndarray], np.ndarray]:
    """x -> phi_a(x)^(p-1) = (p+1) omega / 2 * sech^2(...)."""
    c = (p - 1) * math.sqrt(omega) / 2.0
    amp = (p + 1) * omega / 2.0

    def power(x):
        return amp * np.exp(2.0 * _log_sech(c * (np.asarray(x, dtype=float) + a)))

    return power


def soliton_profile(p: float, omega: float, a: float) -> Callable[[np.ndarray], np.ndarray]:
    """The half-line soliton x -> phi_a(x), evaluated in log form to avoid overflow."""
    if not p > 1 or not omega > 0:
        raise PreconditionError("need p > 1 and omega > 0")
    c = (p - 1) * math.sqrt(omega) / 2.0
    log_amp = math.log((p + 1) * omega / 2.0)

    def phi(x):
        z = c * (np.asarray(x, dtype=float) + a)
        return np.exp((log_amp + 2.0 * _log_sech(z)) / (p - 1))

    return phi


def offset_from_t(params: ModelParams, t: float) -> float:
    """Signed shift a = -sign(beta) * 2 artanh(t) / ((p-1) sqrt(omega))."""
    return -math.copysign(1.0, params.beta) * 2.0 * safe_artanh(t) / (
        (params.p - 1) * params.sqrt_omega)


@dataclass(frozen=True)
class ProfileSpec:
    """Identity of one critical point: layout (k edges with t1, N-k with tN)."""

    params: ModelParams
    kind: str
    k: int
    t1: float
    tN: float

    @property
    def a1(self) -> float:
        return offset_from_t(self.params, self.t1)

    @property
    def aN(self) -> float:
        return offset_from_t(self.params, self.tN)

    @property
    def label(self) -> str:
        return "symmetric" if self.kind == SYMMETRIC else f"asymmetric(k={self.k})"

    def edge_t(self) -> np.ndarray:
        N = self.params.N
        return np.where(np.arange(N) < self.k, self.t1, self.tN)

    def edge_offsets(self) -> np.ndarray:
        N = self.params.N
        return np.where(np.arange(N) < self.k, self.a1, self.aN)

    def groups(self):
        """(offset, multiplicity) pairs; one group for the symmetric profile."""
        if self.kind == SYMMETRIC:
            return [(self.a1, self.params.N)]
        return [(self.a1, self.k), (self.aN, self.params.N - self.k)]

    def values(self, x) -> np.ndarray:
        """Profile samples, shape (N,) + x.shape."""
        p, om = self.params.p, self.params.omega
        rows = [soliton_profile(p, om, a)(x) for a in self.edge_offsets()]
        return np.stack(rows)

    def power(self, x) -> np.ndarray:
        """phi^(p-1) on every edge, shape (N,) + x.shape (used as a potential)."""
        p, om = self.params.p, self.params.omega
        return np.stack([soliton_power(p, om, a)(x) for a in self.edge_offsets()])

    def field(self, grid: Grid) -> GraphField:
        if grid.N != self.params.N:
            raise PreconditionError("grid has the wrong number of edges")
        return GraphField(grid, self.values(grid.x))

    def system_residuals(self):
        """Residuals of the two defining equations of (t1, tN)."""
        p, N, k = self.params.p, self.params.N, self.k
        a = abs(self.params.beta) * self.params.sqrt_omega
        f1 = self.t1 ** (p - 1) - self.t1 ** (p + 1)
        fN = self.tN ** (p - 1) - self.tN ** (p + 1)
        return abs(f1 - fN), abs(k / self.t1 + (N - k) / self.tN - a)

    def default_grid(self, points_per_edge: int = 1024) -> Grid:
        return make_grid(self.params, points_per_edge, t_max=max(self.t1, self.tN))


def symmetric_spec(params: ModelParams) -> ProfileSpec:
    params.require_symmetric()
    t = params.t_symmetric
    return ProfileSpec(params, SYMMETRIC, params.N, t, t)


def _w(x, p, N, k, a):
    D = a * x - N + k
    return k ** (p - 1) * (D * D - k * k * x * x) / D ** (p + 1) + x * x - 1.0


def _dw(x, p, N, k, a):
    D = a * x - N + k
    g = D * D - k * k * x * x
    return k ** (p - 1) * ((2 * a * D - 2 * k * k * x) / D ** (p + 1)
                           - (p + 1) * a * g / D ** (p + 2)) + 2 * x


def solve_t_system(params: ModelParams, k: int):
    """(t1, tN) of the asymmetric profile with k edges on t1.

    tN is the root of the scalar reduction w in (N/a, 1], a = |beta| sqrt(omega),
    found by bisection and polished by Newton; t1 follows from the second
    equation.  Raises NoRoot when the sign bracket is absent.
    """
    N, p = params.N, params.p
    if int(k) != k or not 1 <= k <= N - 1:
        raise PreconditionError(f"k must be an integer in 1..{N - 1}")
    k = int(k)
    a = abs(params.beta) * params.sqrt_omega
    x0 = N / a
    if x0 >= 1.0:
        raise NoRoot("omega does not exceed N^2/beta^2; no admissible bracket")
    if abs(_w(x0, p, N, k, a)) > 1e-10:
        raise NoRoot("w(N/a) is not zero; reduction inconsistent")
    slope = ((p + 1) * N * N - a * a * (p - 1)) / (a * k)
    lo, hi = x0 + 1e-9, 1.0
    w_lo, w_hi = _w(lo, p, N, k, a), _w(hi, p, N, k, a)
    if slope >= 0 or not (w_lo < 0 < w_hi):
        raise NoRoot(f"no sign change of w on (N/a, 1] for k={k} "
                     f"(omega={params.omega}, omega_star={params.omega_star})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _w(mid, p, N, k, a) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(5):
        d = _dw(x, p, N, k, a)
        if d == 0:
            break
        step = _w(x, p, N, k, a) / d
        if not lo - 1e-12 <= x - step <= hi + 1e-12:
            break
        x -= step
    if abs(_w(x, p, N, k, a)) > 1e-12:
        raise NoRoot(f"root polishing failed, residual {_w(x, p, N, k, a):.3e}")
    tN = x
    t1 = k * x / (a * x - N + k)
    spec = ProfileSpec(params, ASYMMETRIC, k, t1, tN)
    r1, r2 = spec.system_residuals()
    tc = math.sqrt((p - 1) / (p + 1))
    if max(r1, r2 / a) > 1e-10 or not 0 < t1 < tc < tN < 1:
        raise NoRoot(f"solution fails verification: t1={t1}, tN={tN}, residuals {r1}, {r2}")
    return t1, tN


def profile_spec(params: ModelParams, kind: str, k: Optional[int] = None) -> ProfileSpec:
    """ProfileSpec for ``kind`` in {'symmetric', 'asymmetric'}."""
    kind = kind.lower()
    if kind == SYMMETRIC:
        return symmetric_spec(params)
    if kind == ASYMMETRIC:
        if k is None:
            raise PreconditionError("asymmetric profiles need k")
        params.require_asymmetric()
        t1, tN = solve_t_system(params, k)
        return ProfileSpec(params, ASYMMETRIC, int(k), t1, tN)
    raise PreconditionError(f"unknown profile kind {kind!r}")


def family_specs(params: ModelParams):
    """The asymmetric profiles k = 1..N-1 followed by the symmetric one."""
    specs = [profile_spec(params, ASYMMETRIC, k) for k in range(1, params.N)]
    return specs + [symmetric_spec(params)]


def family_grid(params: ModelParams, points_per_edge: int) -> Grid:
    """One grid that fits every existing critical point of the family."""
    t_max = params.t_symmetric
    if params.omega > params.omega_star:
        t_max = max([t_max] + [s.tN for s in family_specs(params)[:-1]])
    return make_grid(params, points_per_edge, t_max=min(t_max, 1 - 1e-15))


def build_critical_point(params: ModelParams, kind: str = SYMMETRIC, k: Optional[int] = None,
                         grid: Optional[Grid] = None, points_per_edge: int = 1024):
    """(ProfileSpec, GraphField) for the requested critical point."""
    spec = profile_spec(params, kind, k)
    if grid is None:
        grid = spec.default_grid(points_per_edge)
    return spec, spec.field(grid)


@dataclass(frozen=True)
class StationarityReport:
    interior: float
    derivative_mismatch: float
    vertex_condition: float

    @property
    def max(self) -> float:
        return max(self.interior, self.derivative_mismatch, self.vertex_condition)


def stationarity_check(f: GraphField, params: ModelParams) -> StationarityReport:
    """Residuals of -f'' + omega f - |f|^(p-1) f = 0 and of the vertex conditions.

    Vertex conditions: equal outgoing derivatives on all edges and
    sum_j f_j(0) = beta f_1'(0).  Derivatives use sixth-order differences.
    """
    if not f.is_real:
        raise PreconditionError("stationarity_check expects a real field")
    v = np.real(f.values)
    h = f.grid.h
    d2 = edge_derivative(v, h, m=2)
    res = -d2 + params.omega * v - np.abs(v) ** (params.p - 1) * v
    interior = float(np.max(np.abs(res[:, 1:-1])))
    d1 = edge_derivative(v, h)[:, 0]
    mismatch = float(np.max(np.abs(d1 - d1[0])))
    vertex = float(abs(np.sum(v[:, 0]) - params.beta * d1[0]))
    return StationarityReport(interior, mismatch, vertex)


def compute_beta_star(p: float, omega: float, N: int) -> float:
    """The negative beta* at which the symmetric action equals the half-line level.

    Solves N * int_u^1 (1-t^2)^(2/(p-1)) dt = int_0^1 (1-t^2)^(2/(p-1)) dt
    for u = N/(|beta*| sqrt(omega)) by bisection; the left side decreases in u.
    """
    ModelParams(p, omega, -1.0, N)  # validates p, omega, N
    alpha = 2.0 / (p - 1)
    full = tanh_power_integral(0.0, alpha)

    def g(u):
        return N * tanh_power_integral(u, alpha) - full

    lo, hi = 0.0, 1.0  # g(0) = (N-1) full > 0, g(1) = -full < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    return -N / (u * math.sqrt(omega))
