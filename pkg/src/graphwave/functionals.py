"""Action, Nehari, energy and virial functionals, plus closed-form benchmarks.

For a field v on the graph, with F_beta the vertex-coupled Dirichlet form,
Q = ||v||_2^2 and R = ||v||_{p+1}^{p+1}:

    S = F/2 + omega Q / 2 - R/(p+1)            (action)
    I = F + omega Q - R                         (Nehari functional)
    E = F/2 - R/(p+1)                           (energy)
    P = ||v'||^2 + |sum_j v_j(0)|^2/(2 beta) - (p-1) R / (2(p+1))   (virial)

P is the functional with f'' = 8 P(u) for f(t) = ||x u(t)||^2.  The sign of
the vertex term follows from the boundary term -Re sum_j conj(u_j(0)) u_j'(0)
produced by integrating by parts, and it makes P vanish on every standing
wave (Pohozaev identity combined with I = 0).

Closed forms for profile-built quantities reduce to integrals of
(1 - t^2)^alpha, evaluated by ``graph_core.tanh_power_integral``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import NoRoot, PreconditionError
from .graph_core import (GraphField, ModelParams, gradient_norm_sq, lp_norm,
                         quadratic_form_F_beta, tanh_power_integral)
from .profiles import (ASYMMETRIC, SYMMETRIC, ProfileSpec, family_grid, profile_spec)


@dataclass(frozen=True)
class FunctionalReport:
    S: float
    I: float
    E: float
    Q: float
    P: float
    F: float
    R: float  # ||f||_{p+1}^{p+1}
    grad_sq: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("S", "I", "E", "Q", "P", "F", "R", "grad_sq")}


def evaluate(f: GraphField, params: ModelParams) -> FunctionalReport:
    """All functionals of ``f`` by Simpson quadrature on node samples."""
    p, om, beta = params.p, params.omega, params.beta
    grad = gradient_norm_sq(f)
    vsum = abs(np.sum(f.vertex_values)) ** 2
    F = grad + vsum / beta
    Q = lp_norm(f, 2) ** 2
    R = lp_norm(f, p + 1) ** (p + 1)
    S = 0.5 * F + 0.5 * om * Q - R / (p + 1)
    I = F + om * Q - R
    E = 0.5 * F - R / (p + 1)
    P = grad + vsum / (2 * beta) - (p - 1) / (2 * (p + 1)) * R
    return FunctionalReport(S, I, E, Q, P, F, R, grad)


def _action_prefactor(p: float, omega: float) -> float:
    return ((p + 1) / 2) ** (2 / (p - 1)) * omega ** ((p + 3) / (2 * (p - 1)))


def d_infinity(p: float, omega: float) -> float:
    """Half-line Nehari level: the action of one half soliton on a single edge."""
    if not p > 1 or not omega > 0:
        raise PreconditionError("need p > 1 and omega > 0")
    return 0.5 * _action_prefactor(p, omega) * tanh_power_integral(0.0, 2 / (p - 1))


def _edge_lower_limit(params: ModelParams, t: float) -> float:
    # tails (beta < 0) start past the peak at +t, bumps (beta > 0) before it at -t
    return t if params.beta < 0 else -t


def profile_action_closed_form(spec: ProfileSpec) -> float:
    """Action of any family member as a sum of per-edge closed forms."""
    params = spec.params
    p, alpha = params.p, 2 / (params.p - 1)
    total = sum(tanh_power_integral(_edge_lower_limit(params, t), alpha) for t in spec.edge_t())
    return 0.5 * _action_prefactor(p, params.omega) * total


def symmetric_action_closed_form(params: ModelParams) -> float:
    """Action of the symmetric profile.

    With s = N/(beta sqrt(omega)) the value is
    (N/2) ((p+1)/2)^(2/(p-1)) omega^((p+3)/(2(p-1))) int_{-s}^1 (1-t^2)^(2/(p-1)) dt,
    which for beta < 0 has lower limit N/(|beta| sqrt(omega)).
    """
    params.require_symmetric()
    lo = _edge_lower_limit(params, params.t_symmetric)
    return 0.5 * params.N * _action_prefactor(params.p, params.omega) * \
        tanh_power_integral(lo, 2 / (params.p - 1))


def symmetric_mass_closed_form(params: ModelParams) -> float:
    """||phi_beta||_2^2 of the symmetric profile."""
    params.require_symmetric()
    p, om = params.p, params.omega
    alpha = 2 / (p - 1)
    lo = _edge_lower_limit(params, params.t_symmetric)
    per_edge = ((p + 1) / 2) ** alpha * 2 * om ** (alpha - 0.5) / (p - 1) * \
        tanh_power_integral(lo, alpha - 1)
    return params.N * per_edge


def nehari_rescale(f: GraphField, params: ModelParams):
    """(lam, lam * f) with lam chosen so that I(lam * f) = 0."""
    R = lp_norm(f, params.p + 1) ** (params.p + 1)
    if not R > 0:
        raise PreconditionError("field has zero L^(p+1) norm")
    quad = quadratic_form_F_beta(f, params) + params.omega * lp_norm(f, 2) ** 2
    if not quad > 0:
        raise PreconditionError("F_beta + omega ||f||^2 <= 0; omega below the form bound")
    lam = (quad / R) ** (1 / (params.p - 1))
    return lam, lam * f


@dataclass(frozen=True)
class RankEntry:
    kind: str
    k: Optional[int]
    S: float

    @property
    def label(self) -> str:
        return "symmetric" if self.kind == SYMMETRIC else f"asymmetric(k={self.k})"


def rank_critical_points(params: ModelParams, points_per_edge: int = 2048,
                         members: Optional[Iterable] = None):
    """Family members sorted by action (ascending).

    ``members`` restricts the comparison, e.g. [("symmetric", None), ("asymmetric", 2)];
    by default the whole family k = 1..N-1 plus the symmetric profile is used.
    All members share one grid.
    """
    params.require_asymmetric()
    if members is None:
        members = [(ASYMMETRIC, k) for k in range(1, params.N)] + [(SYMMETRIC, None)]
    specs = [profile_spec(params, kind, k) for kind, k in members]
    grid = family_grid(params, points_per_edge)
    rows = []
    for spec in specs:
        S = evaluate(spec.field(grid), params).S
        rows.append(RankEntry(spec.kind, spec.k if spec.kind == ASYMMETRIC else None, S))
    return sorted(rows, key=lambda r: r.S)


@dataclass(frozen=True)
class SlopeReport:
    J: float
    J1: float
    omega_star: Optional[float]
    within_theorem: bool  # False for beta < 0, where J is computed numerically


def _slope_constant(params: ModelParams) -> float:
    p = params.p
    return params.N / (p - 1) * ((p + 1) / 2) ** (2 / (p - 1))


def _slope_power(params: ModelParams) -> float:
    p = params.p
    return params.omega ** ((7 - 3 * p) / (2 * (p - 1)))


def slope_J1(params: ModelParams) -> float:
    """J1(omega) for the symmetric profile with repulsive coupling."""
    p = params.p
    s = params.N / (params.beta * params.sqrt_omega)
    expo = (3 - p) / (p - 1)
    return (5 - p) / (p - 1) * tanh_power_integral(-s, expo) - s * (1 - s * s) ** expo


def _locate_slope_root(params: ModelParams) -> Optional[float]:
    floor = params.omega_floor

    def j1(om):
        return slope_J1(params.with_omega(om))

    lo, hi = floor * (1 + 1e-12), 1e6 * floor
    f_lo, f_hi = j1(lo), j1(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        return None
    for _ in range(200):
        mid = math.sqrt(lo * hi)  # geometric bisection across many decades
        if mid <= lo or mid >= hi:
            break
        if (j1(mid) < 0) == (f_lo < 0):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def mass_slope(params: ModelParams) -> SlopeReport:
    """J = d/d omega ||phi_beta||^2 together with J1 and the sign-change frequency.

    For beta > 0 the closed form J = C omega^((7-3p)/(2(p-1))) J1 is used and,
    when 3 < p < 5, the zero of J1 above N^2/beta^2 is located (None if the
    search interval shows no sign change).  For beta < 0 the slope is a
    central difference of the closed-form mass and ``within_theorem`` is False.
    """
    params.require_symmetric()
    C, power = _slope_constant(params), _slope_power(params)
    if params.beta > 0:
        J1 = slope_J1(params)
        J = C * power * J1
        root = _locate_slope_root(params) if 3 < params.p < 5 else None
        return SlopeReport(J, J1, root, True)
    om = params.omega
    d = 1e-4 * (om - params.omega_floor)
    q_plus = symmetric_mass_closed_form(params.with_omega(om + d))
    q_minus = symmetric_mass_closed_form(params.with_omega(om - d))
    J = (q_plus - q_minus) / (2 * d)
    return SlopeReport(J, J / (C * power), None, False)


def omega3_equation(xi: float, p: float, N: int) -> float:
    """LHS - RHS of the equation defining xi-hat."""
    alpha = 2 / (p - 1)
    return (p - 5) * N / 2 * tanh_power_integral(xi, alpha) - xi * (1 - xi * xi) ** alpha


def omega3(p: float, N: int, beta: float):
    """(xi_hat, omega_3) for p > 5 and beta < 0; omega_3 = N^2/(beta^2 xi_hat^2)."""
    if not p > 5:
        raise PreconditionError("omega3 requires p > 5")
    if not beta < 0:
        raise PreconditionError("omega3 requires beta < 0")
    ModelParams(p, 1.0, beta, N)
    eps = 1e-12
    lo, hi = eps, 1 - eps
    g_lo, g_hi = omega3_equation(lo, p, N), omega3_equation(hi, p, N)
    if not (g_lo > 0 > g_hi):
        raise NoRoot("defining equation has no sign change on (0, 1)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if omega3_equation(mid, p, N) > 0:
            lo = mid
        else:
            hi = mid
    xi = 0.5 * (lo + hi)
    return xi, N * N / (beta * beta * xi * xi)
