"""Time integration of i u_t = -Delta_beta u - |u|^(p-1) u on the truncated graph.

The finite-element semi-discretization M u' = -i K u + i M_L g(u) (K the
vertex-coupled stiffness matrix, M the consistent mass matrix, M_L its
row-sum lumping, g(u) = |u|^(p-1) u at the nodes) is advanced by the
Crank-Nicolson / implicit-midpoint rule

    (M + i dt/2 K) u+ = (M - i dt/2 K) u + i dt M_L g((u + u+)/2),

solved by fixed-point iteration.  Lumping the nonlinear load makes
u^H M u an exact invariant of the scheme (up to the iteration tolerance).
Diagnostics (mass, energy, virial data, distance to the orbit of a
reference profile, H^1 norm) are recorded every few steps.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FixedPointDivergence, PreconditionError
from .functionals import evaluate
from .graph_core import (GraphField, ModelParams, assemble_forms, dofs_to_field, edge_integral,
                         field_to_dofs, h1_inner, h1_norm)

COMPLETED = "Completed"
ORBIT_ESCAPE = "OrbitEscape"
BLOWUP = "BlowupFlagged"
WALL = "WallReflection"

FP_TOL = 1e-12
FP_MAX_ITER = 50
MAX_HALVINGS = 10


@dataclass(frozen=True)
class RunStatus:
    kind: str
    time: Optional[float] = None

    def __str__(self):
        return self.kind if self.time is None else f"{self.kind}({self.time:.17g})"


@dataclass
class TrajectoryLog:
    times: List[float] = field(default_factory=list)
    mass: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    fvals: List[float] = field(default_factory=list)
    Pvals: List[float] = field(default_factory=list)
    orbit_dist: List[float] = field(default_factory=list)
    h1_norm: List[float] = field(default_factory=list)
    grad_sq: List[float] = field(default_factory=list)
    status: RunStatus = RunStatus(COMPLETED)
    stepper_failed_at: Optional[float] = None
    wall_time: Optional[float] = None

    def arrays(self):
        return {k: np.asarray(getattr(self, k)) for k in
                ("times", "mass", "energy", "fvals", "Pvals", "orbit_dist", "h1_norm")}

    def relative_drift(self, name: str) -> float:
        v = np.asarray(getattr(self, name))
        ref = abs(v[0])
        if ref == 0:
            return float(np.max(np.abs(v - v[0])))
        return float(np.max(np.abs(v - v[0])) / ref)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mass", "energy", "f", "P", "orbit_dist", "h1_norm"])
        for row in zip(self.times, self.mass, self.energy, self.fvals, self.Pvals,
                       self.orbit_dist, self.h1_norm):
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class Stepper:
    """Crank-Nicolson stepper bound to one grid and one set of parameters."""

    def __init__(self, params: ModelParams, grid, nonlinear: bool = True):
        self.params = params
        self.grid = grid
        self.nonlinear = nonlinear
        forms = assemble_forms(params, grid, None, include_vertex=True)
        self.K = forms.K.tocsc()
        self.M = forms.Mmass.tocsc()
        self.m_lumped = np.asarray(self.M.sum(axis=1)).ravel()
        self._factors = {}

    def _factor(self, dt: float):
        lu = self._factors.get(dt)
        if lu is None:
            A = (self.M + 0.5j * dt * self.K).tocsc()
            lu = spla.splu(A)
            B = (self.M - 0.5j * dt * self.K).tocsc()
            self._factors[dt] = lu = (lu, B)
        return lu

    def g(self, v: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros_like(v)
        return np.abs(v) ** (self.params.p - 1) * v

    def _single(self, u: np.ndarray, dt: float) -> np.ndarray:
        lu, B = self._factor(dt)
        base = B @ u
        new = lu.solve(base)  # linear predictor
        if not self.nonlinear:
            return new
        scale = max(float(np.max(np.abs(u))), 1e-300)
        for _ in range(FP_MAX_ITER):
            mid = 0.5 * (u + new)
            nxt = lu.solve(base + 1j * dt * self.m_lumped * self.g(mid))
            err = float(np.max(np.abs(nxt - new)))
            new = nxt
            if not np.isfinite(err):
                break
            if err <= FP_TOL * scale:
                return new
        raise FixedPointDivergence(f"fixed point did not converge at dt={dt:g}")

    def advance(self, u: np.ndarray, dt: float, depth: int = 0) -> np.ndarray:
        """One step of size dt, split into halves (recursively) on divergence."""
        try:
            return self._single(u, dt)
        except FixedPointDivergence:
            if depth >= MAX_HALVINGS:
                raise
            half = self.advance(u, dt / 2, depth + 1)
            return self.advance(half, dt / 2, depth + 1)

    def step(self, u: GraphField, dt: float) -> GraphField:
        if dt == 0:
            raise PreconditionError("dt must be nonzero")
        v = field_to_dofs(u).astype(complex)
        return dofs_to_field(self.advance(v, dt), self.grid)

    # discrete invariants of the scheme
    def mass(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.M @ v)))

    def energy(self, v: np.ndarray) -> float:
        kin = 0.5 * float(np.real(np.vdot(v, self.K @ v)))
        if not self.nonlinear:
            return kin
        p = self.params.p
        return kin - float(np.sum(self.m_lumped * np.abs(v) ** (p + 1))) / (p + 1)


def discrete_standing_wave(spec, grid, tol: float = 1e-11, max_iter: int = 30) -> GraphField:
    """Standing wave of the semi-discrete scheme near a profile.

    Solves K v + omega M v - M_L |v|^(p-1) v = 0 by Newton's method starting
    from the sampled profile.  The result differs from the profile by
    O(h^2) and, unlike the sampled profile, is an exact rotating solution
    of the discrete dynamics.
    """
    params = spec.params
    stepper = Stepper(params, grid)
    A = (stepper.K + params.omega * stepper.M).tocsc()
    v = field_to_dofs(spec.field(grid)).astype(float)
    p = params.p
    scale = float(np.max(np.abs(A @ v)))
    for _ in range(max_iter):
        res = A @ v - stepper.m_lumped * np.abs(v) ** (p - 1) * v
        if float(np.max(np.abs(res))) <= tol * scale:
            break
        J = (A - sp.diags(p * stepper.m_lumped * np.abs(v) ** (p - 1))).tocsc()
        v = v - spla.spsolve(J, res)
    else:
        raise FixedPointDivergence("Newton iteration for the discrete standing wave failed")
    return dofs_to_field(v, grid)


def step(u: GraphField, dt: float, params: ModelParams) -> GraphField:
    """One Crank-Nicolson step (builds a throwaway stepper)."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    return Stepper(params, u.grid).step(u, dt)


def orbit_distance(u: GraphField, phi: GraphField) -> float:
    """min over theta of ||u - e^{i theta} phi||_{H^1}.

    The minimizing phase is arg <u, phi>_{H^1}; the distance is then
    evaluated directly, which avoids the cancellation of the expanded form.
    """
    z = h1_inner(u, phi)
    rot = z / abs(z) if abs(z) > 0 else 1.0
    return h1_norm(u - rot * phi)


def second_moment(u: GraphField) -> float:
    """f = ||x u||^2."""
    x = u.grid.x
    return float(np.sum(edge_integral(x * x * np.abs(u.values) ** 2, u.grid.h)))


def wall_amplitude(u: GraphField) -> float:
    """max |u| on the outer tenth of the edges relative to max |u|."""
    a = np.abs(u.values)
    peak = float(np.max(a))
    if peak == 0:
        return 0.0
    cut = u.grid.x > 0.9 * u.grid.L
    return float(np.max(a[:, cut])) / peak


def evolve(u0: GraphField, params: ModelParams, dt: float, T: float, sample_every: int = 10,
           reference: Optional[GraphField] = None, escape: Optional[float] = None,
           blowup_factor: float = 1e3, wall_tol: float = 1e-6, on_wall: str = "warn",
           nonlinear: bool = True, stepper: Optional[Stepper] = None) -> TrajectoryLog:
    """Integrate from u0 over [0, T] with step dt, logging every ``sample_every`` steps.

    ``reference`` is the profile whose orbit distance is logged (u0 if
    omitted).  The run stops early on orbit escape (when ``escape`` is
    given), on H^1 growth beyond ``blowup_factor`` times the initial value,
    or when the stepper fails at the smallest allowed dt.  When |u| near the
    outer wall exceeds ``wall_tol`` times max |u| a warning is issued once
    (``on_wall='warn'``) or the run stops (``on_wall='abort'``).
    """
    if dt == 0 or sample_every < 1:
        raise PreconditionError("need dt != 0 and sample_every >= 1")
    steps = int(round(T / abs(dt)))
    if steps < 1 or abs(steps * abs(dt) - T) > 1e-9 * max(T, 1.0):
        raise PreconditionError("T must be a positive integer multiple of |dt|")
    if not np.all(np.isfinite(u0.values)):
        raise PreconditionError("initial data must be finite")
    if on_wall not in ("warn", "abort", "ignore"):
        raise PreconditionError("on_wall must be 'warn', 'abort' or 'ignore'")
    grid = u0.grid
    stepper = stepper or Stepper(params, grid, nonlinear=nonlinear)
    reference = u0 if reference is None else reference
    log = TrajectoryLog()
    v = field_to_dofs(u0).astype(complex)
    direction = math.copysign(1.0, dt)

    def record(t, vec):
        u = dofs_to_field(vec, grid)
        rep = evaluate(u, params)
        P = rep.P if nonlinear else rep.P + (params.p - 1) / (2 * (params.p + 1)) * rep.R
        log.times.append(t)
        log.mass.append(stepper.mass(vec))
        log.energy.append(stepper.energy(vec))
        log.fvals.append(second_moment(u))
        log.Pvals.append(P)
        log.orbit_dist.append(orbit_distance(u, reference))
        log.h1_norm.append(h1_norm(u))
        log.grad_sq.append(rep.grad_sq)
        return u

    record(0.0, v)
    h1_0 = log.h1_norm[0]
    for n in range(1, steps + 1):
        t = direction * n * abs(dt)
        try:
            v = stepper.advance(v, dt)
        except FixedPointDivergence:
            log.stepper_failed_at = t
            log.status = RunStatus(BLOWUP, t)
            return log
        if not np.all(np.isfinite(v)):
            log.stepper_failed_at = t
            log.status = RunStatus(BLOWUP, t)
            return log
        if n % sample_every == 0 or n == steps:
            u = record(t, v)
            if log.wall_time is None and on_wall != "ignore" and wall_amplitude(u) > wall_tol:
                log.wall_time = t
                msg = f"|u| near the outer wall exceeds {wall_tol:g} max|u| at t={t:.6g}"
                if on_wall == "abort":
                    warnings.warn(msg + "; run aborted", RuntimeWarning, stacklevel=2)
                    log.status = RunStatus(WALL, t)
                    return log
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
            if h1_0 > 0 and log.h1_norm[-1] > blowup_factor * h1_0:
                log.status = RunStatus(BLOWUP, t)
                return log
            if escape is not None and log.orbit_dist[-1] > escape:
                log.status = RunStatus(ORBIT_ESCAPE, t)
                return log
    return log


def virial_check(log: TrajectoryLog) -> float:
    """max |f'' - 8 P| over interior samples, relative to max 8 ||u'||^2.

    f'' comes from second central differences of the logged f values, so
    the samples must be equally spaced in time.
    """
    t = np.asarray(log.times)
    if t.size < 5:
        raise PreconditionError("virial_check needs at least 5 samples")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise PreconditionError("samples are not equally spaced")
    f = np.asarray(log.fvals)
    P = np.asarray(log.Pvals)
    fpp = (f[2:] - 2 * f[1:-1] + f[:-2]) / dt[0] ** 2
    scale = 8.0 * float(np.max(log.grad_sq)) if log.grad_sq else 8.0 * float(np.max(np.abs(P)))
    if scale == 0:
        return float(np.max(np.abs(fpp - 8 * P[1:-1])))
    return float(np.max(np.abs(fpp - 8 * P[1:-1])) / scale)


def classify_run(log: TrajectoryLog, escape: float, blowup_factor: float = 1e3) -> RunStatus:
    """BlowupFlagged if flagged at all, else OrbitEscape at the first exit, else Completed.

    Strongly perturbed initial data may start outside the escape radius,
    so a blow-up flag takes precedence over an escape time.
    """
    h1 = np.asarray(log.h1_norm)
    dist = np.asarray(log.orbit_dist)
    t = np.asarray(log.times)
    t_escape = t[np.argmax(dist > escape)] if np.any(dist > escape) else None
    t_blow = None
    if h1.size and h1[0] > 0 and np.any(h1 > blowup_factor * h1[0]):
        t_blow = t[np.argmax(h1 > blowup_factor * h1[0])]
    if log.stepper_failed_at is not None:
        t_blow = log.stepper_failed_at if t_blow is None else min(t_blow, log.stepper_failed_at)
    if t_blow is not None:  # a blow-up flag outranks an earlier orbit escape
        return RunStatus(BLOWUP, float(t_blow))
    if t_escape is not None:
        return RunStatus(ORBIT_ESCAPE, float(t_escape))
    return RunStatus(COMPLETED)


def escape_rate(log: TrajectoryLog, upper: float = 0.1) -> float:
    """Least-squares slope of log(orbit_dist) where it lies in [10 d0, upper]."""
    d = np.asarray(log.orbit_dist)
    t = np.asarray(log.times)
    lo = 10.0 * d[0]
    sel = (d >= lo) & (d <= upper)
    if np.sum(sel) < 3:
        raise PreconditionError("too few samples in the exponential-growth window")
    slope, _ = np.polyfit(t[sel], np.log(d[sel]), 1)
    return float(slope)


def random_bump(grid, size: float, seed: int, width: float = 1.0,
                bumps_per_edge: int = 3) -> GraphField:
    """Smooth complex perturbation with H^1 norm ``size``.

    Each edge carries a few Gaussians with random centres in [0, 3 width],
    random widths in [0.5, 1.5] width and complex normal coefficients.
    """
    rng = np.random.default_rng(seed)
    x = grid.x
    vals = np.zeros((grid.N, grid.M), dtype=complex)
    for j in range(grid.N):
        for _ in range(bumps_per_edge):
            c = rng.uniform(0.0, 3.0 * width)
            s = rng.uniform(0.5, 1.5) * width
            coef = rng.normal() + 1j * rng.normal()
            vals[j] += coef * np.exp(-((x - c) / s) ** 2)
    vals[:, -1] = 0.0
    b = GraphField(grid, vals)
    return (size / h1_norm(b)) * b


def structured_bump(grid, size: float, width: float = 1.0) -> GraphField:
    """Deterministic complex perturbation with H^1 norm ``size``.

    Edge j carries (1 + j/N) e^{2 pi i j / N} x e^{-(x/width)^2}, so the
    perturbation breaks the symmetry between edges without using an RNG.
    """
    x = grid.x
    N = grid.N
    vals = np.zeros((N, grid.M), dtype=complex)
    for j in range(N):
        coef = (1.0 + j / N) * np.exp(2j * np.pi * j / N)
        vals[j] = coef * (x / width) * np.exp(-(x / width) ** 2)
    vals[:, -1] = 0.0
    b = GraphField(grid, vals)
    return (size / h1_norm(b)) * b
