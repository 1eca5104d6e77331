import warnings

import numpy as np
import pytest

from graphwave.errors import PreconditionError
from graphwave.evolution import (BLOWUP, COMPLETED, ORBIT_ESCAPE, WALL, RunStatus, Stepper,
                                 TrajectoryLog, classify_run, discrete_standing_wave, evolve,
                                 orbit_distance, random_bump, step, structured_bump, virial_check)
from graphwave.graph_core import ModelParams, h1_inner, h1_norm, zero_field
from graphwave.profiles import build_critical_point

STABLE = ModelParams(3, 12, -1, 3)


@pytest.fixture(scope="module")
def stable_wave():
    spec, phi = build_critical_point(STABLE, points_per_edge=512)
    return spec, phi, discrete_standing_wave(spec, phi.grid)


def quiet_evolve(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return evolve(*args, **kw)


class TestStep:
    def test_linear_mass_exact(self, stable_wave):
        _, phi, _ = stable_wave
        st = Stepper(STABLE, phi.grid, nonlinear=False)
        from graphwave.graph_core import field_to_dofs
        v = field_to_dofs(phi + random_bump(phi.grid, 0.1, seed=3)).astype(complex)
        m0 = st.mass(v)
        for _ in range(20):
            v = st.advance(v, 1e-3)
        assert st.mass(v) == pytest.approx(m0, rel=1e-13)

    def test_gauge_covariance(self, stable_wave):
        _, phi, _ = stable_wave
        u = phi + random_bump(phi.grid, 1e-2, seed=1)
        rot = np.exp(0.7j)
        a = step(rot * u, 1e-3, STABLE)
        b = rot * step(u, 1e-3, STABLE)
        assert np.max(np.abs(a.values - b.values)) <= 1e-11 * np.max(np.abs(u.values))

    def test_rejects_zero_dt(self, stable_wave):
        _, phi, _ = stable_wave
        with pytest.raises(PreconditionError):
            step(phi, 0.0, STABLE)


class TestOrbitDistance:
    def test_self_and_phase(self, stable_wave):
        _, phi, _ = stable_wave
        assert orbit_distance(phi, phi) == 0
        assert orbit_distance(np.exp(0.7j) * phi, phi) <= 1e-12 * h1_norm(phi)

    def test_orthogonal_perturbation(self, stable_wave):
        _, phi, _ = stable_wave
        psi = random_bump(phi.grid, 1.0, seed=5)
        psi = psi - (h1_inner(psi, phi) / h1_inner(phi, phi)) * phi
        for eps in (1e-2, 1e-3):
            d = orbit_distance(phi + eps * psi, phi)
            assert d == pytest.approx(eps * h1_norm(psi), abs=10 * eps ** 2 * h1_norm(psi) ** 2 / h1_norm(phi) + 1e-12)


class TestEvolve:
    def test_discrete_wave_is_stationary(self, stable_wave):
        spec, phi, phi_h = stable_wave
        assert orbit_distance(phi_h, phi) < 1e-2
        log = quiet_evolve(phi_h, STABLE, 1e-3, 1.0, reference=phi_h)
        # the midpoint rule deforms the rotating profile by O((omega dt)^2)
        assert max(log.orbit_dist) <= 1e-4
        f = np.asarray(log.fvals)
        assert np.ptp(f) <= 1e-4 * f[0]

    def test_sampled_profile_stays_close(self):
        # P vanishes on the continuum profile; on the grid it is O(h^2), hence M=2048
        spec, phi = build_critical_point(STABLE, points_per_edge=2048)
        log = quiet_evolve(phi, STABLE, 1e-3, 1.0, reference=phi)
        assert log.status.kind == COMPLETED
        assert max(log.orbit_dist) <= 1e-3
        assert np.max(np.abs(log.Pvals)) <= 1e-4 * max(log.grad_sq)

    def test_zero_data(self, stable_wave):
        _, phi, _ = stable_wave
        log = evolve(zero_field(phi.grid), STABLE, 1e-3, 0.05)
        for name in ("mass", "energy", "fvals", "Pvals", "h1_norm"):
            assert np.all(np.asarray(getattr(log, name)) == 0)

    def test_time_reversal(self, stable_wave):
        _, phi, phi_h = stable_wave
        u0 = phi_h + random_bump(phi.grid, 1e-2, seed=2)
        st = Stepper(STABLE, phi.grid)
        from graphwave.graph_core import dofs_to_field, field_to_dofs
        v = field_to_dofs(u0).astype(complex)
        for _ in range(200):
            v = st.advance(v, 1e-3)
        for _ in range(200):
            v = st.advance(v, -1e-3)
        assert h1_norm(dofs_to_field(v, phi.grid) - u0) <= 1e-6

    def test_generic_run_virial(self, stable_wave):
        _, phi, phi_h = stable_wave
        u0 = phi_h + random_bump(phi.grid, 1e-2, seed=4, width=0.3)
        log = quiet_evolve(u0, STABLE, 1e-3, 1.0, reference=phi_h)
        assert virial_check(log) <= 0.02
        assert log.relative_drift("mass") <= 1e-8
        assert log.relative_drift("energy") <= 1e-6

    def test_linear_run_virial(self, stable_wave):
        _, phi, _ = stable_wave
        u0 = phi + random_bump(phi.grid, 0.5, seed=6)
        log = quiet_evolve(u0, STABLE, 1e-3, 0.5, nonlinear=False)
        assert virial_check(log) <= 0.02

    def test_energy_drift_second_order(self, stable_wave):
        _, phi, phi_h = stable_wave
        u0 = phi_h + random_bump(phi.grid, 0.05, seed=7, width=0.3)
        drifts = []
        for dt in (4e-3, 2e-3):
            log = quiet_evolve(u0, STABLE, dt, 0.4, sample_every=1, reference=phi_h)
            drifts.append(log.relative_drift("energy"))
        assert drifts[0] / drifts[1] >= 2.5

    def test_horizon_must_be_multiple_of_dt(self, stable_wave):
        _, phi, _ = stable_wave
        with pytest.raises(PreconditionError):
            evolve(phi, STABLE, 3e-3, 0.01)

    def test_wall_abort(self, stable_wave):
        _, phi, _ = stable_wave
        g = phi.grid
        vals = np.zeros((g.N, g.M), dtype=complex)
        vals[:, 1:-1] = np.exp(-((g.x[1:-1] - 0.95 * g.L) / 0.05) ** 2)
        from graphwave.graph_core import GraphField
        u0 = GraphField(g, vals) + phi
        with pytest.warns(RuntimeWarning):
            log = evolve(u0, STABLE, 1e-3, 0.05, sample_every=1, on_wall="abort")
        assert log.status.kind == WALL

    def test_csv(self, stable_wave):
        _, phi, phi_h = stable_wave
        log = quiet_evolve(phi_h, STABLE, 1e-3, 0.02, sample_every=5)
        lines = log.to_csv().splitlines()
        assert lines[0] == "t,mass,energy,f,P,orbit_dist,h1_norm"
        assert len(lines) == 1 + len(log.times)
        assert float(lines[2].split(",")[0]) == log.times[1]
        assert log.to_csv() == quiet_evolve(phi_h, STABLE, 1e-3, 0.02, sample_every=5).to_csv()


class TestClassify:
    def make_log(self, dist, h1, failed=None):
        log = TrajectoryLog(times=list(np.arange(len(dist)) * 0.1), orbit_dist=list(dist),
                            h1_norm=list(h1))
        log.stepper_failed_at = failed
        return log

    def test_completed(self):
        assert classify_run(self.make_log([0, 0.01, 0.02], [1, 1, 1]), 0.1).kind == COMPLETED

    def test_escape(self):
        status = classify_run(self.make_log([0, 0.05, 0.2, 0.5], [1, 1, 1.1, 1.2]), 0.1)
        assert status == RunStatus(ORBIT_ESCAPE, 0.2)

    def test_blowup_outranks_escape(self):
        status = classify_run(self.make_log([0.2, 0.3, 0.5], [1, 2, 3], failed=0.25), 0.1)
        assert status == RunStatus(BLOWUP, 0.25)
        status = classify_run(self.make_log([0.2, 0.3, 0.5], [1, 2, 2e3]), 0.1)
        assert status.kind == BLOWUP

    def test_status_format(self):
        assert str(RunStatus(ORBIT_ESCAPE, 0.1)) == "OrbitEscape(0.10000000000000001)"


class TestPerturbations:
    def test_sizes(self, stable_wave):
        _, phi, _ = stable_wave
        assert h1_norm(random_bump(phi.grid, 1e-3, seed=0)) == pytest.approx(1e-3, rel=1e-12)
        assert h1_norm(structured_bump(phi.grid, 1e-3)) == pytest.approx(1e-3, rel=1e-12)

    def test_seeded(self, stable_wave):
        _, phi, _ = stable_wave
        a = random_bump(phi.grid, 1e-3, seed=9)
        b = random_bump(phi.grid, 1e-3, seed=9)
        assert np.array_equal(a.values, b.values)
        assert np.all(a.values[:, -1] == 0)
