import numpy as np
import pytest

from graphwave.errors import PreconditionError
from graphwave.graph_core import ModelParams, inertia
from graphwave.profiles import profile_spec
from graphwave.spectra import (POLE, grillakis_lower_bound, kernel_report, lambda_floor,
                               morse_by_inertia, morse_by_shooting, operator_pair,
                               shoot_log_derivative, unstable_modes)


def symmetric(p, om, beta, N):
    return profile_spec(ModelParams(p, om, beta, N), "symmetric")


class TestShooting:
    @pytest.mark.parametrize("p,om,beta,N", [(3, 12, -1, 3), (3, 12, 1, 3), (5, 30, 1.5, 4),
                                             (2.5, 7, -2, 2)])
    def test_zero_energy_values(self, p, om, beta, N):
        P = ModelParams(p, om, beta, N)
        a = profile_spec(P, "symmetric").a1
        expected = beta * om * (p - 1) / (2 * N) * (N * N / (beta * beta * om) - 1)
        F1 = shoot_log_derivative(0.0, a, "L1", P)
        F2 = shoot_log_derivative(0.0, a, "L2", P)
        assert F1 - N / beta == pytest.approx(expected, rel=1e-6)
        assert F2 == pytest.approx(N / beta, rel=1e-6)

    def test_increasing_between_poles(self):
        P = ModelParams(3, 25, -1, 3)
        a = profile_spec(P, "symmetric").a1
        lams = np.linspace(lambda_floor(P), -1e-3, 300)
        vals = [shoot_log_derivative(l, a, "L1", P) for l in lams]
        prev = None
        for v in vals:
            if v is POLE:
                prev = None
                continue
            if prev is not None and v < prev:
                # a decrease is only allowed across a pole (jump from +inf to -inf)
                assert prev > 0 > v
            prev = v

    def test_positive_lambda_rejected(self):
        with pytest.raises(PreconditionError):
            shoot_log_derivative(0.1, 0.0, "L1", ModelParams(3, 25, -1, 3))


# expected counts for p=3 and the symmetric profile
MORSE_TABLE = [
    (-1, 3, 12, (1, 0)), (-1, 3, 25, (3, 0)),
    (1, 3, 12, (5, 2)), (1, 3, 27, (3, 2)),
    (-1, 2, 6, (1, 0)), (1, 2, 12, (2, 1)),
]


class TestMorse:
    @pytest.mark.parametrize("beta,N,om,expected", MORSE_TABLE)
    def test_both_methods(self, beta, N, om, expected):
        spec = symmetric(3, om, beta, N)
        s = morse_by_shooting(spec)
        i = morse_by_inertia(spec, 512)
        assert (s.n1, s.n2) == expected == (i.n1, i.n2)

    def test_shooting_eigenvalues_match_matrix(self):
        import scipy.sparse.linalg as spla
        spec = symmetric(3, 12, 1, 3)
        s = morse_by_shooting(spec)
        pair = operator_pair(spec, 1024)
        vals = spla.eigsh(pair.K1.K.tocsc(), k=len(s.eigenvalues1), M=pair.K1.Mmass.tocsc(),
                          sigma=lambda_floor(spec.params), which="LM")[0]
        fem, shot = np.sort(vals), np.sort(s.eigenvalues1)
        assert np.allclose(fem, shot, rtol=5e-3)
        assert np.all(fem >= shot)  # Galerkin eigenvalues are upper bounds

    def test_counts_between_floor_and_zero(self):
        spec = symmetric(3, 25, -1, 3)
        s = morse_by_shooting(spec)
        for ev in s.eigenvalues1 + s.eigenvalues2:
            assert lambda_floor(spec.params) < ev < 0

    def test_l1_below_l2(self):
        spec = profile_spec(ModelParams(3, 60, 1, 5), "asymmetric", 1)
        pair = operator_pair(spec, 512)
        assert inertia(pair.K1).negative >= inertia(pair.K2).negative

    def test_inertia_needs_fine_grid(self):
        with pytest.raises(PreconditionError):
            morse_by_inertia(symmetric(3, 25, -1, 3), 256)


class TestKernel:
    def test_generic(self):
        rep = kernel_report(symmetric(3, 25, -1, 3))
        assert rep.ker1_dim == 0 and rep.ker2_dim == 1 and rep.overlaps[0] >= 0.999

    def test_at_bifurcation(self):
        rep = kernel_report(symmetric(3, 18, -1, 3))
        assert rep.ker1_dim == 2


class TestUnstableModes:
    def test_unstable_symmetric(self):
        spec = symmetric(3, 25, -1, 3)
        rates = unstable_modes(spec)
        assert rates and rates[0] > 0
        assert grillakis_lower_bound(spec) >= 2

    def test_stable_symmetric(self):
        spec = symmetric(3, 12, -1, 3)
        assert unstable_modes(spec) == []
        assert grillakis_lower_bound(spec) == 0

    def test_asymmetric_bound(self):
        spec = profile_spec(ModelParams(3, 60, -1, 5), "asymmetric", 2)
        bound = grillakis_lower_bound(spec)
        assert bound >= 1 and len(unstable_modes(spec)) >= bound

    def test_hamiltonian_symmetry(self):
        spec = profile_spec(ModelParams(3, 60, 1, 5), "asymmetric", 1)
        _, mu = unstable_modes(spec, return_all=True)
        # mu = -lambda^2, so the quadruple {l, -l, conj l, -conj l} means mu comes in conjugate pairs
        nonreal = mu[np.abs(mu.imag) > 1e-8 * np.max(np.abs(mu))]
        for m in nonreal:
            assert np.min(np.abs(nonreal - np.conj(m))) <= 1e-6 * abs(m)

    def test_dense_cap(self):
        with pytest.raises(PreconditionError):
            unstable_modes(symmetric(3, 25, -1, 3), 1024)
