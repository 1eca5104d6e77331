import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphwave.errors import PreconditionError
from graphwave.graph_core import (GraphField, Grid, ModelParams, assemble_forms, dofs_to_field,
                                  field_to_dofs, fd_weights, h1_norm, inertia, lp_norm,
                                  make_grid, quadratic_form_F_beta, tanh_power_integral,
                                  vertex_term, zero_field)
from graphwave.profiles import build_critical_point, soliton_profile


def taper(grid, f):
    """Samples of f on every edge multiplied by a smooth cutoff vanishing at L."""
    x = grid.x
    cut = np.cos(0.5 * np.pi * x / grid.L) ** 2
    return np.broadcast_to(f(x) * cut, (grid.N, grid.M))


class TestModelParams:
    def test_thresholds(self):
        P = ModelParams(3, 25, -1, 3)
        assert P.omega_floor == 9 and P.omega_star == 18
        assert P.t_symmetric == pytest.approx(0.6)

    @pytest.mark.parametrize("args", [(1, 1, -1, 2), (3, 0, -1, 2), (3, 1, 0, 2), (3, 1, -1, 1),
                                      (3, 1, -1, 2.5), (float("nan"), 1, -1, 2)])
    def test_invalid(self, args):
        with pytest.raises(PreconditionError):
            ModelParams(*args)


class TestGrid:
    def test_tail_length(self):
        g = make_grid(ModelParams(3, 25, -1, 3), 512)
        assert math.exp(-5 * g.L) < 1e-14 and g.L >= 6.45

    def test_tail_length_unit_frequency(self):
        g = make_grid(ModelParams(3, 1, -1, 3), 512)
        assert g.L >= 32.3

    def test_too_few_points(self):
        with pytest.raises(PreconditionError):
            make_grid(ModelParams(3, 25, -1, 3), 2)
        with pytest.raises(PreconditionError):
            Grid(3, 1.0, 2)

    def test_refined_spacing(self):
        g = Grid(2, 4.0, 65)
        assert g.refined(2).h == pytest.approx(g.h / 2)


class TestNorms:
    def test_zero_field(self):
        g = Grid(3, 5.0, 129)
        z = zero_field(g)
        assert lp_norm(z, 2) == 0 and lp_norm(z, 4) == 0

    def test_half_soliton_mass(self):
        # sqrt(2) sech(x) on one edge: int_0^inf 2 sech^2 = 2
        g = make_grid(ModelParams(3, 1, -1, 2), 4096)
        vals = np.zeros((2, g.M))
        vals[0] = soliton_profile(3, 1.0, 0.0)(g.x)
        assert lp_norm(GraphField(g, vals), 2) ** 2 == pytest.approx(2.0, rel=1e-10)

    @given(c=st.complex_numbers(min_magnitude=1e-6, max_magnitude=10, allow_nan=False,
                                allow_infinity=False),
           q=st.sampled_from([1.0, 2.0, 3.5, 4.0]))
    def test_homogeneity(self, c, q):
        g = Grid(2, 6.0, 257)
        f = GraphField(g, taper(g, lambda x: np.exp(-x)))
        assert lp_norm(c * f, q) == pytest.approx(abs(c) * lp_norm(f, q), rel=1e-12)

    @given(theta=st.floats(0, 2 * np.pi))
    def test_gauge_invariance(self, theta):
        P = ModelParams(3, 4, -1, 2)
        g = Grid(2, 6.0, 257)
        vals = np.stack([taper(g, lambda x: np.exp(-x))[0], taper(g, lambda x: x * np.exp(-x))[1]])
        f = GraphField(g, vals)
        r = np.exp(1j * theta) * f
        for a, b in [(lp_norm(f, 2), lp_norm(r, 2)), (lp_norm(f, 4), lp_norm(r, 4)),
                     (quadratic_form_F_beta(f, P), quadratic_form_F_beta(r, P)),
                     (h1_norm(f), h1_norm(r))]:
            assert b == pytest.approx(a, rel=1e-13)

    def test_refinement_ratio(self):
        # Simpson plus sixth-order differences converge faster than the O(h^2)
        # contract, so each refinement must cut the error by at least 3.5
        P = ModelParams(3, 4, -1, 2)
        exact = 1.0 - math.exp(-16.0)  # int_0^8 e^{-2x} dx on two edges
        errs_q, errs_F = [], []
        for M in (17, 33, 65):
            g = Grid(2, 8.0, M)
            f = GraphField(g, np.broadcast_to(np.exp(-g.x), (2, M)))
            errs_q.append(abs(lp_norm(f, 2) ** 2 - exact))
            errs_F.append(abs(quadratic_form_F_beta(f, P) - (exact - 4.0)))
        for errs in (errs_q, errs_F):
            assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


class TestVertexTerm:
    def test_constant_vertex_values(self):
        P = ModelParams(3, 4, -2, 3)
        g = Grid(3, 4.0, 129)
        f = GraphField(g, 1.5 * np.broadcast_to(np.cos(0.5 * np.pi * g.x / g.L), (3, g.M)))
        assert vertex_term(f, P) == pytest.approx((3 * 1.5) ** 2 / -2)

    def test_balanced_vertex_values(self):
        P = ModelParams(3, 4, -2, 2)
        g = Grid(2, 4.0, 129)
        row = np.cos(0.5 * np.pi * g.x / g.L)
        f = GraphField(g, np.stack([row, -row]))
        assert vertex_term(f, P) == 0
        assert quadratic_form_F_beta(f, P) == pytest.approx((np.pi / 8) ** 2 * g.L, rel=1e-8)

    def test_nehari_of_symmetric_profile(self):
        P = ModelParams(3, 25, -1, 2)
        _, phi = build_critical_point(P, points_per_edge=2048)
        val = quadratic_form_F_beta(phi, P) + 25 * lp_norm(phi, 2) ** 2 - lp_norm(phi, 4) ** 4
        assert abs(val) <= 1e-6 * lp_norm(phi, 4) ** 4


class TestForms:
    def test_symmetry_and_mass_positive(self):
        P = ModelParams(3, 4, -1, 3)
        g = Grid(3, 10.0, 200)
        forms = assemble_forms(P, g, lambda x: 4.0 - 3.0 / np.cosh(x) ** 2)
        assert abs(forms.K - forms.K.T).max() == 0
        mass = type(forms)(forms.Mmass, forms.Mmass, g)
        inn = inertia(mass)
        assert inn.negative == 0 and inn.zero == 0

    def test_bottom_of_spectrum_attractive(self):
        import scipy.sparse.linalg as spla
        P = ModelParams(3, 4, -1.5, 3)
        for M in (512,):
            g = Grid(3, 15.0, M)
            forms = assemble_forms(P, g)
            lam = spla.eigsh(forms.K.tocsc(), k=1, M=forms.Mmass.tocsc(), sigma=-10,
                             which="LM")[0][0]
            assert lam == pytest.approx(-4.0, rel=1e-3)

    def test_bottom_of_spectrum_repulsive(self):
        import scipy.sparse.linalg as spla
        P = ModelParams(3, 4, 1.0, 2)
        lams = []
        for M in (256, 1024):
            g = Grid(2, 10.0, M)
            forms = assemble_forms(P, g)
            lams.append(spla.eigsh(forms.K.tocsc(), k=1, M=forms.Mmass.tocsc(), sigma=-1,
                                   which="LM")[0][0])
        assert min(lams) > -1e-9 and lams[1] < lams[0]

    def test_form_vs_matrix(self):
        # vT K v is the exact Dirichlet form of the P1 interpolant, so it matches the
        # quadrature of the smooth field up to the O(h^2) interpolation error
        P = ModelParams(3, 4, -1, 2)
        rel = []
        for M in (257, 513):
            g = Grid(2, 8.0, M)
            f = GraphField(g, taper(g, lambda x: np.exp(-x) * (1 + x)))
            v = field_to_dofs(f)
            K = assemble_forms(P, g).K
            rel.append(abs(v @ (K @ v) - quadratic_form_F_beta(f, P)) / quadratic_form_F_beta(f, P))
        assert rel[1] < 1e-4 and 3.5 <= rel[0] / rel[1] <= 4.5

    def test_dof_roundtrip(self):
        g = Grid(3, 2.0, 65)
        vals = np.random.default_rng(0).normal(size=(3, 65))
        vals[:, -1] = 0
        f = GraphField(g, vals)
        assert np.array_equal(dofs_to_field(field_to_dofs(f), g).values, vals)


class TestParameterIntegrals:
    def test_polynomial_case(self):
        assert tanh_power_integral(0.0, 1.0) == pytest.approx(2 / 3, abs=1e-14)
        assert tanh_power_integral(-0.5, 1.0) == pytest.approx((1 - 1 / 3) + (0.5 - 0.125 / 3),
                                                               abs=1e-14)

    def test_quarter_circle(self):
        assert tanh_power_integral(0.0, 0.5) == pytest.approx(np.pi / 4, abs=1e-14)

    @given(lo=st.floats(-1, 1), alpha=st.floats(-0.9, 4))
    def test_against_quad(self, lo, alpha):
        from scipy.integrate import quad
        # algebraic-weight quadrature carries the endpoint singularities exactly
        if lo == 1:
            ref = 0.0
        elif lo == -1:
            ref = quad(lambda t: 1.0, -1, 1, weight="alg", wvar=(alpha, alpha))[0]
        else:
            ref = quad(lambda t: (1 + t) ** alpha, lo, 1, weight="alg", wvar=(0, alpha))[0]
        assert tanh_power_integral(lo, alpha) == pytest.approx(ref, rel=1e-7, abs=1e-10)

    def test_bad_alpha(self):
        with pytest.raises(PreconditionError):
            tanh_power_integral(0.0, -1.0)


def test_fd_weights_exact_for_polynomials():
    xs = np.arange(7.0)
    w = fd_weights(0.0, xs, 1)
    assert w @ xs ** 3 == pytest.approx(0.0, abs=1e-10)
    assert w @ xs == pytest.approx(1.0)
