import math

import numpy as np
import pytest

from steepwell.acceptance import gradient_error_ratios
from steepwell.constants import lemma_window, limit_spectrum, spectral_setup
from steepwell.discretization import forms_for
from steepwell.errors import GeometryNotFound, InnerMaxDiverged, QuadratureOverflow
from steepwell.limit_problem import _decomposition
from steepwell.model_config import NonlinearitySpec, box_problem
from steepwell.spectral import solve_pencil
from steepwell.variational import (
    Energy,
    energy_and_gradient,
    euler_lagrange_residual,
    find_linking_geometry,
    linking_solve,
    mountain_pass_solve,
    solve,
)

POWER = NonlinearitySpec("power", 4.0)


def _indefinite(lam, nl=POWER, m=24):
    return box_problem(N=1, a0=-15.0, b0=0.0, lam=lam, modes_per_dim=m, quadrature_panels=64, nonlinearity=nl)


@pytest.fixture(scope="module")
def definite_run(definite_params):
    f = forms_for(definite_params)
    geom = find_linking_geometry(f, POWER, None)
    return f, geom, mountain_pass_solve(f, POWER, geom)


@pytest.fixture(scope="module")
def linking_run():
    p = _indefinite(100.0)
    f = forms_for(p)
    dec = solve_pencil(f, 6)
    geom = find_linking_geometry(f, POWER, dec)
    return f, dec, geom, linking_solve(f, POWER, dec, geom)


class TestEnergy:
    def test_zero(self, indefinite_forms):
        st = energy_and_gradient(indefinite_forms, POWER, np.zeros(24))
        assert st.energy == 0.0 and not np.any(st.grad) and st.grad_norm == 0.0

    @pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
    def test_single_mode_closed_form(self, t):
        p = box_problem(N=1, a0=0.0, b0=0.0, lam=1.0, domain=None, modes_per_dim=8,
                        quadrature_panels=16, nonlinearity=POWER)
        f = forms_for(p)
        u = t * np.eye(8)[0]
        expected = 0.5 * math.pi**4 * t**2 - 0.375 * t**4
        assert Energy(f, POWER).value(u) == pytest.approx(expected, rel=1e-13)

    def test_finite_differences(self, indefinite_forms, rng):
        fn = Energy(indefinite_forms, POWER)
        for _ in range(10):
            u = rng.standard_normal(24) / (1 + np.arange(24))
            h = rng.standard_normal(24) / (1 + np.arange(24))
            st = energy_and_gradient(indefinite_forms, POWER, u)
            exact = st.grad @ indefinite_forms.A @ h
            errs = [abs((fn.value(u + e * h) - fn.value(u - e * h)) / (2 * e) - exact) for e in (1e-2, 1e-3)]
            assert errs[1] <= 0.02 * errs[0] + 1e-9 * abs(exact)

    def test_second_order_ratios(self, indefinite_params):
        r = gradient_error_ratios(indefinite_params, pairs=10)
        assert np.all((r > 0.15) & (r < 0.35))

    def test_hessian_matches_gradient_differences(self, indefinite_forms, rng):
        fn = Energy(indefinite_forms, POWER)
        u, h = rng.standard_normal(24) * 0.5, rng.standard_normal(24)
        eps = 1e-5
        fd = (fn.coefficient_gradient(u + eps * h) - fn.coefficient_gradient(u - eps * h)) / (2 * eps)
        np.testing.assert_allclose(fn.hessian(u) @ h, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())

    def test_even(self, indefinite_forms, rng):
        fn = Energy(indefinite_forms, POWER)
        for _ in range(10):
            u = rng.standard_normal(24)
            assert fn.value(-u) == fn.value(u)

    def test_overflow(self, indefinite_forms):
        with pytest.raises(QuadratureOverflow):
            energy_and_gradient(indefinite_forms, POWER, np.full(24, 1e200))


class TestGeometry:
    def test_definite_mountain_pass(self, definite_run):
        _, geom, _ = definite_run
        assert geom.regime == "mountain-pass" and geom.negative_dim == 0
        assert geom.R > geom.rho > 0 and geom.kappa > 0 and geom.boundary_sup <= 0

    def test_linking_at_lambda_100(self, linking_run):
        _, _, geom, _ = linking_run
        assert geom.regime == "linking" and geom.negative_dim == 1
        assert geom.R > geom.rho > 0 and geom.kappa > 0 and geom.boundary_sup <= 0

    @pytest.mark.xfail(strict=True, reason="at lambda=1e4 the discrete first level already exceeds 1")
    def test_linking_dimension_at_1e4(self):
        f = forms_for(_indefinite(1e4))
        assert find_linking_geometry(f, POWER, _decomposition(f)).negative_dim == 1

    def test_saturating_below_window(self):
        setup = spectral_setup(_indefinite(1e4).well.well_box, -15.0, 0.0)
        edge, dstar = lemma_window(-15.0, 0.0, setup)
        p = _indefinite(1e4, NonlinearitySpec("saturating", 2.0, 0.5 * edge * dstar))
        f = forms_for(p)
        with pytest.raises(GeometryNotFound):
            find_linking_geometry(f, p.nonlinearity, solve_pencil(f, 6))

    def test_seeded(self, indefinite_forms):
        dec = _decomposition(indefinite_forms)
        a = find_linking_geometry(indefinite_forms, POWER, dec, seed=3)
        b = find_linking_geometry(indefinite_forms, POWER, dec, seed=3)
        assert (a.rho, a.kappa, a.R) == (b.rho, b.kappa, b.R)


class TestMountainPass:
    def test_converges(self, definite_run, definite_params):
        f, geom, cp = definite_run
        assert cp.grad_norm <= 1e-8 and cp.energy > 0
        assert euler_lagrange_residual(f, POWER, cp.coeffs) <= 1e-8
        assert cp.energy >= geom.kappa / 2 and f.norm(cp.coeffs) >= geom.rho / 2

    def test_weak_form_coordinatewise(self, definite_run):
        f, _, cp = definite_run
        u = cp.coeffs
        r = f.A @ u - f.Gm @ u - f.basis.project(POWER.f(f.basis.synthesize(u)))
        assert np.all(np.abs(r) <= 1e-8 * np.sqrt(np.diag(f.A)) * max(1.0, f.norm(u)))

    def test_mirrored_endpoint(self, definite_run):
        f, geom, cp = definite_run
        mirrored = mountain_pass_solve(f, POWER, geom, endpoint=-geom.R * geom.endpoint)
        assert mirrored.energy == pytest.approx(cp.energy, abs=1e-8 * cp.energy)

    def test_infinite_tolerance(self, definite_run):
        f, geom, _ = definite_run
        cp = mountain_pass_solve(f, POWER, geom, tol=math.inf)
        assert cp.iterations == 0 and cp.newton_steps == 0
        fn = Energy(f, POWER)
        path = [s * geom.R * geom.endpoint for s in np.linspace(0, 1, 41)]
        j = int(np.argmax([fn.value(z) for z in path]))
        np.testing.assert_allclose(cp.coeffs, path[j], rtol=1e-14, atol=1e-14 * geom.R)

    def test_cerami_diagnostics(self, definite_run):
        f, _, cp = definite_run
        tr = cp.cerami_trace
        assert tr.shape[1] == 3 and np.all(tr[:, 1] <= cp.norm_bound)
        ints = Energy(f, POWER).nonlinear_integrals(cp.coeffs)
        lhs = 0.5 * ints["int_fu_minus_2F"]
        assert lhs == pytest.approx(POWER.l_star / 2 * ints["lp_norm_p"], rel=1e-12)
        # at a critical point E = ½∫(f(u)u − 2F(u)) exactly
        assert lhs <= cp.energy + 1e-6 * cp.energy


class TestLinking:
    def test_converges(self, linking_run):
        f, _, geom, cp = linking_run
        assert cp.grad_norm <= 1e-6 and cp.energy > geom.kappa / 2 > 0
        assert euler_lagrange_residual(f, POWER, cp.coeffs) <= 1e-6

    def test_energy_matches_definite_split(self, linking_run):
        f, _, _, cp = linking_run
        ints = Energy(f, POWER).nonlinear_integrals(cp.coeffs)
        assert cp.energy == pytest.approx(0.5 * ints["int_fu_minus_2F"], rel=1e-6)

    def test_empty_negative_subspace_matches_mountain_pass(self, definite_run):
        f, geom, cp = definite_run
        lk = linking_solve(f, POWER, None, geom, tol=1e-8)
        assert lk.energy == pytest.approx(cp.energy, rel=1e-9)

    def test_at_1e4(self):
        f = forms_for(_indefinite(1e4))
        dec = _decomposition(f)
        geom = find_linking_geometry(f, POWER, dec)
        cp = linking_solve(f, POWER, dec, geom)
        assert cp.grad_norm <= 1e-6 and cp.energy > 0

    def test_saturating_midway(self):
        base = _indefinite(1e4)
        setup = spectral_setup(base.well.well_box, -15.0, 0.0)
        spec_vals = limit_spectrum(-15.0, 0.0, setup)
        nl = NonlinearitySpec("saturating", 2.0, 0.5 * (spec_vals[0] + spec_vals[1]))
        f = forms_for(base)
        dec = _decomposition(f)
        cp = linking_solve(f, nl, dec, find_linking_geometry(f, nl, dec))
        assert cp.energy > 0 and euler_lagrange_residual(f, nl, cp.coeffs) <= 1e-6

    def test_radius_cap(self, linking_run):
        f, dec, geom, _ = linking_run
        with pytest.raises(InnerMaxDiverged):
            linking_solve(f, POWER, dec, geom, radius_cap=1e-3 * geom.rho)

    def test_solve_dispatch(self, linking_run, definite_run):
        f, dec, _, cp = linking_run
        assert solve(f, POWER, dec).energy == pytest.approx(cp.energy, rel=1e-9)
        fd, _, cpd = definite_run
        assert solve(fd, POWER).method == "mountain-pass"
