import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad

from steepwell.constants import embedding_constants
from steepwell.discretization import (
    assemble_forms,
    build_basis,
    dump_forms,
    evaluate_field,
    forms_for,
    gauss_legendre_panels,
    sine_overlap_1d,
)
from steepwell.errors import InvalidLambda, OutOfDomain, ResourceLimit
from steepwell.model_config import Box, ProblemParams, WellPotential, box_problem

PI2 = math.pi**2


class TestBasis:
    @pytest.mark.parametrize(
        "box, m, expected",
        [
            (Box.cube(0.0, 1.0, 1), 3, [PI2, 4 * PI2, 9 * PI2]),
            (Box.cube(-1.0, 2.0, 1), 2, [PI2 / 9, 4 * PI2 / 9]),
            (Box.cube(0.0, 1.0, 2), 2, [2 * PI2, 5 * PI2, 5 * PI2, 8 * PI2]),
        ],
    )
    def test_nu(self, box, m, expected):
        np.testing.assert_allclose(build_basis(box, m).nu, expected, rtol=1e-15)

    def test_lexicographic_last_axis_fastest(self):
        b = build_basis(Box.cube(0.0, 1.0, 2), 3)
        assert b.indices[:4].tolist() == [[1, 1], [1, 2], [1, 3], [2, 1]]

    def test_mode_cap(self):
        with pytest.raises(ResourceLimit):
            build_basis(Box.cube(0.0, 1.0, 3), 17)
        with pytest.raises(ValueError):
            build_basis(Box.cube(0.0, 1.0, 1), 1)

    def test_orthonormal_by_quadrature(self):
        b = build_basis(Box((-1.0, 0.0), (2.0, 1.5)), 6, quadrature_panels=16)
        np.testing.assert_allclose(b.weighted_gram(np.ones(b.quadrature.shape)), np.eye(b.size), atol=1e-12)


class TestOverlaps:
    @pytest.mark.parametrize("a, b", [(0.0, 1.0), (-1.0, 2.0), (0.3, 0.31), (1.2, 1.9)])
    def test_against_adaptive_quadrature(self, a, b):
        lo, L, m = -1.0, 3.0, 12
        W = sine_overlap_1d(m, lo, L, m, lo, L, a, b)
        phi = lambda k, x: math.sqrt(2 / L) * math.sin(k * math.pi * (x - lo) / L)
        for k, l in [(1, 1), (1, 2), (5, 5), (7, 12), (12, 12)]:
            ref, _ = quad(lambda x: phi(k, x) * phi(l, x), a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
            assert abs(W[k - 1, l - 1] - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_cross_family(self):
        # Ω-sines against D-sines
        W = sine_overlap_1d(4, 0.0, 1.0, 5, -1.0, 3.0, 0.0, 1.0)
        psi = lambda k, x: math.sqrt(2) * math.sin(k * math.pi * x)
        chi = lambda l, x: math.sqrt(2 / 3) * math.sin(l * math.pi * (x + 1) / 3)
        ref, _ = quad(lambda x: psi(3, x) * chi(4, x), 0.0, 1.0, epsabs=1e-14)
        assert W[2, 3] == pytest.approx(ref, abs=1e-13)

    def test_gauss_panels_align_with_breaks(self):
        x, w = gauss_legendre_panels([-1.0, 0.0, 1.0, 2.0], 6)
        assert w.sum() == pytest.approx(3.0, rel=1e-14)
        assert np.sum(w[(x > 0) & (x < 1)]) == pytest.approx(1.0, rel=1e-14)


class TestForms:
    def test_definite_gm_zero(self, definite_forms):
        assert definite_forms.negative_part_vanishes
        assert not np.any(definite_forms.Gm)

    def test_d_equal_omega_diagonal(self):
        p = box_problem(N=1, a0=-15.0, lam=1e4, domain=None, modes_per_dim=24)
        f = forms_for(p)
        nu = f.basis.nu
        np.testing.assert_allclose(f.A, np.diag(nu**2), atol=1e-9)
        np.testing.assert_allclose(f.Gm, np.diag(15 * nu), atol=1e-12)

    def test_negative_b0_split(self):
        lam = 10.0
        p = box_problem(N=1, a0=1.0, b0=-2.0, lam=lam, modes_per_dim=10)
        f = forms_for(p)
        inside = f.basis.region_gram(p.well.well_box)
        np.testing.assert_allclose(f.P_minus, 2.0 * inside, atol=1e-14)
        np.testing.assert_allclose(f.P_plus, (lam - 2.0) * (np.eye(10) - inside), atol=1e-13)

    def test_potential_matches_quadrature(self):
        p = box_problem(N=1, a0=1.0, b0=-2.0, lam=10.0, modes_per_dim=8)
        f = forms_for(p)
        lo, L = -1.0, 3.0
        phi = lambda k, x: math.sqrt(2 / L) * math.sin(k * math.pi * (x - lo) / L)
        weight = lambda x: max(10.0 * (0.0 if 0 <= x <= 1 else 1.0) - 2.0, 0.0)
        for k, l in [(1, 1), (2, 5), (8, 8)]:
            ref = sum(
                quad(lambda x: weight(x) * phi(k, x) * phi(l, x), a, b, epsabs=1e-14, epsrel=1e-13)[0]
                for a, b in [(-1.0, 0.0), (0.0, 1.0), (1.0, 2.0)]
            )
            assert abs(f.P_plus[k - 1, l - 1] - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_ramp_uses_quadrature(self):
        well = WellPotential(Box((0.0,), (1.0,)), Box((-1.0,), (2.0,)), 1.0, ramp_width=0.25)
        p = ProblemParams(N=1, a0=-1.0, b0=0.0, lam=50.0, well=well, modes_per_dim=8, quadrature_panels=64)
        f = forms_for(p)
        sharp = forms_for(box_problem(N=1, a0=-1.0, lam=50.0, modes_per_dim=8))
        # the ramp lowers b near ∂Ω, so the potential part is smaller as a form
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.standard_normal(8)
            assert u @ f.P_plus @ u <= u @ sharp.P_plus @ u + 1e-10

    def test_symmetry_and_definiteness(self, indefinite_forms):
        f = indefinite_forms
        assert np.array_equal(f.A, f.A.T) and np.array_equal(f.Gm, f.Gm.T)
        assert np.all(np.linalg.eigvalsh(f.A) > 0)
        assert np.all(np.linalg.eigvalsh(f.Gm) > -1e-10)
        np.testing.assert_array_equal(f.D, f.A - f.Gm)

    def test_lambda_checked(self):
        p = box_problem(N=1, b0=-2.0, lam=1.0)
        with pytest.raises(InvalidLambda):
            forms_for(p)

    def test_monotone_in_lambda(self, rng):
        base = box_problem(N=1, a0=-3.0, b0=-2.0, lam=5.0, modes_per_dim=12)
        basis = forms_for(base).basis
        lams = [5.0, 20.0, 300.0]
        forms = [assemble_forms(basis, base.with_lambda(l)) for l in lams]
        for _ in range(50):
            u = rng.standard_normal(12)
            a = [u @ f.A @ u for f in forms]
            g = [u @ f.Gm @ u for f in forms]
            assert a[0] <= a[1] <= a[2] and g[0] >= g[1] - 1e-12 and g[1] >= g[2] - 1e-12

    def test_gn_inequality(self, indefinite_forms, rng):
        f = indefinite_forms
        for _ in range(100):
            u = rng.standard_normal(len(f.k_diag))
            assert (u @ f.G @ u) ** 2 <= (u @ f.K @ u) * (u @ u) * (1 + 1e-14)

    def test_embedding_inequality_3d(self, rng):
        p = box_problem(N=3, a0=-40.0, lam=100.0, modes_per_dim=4, quadrature_panels=8)
        f = forms_for(p)
        C = embedding_constants(p).C_lambda
        for _ in range(100):
            u = rng.standard_normal(f.A.shape[0])
            assert u @ u <= C * (u @ f.A @ u)


class TestEvaluateField:
    def test_first_mode_midpoint(self):
        b = build_basis(Box.cube(0.0, 1.0, 1), 5)
        e1 = np.eye(5)[0]
        assert evaluate_field(b, e1, [0.5])[0] == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_zero(self):
        b = build_basis(Box.cube(0.0, 1.0, 2), 4)
        assert not np.any(evaluate_field(b, np.zeros(16), np.random.default_rng(0).random((10, 2))))

    def test_direct_summation(self, rng):
        box = Box((-1.0, 0.0), (2.0, 0.5))
        b = build_basis(box, 5)
        c = rng.standard_normal(25)
        pts = np.column_stack([rng.uniform(-1, 2, 30), rng.uniform(0, 0.5, 30)])
        ref = np.zeros(30)
        for (k1, k2), ck in zip(b.indices, c):
            ref += ck * (math.sqrt(2 / 3) * np.sin(k1 * np.pi * (pts[:, 0] + 1) / 3)
                         * math.sqrt(2 / 0.5) * np.sin(k2 * np.pi * pts[:, 1] / 0.5))
        np.testing.assert_allclose(evaluate_field(b, c, pts), ref, atol=1e-12)

    def test_synthesis_consistent_with_pointwise(self, rng):
        b = build_basis(Box((-1.0, 0.0), (2.0, 0.5)), 4, well=Box((0.0, 0.1), (1.0, 0.4)), quadrature_panels=4)
        c = rng.standard_normal(16)
        np.testing.assert_allclose(b.synthesize(c).ravel(), evaluate_field(b, c, b.quadrature.points()), atol=1e-12)

    def test_outside(self):
        b = build_basis(Box.cube(0.0, 1.0, 1), 3)
        with pytest.raises(OutOfDomain):
            evaluate_field(b, np.ones(3), [1.5])


def test_dump_forms(tmp_path, definite_forms):
    paths = dump_forms(definite_forms, tmp_path)
    assert {p.name for p in paths} == {f"forms_{n}.csv" for n in ("A", "Gm", "D", "K", "G", "P_plus", "P_minus")}
    with open(tmp_path / "forms_A.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["row", "col", "value"]
    A = np.zeros_like(definite_forms.A)
    for r, c, v in rows[1:]:
        A[int(r), int(c)] = float(v)
    np.testing.assert_array_equal(A, definite_forms.A)
    # Gm is identically zero in the definite case
    with open(tmp_path / "forms_Gm.csv") as fh:
        assert len(list(csv.reader(fh))) == 1
