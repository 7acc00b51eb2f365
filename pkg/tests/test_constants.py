import math

import numpy as np
import pytest

from steepwell.constants import (
    GN_CONSTANT,
    beta0,
    constants_table,
    d_star,
    dirichlet_mu,
    embedding_constants,
    k0_star,
    lambda_threshold,
    limit_spectrum,
    sobolev_constant,
    spectral_setup,
    thresholds,
)
from steepwell.errors import DimensionTooLow, UndefinedForm
from steepwell.model_config import Box, box_problem

PI2 = math.pi**2
UNIT = Box.cube(0.0, 1.0, 1)
CUBE3 = Box.cube(0.0, 1.0, 3)


class TestDirichletMu:
    def test_interval(self):
        s = dirichlet_mu(UNIT, 3)
        np.testing.assert_allclose(s.mu, [PI2, 4 * PI2, 9 * PI2], rtol=1e-15)
        assert list(s.multiplicities) == [1, 1, 1]

    def test_square(self):
        s = dirichlet_mu(Box.cube(0.0, 1.0, 2), 4)
        np.testing.assert_allclose(s.mu, [2 * PI2, 5 * PI2, 5 * PI2, 8 * PI2], rtol=1e-15)
        assert s.mu_bar[1] == pytest.approx(5 * PI2)
        assert s.multiplicities[1] == 2

    def test_cube_first(self):
        s = dirichlet_mu(CUBE3, 1)
        assert s.mu_bar[0] == pytest.approx(29.608813203268074, rel=1e-14)

    def test_truncated_cluster_reports_full_dimension(self):
        # count=2 cuts the double level 5π² in half
        s = dirichlet_mu(Box.cube(0.0, 1.0, 2), 2)
        assert s.multiplicities[1] == 2

    def test_rectangle_against_brute_force(self):
        box = Box((0.0, 0.0), (1.0, 2.5))
        s = dirichlet_mu(box, 20)
        brute = sorted(PI2 * (i**2 + (j / 2.5) ** 2) for i in range(1, 30) for j in range(1, 30))
        np.testing.assert_allclose(s.mu, brute[:20], rtol=1e-14)

    def test_count_validated(self):
        with pytest.raises(ValueError):
            dirichlet_mu(UNIT, 0)


class TestBeta0:
    @pytest.mark.parametrize(
        "box, a0, b0, j, expected",
        [
            (UNIT, -1.0, 0.0, 1, PI2),
            (UNIT, 0.0, -1.0, 1, PI2**2),
            (CUBE3, -40.0, 0.0, 2, 6 * PI2 / 40),
        ],
    )
    def test_examples(self, box, a0, b0, j, expected):
        assert beta0(j, a0, b0, dirichlet_mu(box, 8)) == pytest.approx(expected, rel=1e-13)

    def test_undefined_when_definite(self):
        with pytest.raises(UndefinedForm):
            beta0(1, 1.0, 1.0, dirichlet_mu(UNIT, 2))

    def test_increasing_beyond_coefficients(self):
        a0, b0 = -7.0, -3.0
        s = dirichlet_mu(Box((0.0, 0.0), (1.0, 1.7)), 60)
        b = [beta0(j, a0, b0, s) for j in range(1, len(s.mu_bar) + 1)]
        for j in range(len(b) - 1):
            if s.mu_bar[j] >= abs(a0) + abs(b0) + 1:
                assert b[j + 1] > b[j]


class TestK0Star:
    @pytest.mark.parametrize(
        "box, a0, k_expected",
        [(UNIT, -1.0, 1), (UNIT, -15.0, 2), (CUBE3, -40.0, 2)],
    )
    def test_examples(self, box, a0, k_expected):
        s = spectral_setup(box, a0, 0.0)
        k, adm = k0_star(a0, 0.0, s)
        assert (k, adm) == (k_expected, True)
        b = s.beta0
        assert b[k - 1] > 1 and (k == 1 or b[k - 2] <= 1)

    def test_values_quoted(self):
        s = spectral_setup(UNIT, -15.0, 0.0)
        assert s.beta0[0] == pytest.approx(0.658, abs=5e-4)
        assert s.beta0[1] == pytest.approx(2.632, abs=5e-4)
        s3 = spectral_setup(CUBE3, -40.0, 0.0)
        assert s3.beta0[0] == pytest.approx(0.740, abs=5e-4)

    def test_inadmissible_when_level_hits_one(self):
        # β₁⁰ = π²/|a0| = 1 exactly at a0 = -π²; then k0* = 2 but not admissible
        s = spectral_setup(UNIT, -PI2, 0.0)
        k, adm = k0_star(-PI2, 0.0, s)
        assert k == 2 and not adm

    def test_spectral_setup_grows(self):
        s = spectral_setup(UNIT, -2000.0, 0.0, count=2)
        assert s.k0_star is not None and s.beta0[s.k0_star - 1] > 1


class TestEmbedding:
    def test_sobolev_n3(self):
        assert sobolev_constant(3) == pytest.approx(5.4779, rel=1e-4)
        # independent form S = N(N-2)/4 · |S^N|^{2/N}
        area = 2 * math.pi**2  # |S³|
        assert sobolev_constant(3) == pytest.approx(3 / 4 * area ** (2 / 3), rel=1e-13)

    def test_low_dimension(self):
        with pytest.raises(DimensionTooLow):
            sobolev_constant(2)
        with pytest.raises(DimensionTooLow):
            embedding_constants(box_problem(N=2, a0=-1.0, modes_per_dim=4))

    def test_indefinite_branch(self):
        ec = embedding_constants(box_problem(N=3, a0=-40.0, lam=100.0, modes_per_dim=4))
        assert ec.A_infty == pytest.approx(0.18255, rel=1e-4)
        assert ec.C_lambda == pytest.approx(0.15329, rel=1e-4)
        assert ec.d0 == pytest.approx(0.13329, rel=1e-4)
        assert ec.B0 == GN_CONSTANT == 1.0
        assert ec.branch == "a0<=0"

    def test_definite_branch(self):
        p = box_problem(N=3, a0=2.0, b0=0.5, lam=100.0, modes_per_dim=4)
        ec = embedding_constants(p)
        assert ec.C_lambda == pytest.approx(ec.A_infty / 2 + 1 / (100.0 + 0.5), rel=1e-15)
        assert ec.branch == "a0>0"

    def test_c_lambda_decreases_to_d0(self):
        p = box_problem(N=3, a0=-40.0, modes_per_dim=4)
        lams = 100.0 * 2.0 ** np.arange(20)
        C = np.array([embedding_constants(p.with_lambda(l)).C_lambda for l in lams])
        d0 = embedding_constants(p).d0
        assert np.all(np.diff(C) < 0) and np.all(C > d0)
        assert (C[-1] - d0) / d0 < 1e-4


class TestThresholds:
    def test_lambda_threshold_examples(self):
        s = spectral_setup(UNIT, -1.0, 0.0)
        assert lambda_threshold(1, box_problem(a0=-1.0), s) == pytest.approx(PI2**2, rel=1e-13)
        s = spectral_setup(UNIT, -15.0, 0.0)
        assert lambda_threshold(2, box_problem(a0=-15.0), s) == pytest.approx(16 * PI2**2, rel=1e-13)
        s = spectral_setup(UNIT, 0.0, -1.0)
        for k in (1, 2, 3):
            assert lambda_threshold(k, box_problem(a0=0.0, b0=-1.0, lam=5.0), s) == pytest.approx(1.0)

    def test_lambda_threshold_nondecreasing(self):
        s = spectral_setup(CUBE3, -40.0, -3.0)
        t = thresholds(box_problem(N=3, a0=-40.0, b0=-3.0, lam=10.0, modes_per_dim=4), s)
        assert np.all(np.diff(t.Lambda_k) >= 0)
        assert t.linking_admissible

    @pytest.mark.parametrize(
        "a0, b0, expected",
        [(-15.0, 0.0, 4 * PI2), (-1.0, 0.0, PI2), (1.0, -1.0, math.sqrt(PI2**2 + PI2))],
    )
    def test_d_star(self, a0, b0, expected):
        assert d_star(a0, b0, spectral_setup(UNIT, a0, b0)) == pytest.approx(expected, rel=1e-13)

    def test_d_star_optimal_on_random_vectors(self, rng):
        # ‖u‖_{Ω,0}² = Σ c_j² (μ_j² + a0⁺μ_j + b0⁺) in the orthonormal eigenbasis
        box = Box.cube(0.0, 1.0, 2)
        a0, b0 = -60.0, 0.0
        s = spectral_setup(box, a0, b0)
        k = s.k0_star
        dim = int(np.sum(s.multiplicities[:k]))
        w = s.mu[:dim] ** 2 + max(a0, 0) * s.mu[:dim] + max(b0, 0)
        ds = d_star(a0, b0, s)
        c = rng.standard_normal((1000, dim))
        ratio = np.sqrt((c**2 @ w) / np.sum(c**2, axis=1))
        assert np.all(ratio <= ds * (1 + 1e-12))
        top = np.eye(dim)[np.argmax(w)]
        assert math.sqrt(top**2 @ w) == pytest.approx(ds, rel=1e-12)


class TestLimitSpectrum:
    def test_indefinite_values(self):
        v = limit_spectrum(-15.0, 0.0, dirichlet_mu(UNIT, 4))
        assert v[0] == pytest.approx(PI2**2 - 15 * PI2, rel=1e-13)
        assert v[1] == pytest.approx(16 * PI2**2 - 60 * PI2, rel=1e-13)
        assert v[0] == pytest.approx(-50.64, abs=1e-2)

    def test_pure_bilaplacian(self):
        s = dirichlet_mu(UNIT, 5)
        np.testing.assert_allclose(limit_spectrum(0.0, 0.0, s), s.mu**2)

    def test_perfect_square(self):
        v = limit_spectrum(-2 * PI2, PI2**2, dirichlet_mu(UNIT, 3))
        assert abs(v[0]) < 1e-10


class TestTable:
    def test_rows(self):
        rows = constants_table(box_problem(N=3, a0=-40.0, lam=100.0, modes_per_dim=4))
        names = {r[0]: r for r in rows}
        assert names["k0_star"][1] == 2.0
        assert names["S"][1] == pytest.approx(5.4779, rel=1e-4)
        assert names["C_lambda"][2] == "a0<=0"

    def test_definite_rows(self):
        rows = constants_table(box_problem(N=1, a0=1.0, b0=1.0))
        names = {r[0] for r in rows}
        assert "beta0_1" not in names and "k0_star" in names
