import numpy as np
import pytest

from cocyclelab import ldt
from cocyclelab.cocycle import ConstantFamily, DiagonalExpFamily, torus_grid
from cocyclelab.errors import ValidationError
from cocyclelab.util import pairwise_mean

# frozen after the first run (grid fractions are exact multiples of 1/M)
SCHRODINGER_AI_K1 = (0.0031934131719215664, 0.0035516532406876305)
SCHRODINGER_AI_K8 = (0.0056675102739365268, 0.028413225925501044)


@pytest.fixture(scope="module")
def const2(golden):
    return ConstantFamily(base=golden, dim=2, matrix=np.diag([2.0, 0.5]))


@pytest.fixture(scope="module")
def diag_exp(golden):
    return DiagonalExpFamily(
        base=golden, dim=2, x_amp=np.array([2.0, -2.0]), e_amp=np.zeros(2)
    )


class TestDeviationMeasure:
    def test_constant_family_is_zero(self, const2):
        for delta in (1e-6, 0.1, 3.0):
            assert ldt.deviation_measure(const2, 0.0, 16, 1, delta, 64) == 0.0

    def test_delta_beyond_total_oscillation(self, schrodinger3):
        centered = ldt.centered_profile(schrodinger3, 0.0, 16, 1, 128)
        big = 2.0 * float(np.max(np.abs(centered))) + 0.01
        assert ldt.deviation_measure(schrodinger3, 0.0, 16, 1, big, 128) == 0.0

    def test_monotone_in_delta(self, schrodinger3):
        m = [
            ldt.deviation_measure(schrodinger3, 0.0, 16, 1, d, 256)
            for d in (0.02, 0.05, 0.1, 0.2)
        ]
        assert all(b <= a for a, b in zip(m, m[1:]))

    def test_top_order_on_unit_determinant_is_zero(self, schrodinger3):
        # p = d profile is (1/n) log|det| = 0 identically
        for delta in (1e-9, 0.1):
            assert ldt.deviation_measure(schrodinger3, 0.0, 32, 2, delta, 64) == 0.0

    def test_self_centering(self, schrodinger3):
        centered = ldt.centered_profile(schrodinger3, 0.0, 32, 1, 256)
        assert abs(pairwise_mean(centered)) <= 1e-12

    def test_validation(self, const2):
        with pytest.raises(ValidationError):
            ldt.deviation_measure(const2, 0.0, 16, 1, 0.0, 64)
        with pytest.raises(ValidationError):
            ldt.deviation_measure(const2, 0.0, 16, 5, 0.1, 64)


class TestDeviationProfile:
    def test_rows_match_pointwise_op(self, schrodinger3):
        prof = ldt.deviation_profile(schrodinger3, 0.0, 1, (16, 32), (0.05, 0.1), 128)
        for n, delta, measure in prof.rows:
            direct = ldt.deviation_measure(schrodinger3, 0.0, n, 1, delta, 128)
            assert measure == direct

    def test_measure_bounds_enforced(self):
        prof = ldt.DeviationProfile(family_kind="x", E=0.0, p=1, grid_size=4)
        with pytest.raises(ValidationError):
            prof.add(4, 0.1, 1.5)


class TestFitDecay:
    def test_recovers_planted_exponential(self):
        prof = ldt.DeviationProfile(family_kind="planted", E=0.0, p=1, grid_size=0)
        for n in (16, 32, 64, 128, 256, 512):
            prof.add(n, 0.1, float(np.exp(-0.05 * n)))
        fit = ldt.fit_decay(prof)
        assert not fit.degenerate
        assert abs(fit.c - 0.05) <= 1e-6
        assert abs(fit.C) <= 1e-6

    def test_recovers_planted_stretched(self):
        prof = ldt.DeviationProfile(family_kind="planted", E=0.0, p=1, grid_size=0)
        for n in (16, 32, 64, 128, 256):
            prof.add(n, 0.1, float(np.exp(-(n**0.6))))
        fit = ldt.fit_decay(prof, model="stretched")
        assert abs(fit.tau - 0.6) <= 1e-9

    def test_all_zero_rows_degenerate(self):
        prof = ldt.DeviationProfile(family_kind="x", E=0.0, p=1, grid_size=0)
        for n in (16, 32, 64, 128):
            prof.add(n, 0.1, 0.0)
        assert ldt.fit_decay(prof).degenerate

    def test_too_few_rows_degenerate(self):
        prof = ldt.DeviationProfile(family_kind="x", E=0.0, p=1, grid_size=0)
        for n in (16, 32, 64):
            prof.add(n, 0.1, 0.5)
        assert ldt.fit_decay(prof).degenerate

    def test_unknown_model(self):
        prof = ldt.DeviationProfile(family_kind="x", E=0.0, p=1, grid_size=0)
        with pytest.raises(ValidationError):
            ldt.fit_decay(prof, model="cubic")


class TestAlmostInvariance:
    def test_constant_family_zero_gap(self, const2):
        rep = ldt.almost_invariance(const2, 0.0, 64, 1, 32)
        assert rep.sup_gap == 0.0
        assert rep.ok

    def test_iteration_bound(self, schrodinger3):
        rep1 = ldt.almost_invariance(schrodinger3, 0.0, 256, 1, 128)
        rep2 = ldt.almost_invariance(schrodinger3, 0.0, 256, 2, 128)
        assert rep2.sup_gap <= 2.0 * rep1.bound + 1e-10
        assert rep1.ok and rep2.ok

    def test_pinned_values(self, schrodinger3):
        rep = ldt.almost_invariance(schrodinger3, 0.0, 1024, 1, 1024)
        assert abs(rep.sup_gap - SCHRODINGER_AI_K1[0]) <= 1e-10
        assert abs(rep.bound - SCHRODINGER_AI_K1[1]) <= 1e-10
        assert rep.ok

    def test_validation(self, const2):
        with pytest.raises(ValidationError):
            ldt.almost_invariance(const2, 0.0, 64, 0, 32)


class TestMonotonicityAudit:
    def test_constant_equalities(self, const2):
        rep = ldt.monotonicity_audit(const2, 0.0, (16, 32, 64), 16)
        assert rep.ok
        assert np.allclose(rep.values, np.log(2.0), atol=1e-13)

    def test_diagonal_exp_strictly_monotone(self, diag_exp):
        rep = ldt.monotonicity_audit(
            diag_exp, 0.0, tuple(2**k for k in range(4, 10)), 256, tol=1e-10
        )
        assert rep.ok
        assert rep.violations == ()

    def test_non_dyadic_rejected(self, const2):
        with pytest.raises(ValidationError):
            ldt.monotonicity_audit(const2, 0.0, (16, 48), 16)
