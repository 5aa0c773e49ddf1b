import numpy as np
import pytest

from cocyclelab import random_products as rp
from cocyclelab import rates
from cocyclelab.errors import ValidationError

# frozen after the first run under the fixed stream contract
PIN_SAMPLE_N100_S7 = 65.06448905447543  # rotated_stretch_pair(0.3, 2.0, seed=11)
PIN_FUR_EST = (0.64724090757090158, 4.0841717196313803e-05)  # n=1000, 400 trials
PIN_FUR_TV = 0.028  # projective histograms at n=200 vs 400, 2000 trials, 64 bins
PIN_SOR_LD = (0.28749999999999998, 0.00050000000000000001)  # n=50 vs 400


@pytest.fixture(scope="module")
def fur():
    return rp.rotated_stretch_pair(0.3, 2.0, seed=11)


@pytest.fixture(scope="module")
def sor():
    return rp.stretch_or_rotate(4.0, 1.0, seed=11)


class TestDistributionValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            rp.MatrixDistribution(
                dim=2, seed=0, support=((np.eye(2), 0.5), (np.eye(2), 0.6))
            )

    def test_singular_support_rejected(self):
        with pytest.raises(Exception):
            rp.MatrixDistribution(dim=2, seed=0, support=((np.diag([1.0, 0.0]), 1.0),))

    def test_exactly_one_source(self):
        with pytest.raises(ValidationError):
            rp.MatrixDistribution(dim=2, seed=0)

    def test_unknown_sampler(self):
        with pytest.raises(ValidationError):
            rp.MatrixDistribution(dim=2, seed=0, sampler="gaussian")


class TestStreamContract:
    def test_identical_inputs_identical_outputs(self, fur):
        a = rp.sample_product(fur, 100, 7)
        b = rp.sample_product(fur, 100, 7)
        assert a == b

    def test_streams_are_distinct(self, fur):
        vals = {rp.sample_product(fur, 50, s) for s in range(8)}
        assert len(vals) == 8

    def test_sequences_are_prefixes(self, fur):
        short = fur.sample_sequence(3, 5)
        long = fur.sample_sequence(3, 12)
        assert np.array_equal(short, long[:5])

    def test_batch_matches_singles(self, fur):
        batch = rp._batched_lognorms(fur, 40, [3, 7, 1])
        for col, sid in enumerate([3, 7, 1]):
            assert batch[0, col] == rp.sample_product(fur, 40, sid)

    def test_pinned_sample(self, fur):
        assert abs(rp.sample_product(fur, 100, 7) - PIN_SAMPLE_N100_S7) <= 1e-9


class TestTopExponent:
    def test_single_matrix_exact(self):
        dist = rp.single_matrix(np.diag([2.0, 0.5]), seed=1)
        assert abs(rp.sample_product(dist, 100, 0) - 100 * np.log(2.0)) <= 1e-10
        est, stderr = rp.top_exponent_mc(dist, 64, 4)
        assert abs(est - np.log(2.0)) <= 1e-12
        assert stderr == 0.0

    def test_rotations_give_zero(self):
        est, _ = rp.top_exponent_mc(rp.two_rotations(0.7, 1.3, seed=2), 1000, 8)
        assert abs(est) <= 1e-10
        est, _ = rp.top_exponent_mc(rp.uniform_rotation(seed=5), 500, 8)
        assert abs(est) <= 1e-10

    def test_pinned_positive_exponent(self, fur):
        est, stderr = rp.top_exponent_mc(fur, 1000, 400)
        assert abs(est - PIN_FUR_EST[0]) <= 1e-9
        assert abs(stderr - PIN_FUR_EST[1]) <= 1e-12
        assert est > 5 * stderr

    def test_subadditive_in_expectation(self, fur):
        n = m = 50
        est_n, se_n = rp.top_exponent_mc(fur, n, 300)
        est_2n, se_2n = rp.top_exponent_mc(fur, n + m, 300)
        combined = 3.0 * (n * se_n + m * se_n + (n + m) * se_2n)
        assert (n + m) * est_2n <= n * est_n + m * est_n + combined

    def test_trials_guard(self, fur):
        with pytest.raises(ValidationError):
            rp.top_exponent_mc(fur, 10, 1)


class TestExteriorPushforward:
    def test_top_order_tracks_determinant(self, fur):
        wedge = fur.exterior(2)
        assert wedge.dim == 1
        # SL(2) support: every product has determinant one
        assert abs(rp.sample_product(wedge, 200, 3)) <= 1e-12

    def test_first_order_unchanged(self, fur):
        same = fur.exterior(1)
        assert rp.sample_product(same, 50, 2) == rp.sample_product(fur, 50, 2)

    def test_sampler_has_no_pushforward(self):
        with pytest.raises(ValidationError):
            rp.uniform_rotation().exterior(2)


class TestProjectiveMeasure:
    def test_requires_dim_two(self):
        dist = rp.single_matrix(np.eye(3), seed=0)
        with pytest.raises(ValidationError):
            rp.projective_measure(dist, 10, 10, 8)

    def test_single_stretch_concentrates_on_axis(self):
        dist = rp.single_matrix(np.array([[2.0, 1.0], [0.0, 0.5]]), seed=0)
        hist = rp.projective_measure(dist, 60, 100, 32)
        # the attracting direction of this map lies in the first bin's angle
        assert hist[0] + hist[-1] >= 0.99

    def test_rotation_only_spreads(self):
        hist = rp.projective_measure(rp.uniform_rotation(seed=4), 1000, 1000, 16)
        assert np.max(hist) <= 0.5

    def test_two_scale_self_consistency_pinned(self, fur):
        h1 = rp.projective_measure(fur, 200, 2000, 64)
        h2 = rp.projective_measure(fur, 400, 2000, 64)
        tv = 0.5 * float(np.sum(np.abs(h1 - h2)))
        assert abs(tv - PIN_FUR_TV) <= 1e-9
        assert tv < 0.05


class TestLargeDeviations:
    def test_deterministic_distribution_zero(self):
        dist = rp.single_matrix(np.diag([2.0, 0.5]), seed=3)
        assert rp.ld_probability(dist, 50, 0.01, 100) == 0.0

    def test_huge_delta_zero(self, sor):
        assert rp.ld_probability(sor, 50, 50.0, 200) == 0.0

    def test_pinned_decline(self, sor):
        lam_ref, _ = rp.top_exponent_mc(sor, 400, 2000)
        p50 = rp.ld_probability(sor, 50, 0.2 * lam_ref, 2000, lam_ref)
        p400 = rp.ld_probability(sor, 400, 0.2 * lam_ref, 2000, lam_ref)
        assert abs(p50 - PIN_SOR_LD[0]) <= 1e-12
        assert abs(p400 - PIN_SOR_LD[1]) <= 1e-12
        assert p400 < p50


class TestConvergenceDichotomy:
    def test_single_diagonal_degenerate_exponential(self):
        dist = rp.single_matrix(np.diag([2.0, 0.5]), seed=5)
        verdict, series = rp.convergence_dichotomy_random(
            dist, tuple(2**k for k in range(3, 9)), trials=16
        )
        assert verdict.classification == "exponential"
        assert np.allclose(series.values, np.log(2.0), atol=1e-12)

    def test_planted_noisy_exponential_series(self):
        rng = np.random.default_rng(0)
        scales = tuple(2**k for k in range(3, 10))
        vals = tuple(0.5 + np.exp(-0.4 * n) + 1e-6 * rng.standard_normal()
                     for n in scales)
        series = rates.RateSeries(
            family_kind="planted-noisy", E=0.0, j=1, scales=scales, values=vals,
            proxy_limit=rates.richardson_proxy(vals), proxy_scale=scales[-1],
        )
        v = rates.dichotomy(series, c1=0.05, l0=8, noise_floor=3e-5)
        assert v.classification == "exponential"

    def test_contracting_example_classified_exponential(self, sor):
        verdict, series = rp.convergence_dichotomy_random(
            sor, tuple(2**k for k in range(3, 10)), trials=2000
        )
        assert verdict.classification == "exponential"
        assert verdict.noise_floor > 0.0


class TestContractionProbe:
    def test_contracting_example_evidence(self, fur):
        probe = rp.contraction_probe(fur, 60, 50)
        assert probe["median_ratio"] <= 1e-10
        assert probe["max_ratio"] <= 1e-8

    def test_rotations_do_not_contract(self):
        probe = rp.contraction_probe(rp.two_rotations(0.7, 1.3, seed=1), 60, 50)
        assert probe["median_ratio"] >= 0.999


class TestRateReport:
    def test_report_bundle(self, sor):
        report = rp.rate_report(
            sor, (8, 16, 32, 64), trials=50, deltas=(0.2,), ld_scales=(16, 64)
        )
        assert len(report.rows) == 4
        assert len(report.ld_rows) == 2
        assert report.verdict is not None
