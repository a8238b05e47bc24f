import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import corr2phase as c2p
from corr2phase.errors import (
    InvalidDesign,
    InvalidParameter,
    SingularDenominator,
    ZeroCorrelation,
)

# Frozen 50-digit oracle values for the published 80-unit parameter set
# (d_310 read from the listed d_300, n=10, n1=25).
PUB_LADDER = {
    "var_r": 0.1823010320704,
    "min_var_hd": 0.18195006609572645,
    "min_var_td": 0.18172007187569106,
    "gap": 0.0002299942200353879,
    "pre_hd": 100.19289136970629,
    "pre_td": 100.31970061904133,
}
PUB_SLOPES = (
    0.15038042469352014,
    0.25682714535901924,
    0.12088139579684763,
    0.1992416812609457,
)
PUB_WEIGHTS = (
    -0.04904819452357745,
    -0.025855340849145172,
    -0.08088777469884473,
    -0.020075167331426565,
)
PUB_N, PUB_N1 = 10, 25


class TestNormalTheoryIdentity:
    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.9136])
    @pytest.mark.parametrize("n", [10, 100])
    def test_classical_variance(self, rho, n):
        m = c2p.normal_theory_moments(rho)
        expect = (1.0 - rho * rho) ** 2 / n
        assert c2p.var_r(m, n) == pytest.approx(expect, rel=1e-10)

    def test_gaussian_delta_values(self):
        m = c2p.normal_theory_moments(0.5)
        assert m.d(3, 1, 0) == pytest.approx(1.5, rel=1e-15)
        assert m.d(1, 3, 0) == pytest.approx(1.5, rel=1e-15)
        assert m.d(2, 2, 0) == pytest.approx(1.5, rel=1e-15)
        assert m.d(0, 3, 0) == 0.0
        assert m.d(0, 4, 0) == pytest.approx(3.0, rel=1e-15)

    def test_invalid_correlation_triple(self):
        with pytest.raises(InvalidParameter):
            c2p.normal_theory_moments(0.95, 0.9, 0.0)


class TestVarianceLadder:
    def test_frozen_ladder(self, published_moments):
        m = published_moments
        assert c2p.var_r(m, PUB_N) == pytest.approx(
            PUB_LADDER["var_r"], rel=1e-13
        )
        assert c2p.min_var_hd(m, PUB_N, PUB_N1) == pytest.approx(
            PUB_LADDER["min_var_hd"], rel=1e-13
        )
        assert c2p.min_var_td(m, PUB_N, PUB_N1) == pytest.approx(
            PUB_LADDER["min_var_td"], rel=1e-13
        )
        assert c2p.variance_gap(m, PUB_N, PUB_N1) == pytest.approx(
            PUB_LADDER["gap"], rel=1e-12
        )

    def test_frozen_optimum_constants(self, published_moments):
        opt = c2p.optimum_constants(published_moments)
        got_slopes = (
            opt.slope_mean_x,
            opt.slope_var_x,
            opt.slope_mean_z,
            opt.slope_var_z,
        )
        for g, e in zip(got_slopes, PUB_SLOPES):
            assert g == pytest.approx(e, rel=1e-13)
        for g, e in zip(opt.weights(), PUB_WEIGHTS):
            assert g == pytest.approx(e, rel=1e-13)

    def test_variance_at_optimum_attains_minimum(self, published_moments):
        m = published_moments
        w = c2p.optimum_constants(m).weights()
        at_opt = c2p.var_t_class(m, PUB_N, PUB_N1, w)
        assert at_opt == pytest.approx(
            c2p.min_var_td(m, PUB_N, PUB_N1), rel=1e-12
        )

    @pytest.mark.parametrize("coord", range(4))
    def test_perturbed_weights_lie_above_minimum(self, coord, published_moments):
        m = published_moments
        bumped = list(c2p.optimum_constants(m).weights())
        bumped[coord] += 0.01
        assert c2p.var_t_class(m, PUB_N, PUB_N1, bumped) > c2p.min_var_td(
            m, PUB_N, PUB_N1
        )

    def test_zero_weights_collapse_to_var_r(self, published_moments):
        m = published_moments
        assert c2p.var_t_class(m, PUB_N, PUB_N1, (0, 0, 0, 0)) == c2p.var_r(
            m, PUB_N
        )

    def test_h_class_is_t_class_without_z(self, published_moments):
        m = published_moments
        assert c2p.var_h_class(m, PUB_N, PUB_N1, (0.3, -0.2)) == c2p.var_t_class(
            m, PUB_N, PUB_N1, (0.3, -0.2, 0.0, 0.0)
        )

    def test_difference_class_is_t_class_rescaled(self, published_moments):
        m = published_moments
        rho = m.rho_yx
        cs = (0.3, -0.2, 0.1, 0.05)
        assert c2p.var_difference_class(m, PUB_N, PUB_N1, cs) == pytest.approx(
            c2p.var_t_class(m, PUB_N, PUB_N1, tuple(c / rho for c in cs)),
            rel=1e-12,
        )

    def test_var_r_scales_inversely_with_n(self, published_moments):
        m = published_moments
        assert c2p.var_r(m, 10) == pytest.approx(2 * c2p.var_r(m, 20), rel=1e-15)

    def test_gap_scales_inversely_with_n1(self, published_moments):
        m = published_moments
        assert c2p.variance_gap(m, PUB_N, 25) == pytest.approx(
            2 * c2p.variance_gap(m, PUB_N, 50), rel=1e-12
        )

    def test_equal_phases_remove_first_phase_benefit(self, published_moments):
        m = published_moments
        assert c2p.min_var_hd(m, 25, 25) == c2p.var_r(m, 25)

    def test_vanishing_z_slopes_close_the_gap(self, published_params):
        params = dict(published_params)
        rho = params["rho_yx"]
        params["d_111"] = rho * (params["d_201"] + params["d_021"]) / 2
        params["d_112"] = rho * (params["d_202"] + params["d_022"]) / 2
        m = c2p.moments_from_params(params, delta310_from_delta300=True)
        assert abs(c2p.variance_gap(m, PUB_N, PUB_N1)) < 1e-30
        report = c2p.efficiency_report(m, PUB_N, PUB_N1)
        assert report.pre_td == report.pre_hd


class TestOrderingProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_population_ordering(self, seed):
        frame = c2p.random_population(200, seed=seed)
        m = c2p.population_moments(frame)
        n, n1 = 20, 60
        vr = c2p.var_r(m, n)
        hd = c2p.min_var_hd(m, n, n1)
        td = c2p.min_var_td(m, n, n1)
        assert td <= hd <= vr
        assert c2p.variance_gap(m, n, n1) >= 0.0

    @given(rho=st.floats(0.05, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_normal_moments_ordering(self, rho):
        m = c2p.normal_theory_moments(rho, rho_xz=0.3 * rho, rho_yz=0.5 * rho)
        vr = c2p.var_r(m, 20)
        hd = c2p.min_var_hd(m, 20, 80)
        td = c2p.min_var_td(m, 20, 80)
        assert td <= hd <= vr
        assert c2p.variance_gap(m, 20, 80) >= 0.0


class TestGuards:
    def test_sizes_must_nest(self, published_moments):
        with pytest.raises(InvalidDesign):
            c2p.min_var_td(published_moments, 1, 25)
        with pytest.raises(InvalidDesign):
            c2p.min_var_td(published_moments, 26, 25)

    def test_zero_correlation_has_no_optimum(self):
        m = c2p.normal_theory_moments(0.0)
        with pytest.raises(ZeroCorrelation):
            c2p.optimum_constants(m)
        with pytest.raises(ZeroCorrelation):
            c2p.min_var_td(m, 10, 25)


class TestEfficiency:
    def test_pre_baseline_is_hundred(self):
        assert c2p.pre(0.5, 0.5) == 100.0

    def test_pre_ratio(self):
        assert c2p.pre(0.2, 0.1) == pytest.approx(200.0, rel=1e-15)

    def test_pre_rejects_zero_comparison(self):
        with pytest.raises(SingularDenominator):
            c2p.pre(1.0, 0.0)

    def test_report_frozen_values(self, published_moments):
        report = c2p.efficiency_report(published_moments, PUB_N, PUB_N1)
        assert report.n == PUB_N and report.n1 == PUB_N1
        assert report.pre_hd == pytest.approx(PUB_LADDER["pre_hd"], rel=1e-12)
        assert report.pre_td == pytest.approx(PUB_LADDER["pre_td"], rel=1e-12)
        assert report.published is None

    def test_report_efficiency_ordering(self, published_moments):
        report = c2p.efficiency_report(published_moments, PUB_N, PUB_N1)
        assert report.pre_td >= report.pre_hd >= 100.0

    def test_report_discrepancy_notes(self, published_moments, published_params):
        report = c2p.efficiency_report(
            published_moments, PUB_N, PUB_N1, published=published_params["published_pre"]
        )
        assert report.published == published_params["published_pre"]
        notes = "\n".join(report.interpretation_notes)
        assert "not reproducible" in notes
        # The matching baseline entry is confirmed, not flagged.
        assert "PRE[r]=100 matches" in notes

    def test_report_rejects_unknown_published_key(self, published_moments):
        with pytest.raises(InvalidParameter):
            c2p.efficiency_report(
                published_moments, PUB_N, PUB_N1, published={"bogus": 1.0}
            )
