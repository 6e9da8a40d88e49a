"""Tests for energy_functionals.py: 1D/2D trial energies, decoupling and Hardy quotients."""

import math

import numpy as np
import pytest
from scipy import stats

import energy_functionals as ef
from models import ResourceError, ValidationError
from tonks_girardeau import TGEigenstate


# ---------------------------------------------------------------------------
# 1D energies
# ---------------------------------------------------------------------------

class TestEnergy1D:
    @pytest.mark.parametrize("n,a", [(1, 0.5), (2, 0.3), (3, 1.2)])
    def test_gaussian_product(self, n, a):
        trial = ef.GaussianProductTrial(n, a)
        assert ef.energy1d(trial, order=12) == pytest.approx(trial.energy, rel=1e-12)
        assert trial.energy == pytest.approx(n * (a + 1.0 / (4.0 * a)))

    @pytest.mark.parametrize("a", [0.5, 0.8, 0.3])
    def test_pair_gaussian(self, a):
        trial = ef.PairGaussianTrial(a)
        assert ef.energy1d(trial, order=12) == pytest.approx(4.0 * a + 1.0 / a, rel=1e-10)

    def test_pair_gaussian_is_tg_ground_at_half(self):
        assert ef.PairGaussianTrial(0.5).energy == 4.0
        assert ef.energy1d(TGEigenstate.ground(2), order=12) == pytest.approx(4.0, rel=1e-12)

    def test_tg_excited_state(self):
        state = TGEigenstate.from_orbitals((0, 2, 3))
        assert ef.energy1d(state, order=10) == pytest.approx(13.0, rel=1e-10)

    @pytest.mark.parametrize("n,order", [(2, 11), (2, 12), (3, 11), (3, 12)])
    def test_grid_orders_avoid_coincidences(self, n, order):
        orders = ef._collision_free_orders(n, order)
        assert len(set(orders)) == n and min(orders) == order
        assert sum(o % 2 for o in orders) <= 1
        points, _ = ef._product_grid(orders, [1.0] * n)
        for i in range(n):
            for j in range(i + 1, n):
                assert np.min(np.abs(points[:, i] - points[:, j])) > 1e-10

    def test_too_many_particles(self):
        with pytest.raises(ResourceError):
            ef.energy1d(ef.GaussianProductTrial(4))

    def test_invalid_trials(self):
        with pytest.raises(ValidationError):
            ef.GaussianProductTrial(0)
        with pytest.raises(ValidationError):
            ef.PairGaussianTrial(0.0)


# ---------------------------------------------------------------------------
# 2D ansatz
# ---------------------------------------------------------------------------

class TestEnergy2D:
    @pytest.mark.parametrize("alpha,eps", [(0.5, 1.0), (1.0, 0.5), (1.5, 0.1)])
    def test_gauge_phase_reduces_to_1d_plus_transverse(self, alpha, eps):
        t = ef.TrialState2D(ef.PairGaussianTrial(0.5), alpha, eps)
        expected = 4.0 + 2.0 / eps
        assert ef.energy2d_trial(t, order=12) == pytest.approx(expected, rel=1e-9)

    def test_breakdown_consistency(self):
        t = ef.TrialState2D(TGEigenstate.ground(2), 0.7, 0.2)
        pieces = ef.energy2d_breakdown(t, order=12)
        assert pieces["norm"] == pytest.approx(1.0, rel=1e-12)
        assert pieces["gauge_residual"] == pytest.approx(0.0, abs=1e-9)
        assert pieces["total"] == pytest.approx(pieces["expanded_total"], rel=1e-9)
        assert pieces["kinetic_y"] == pytest.approx(1.0 / 0.2, rel=1e-9)
        assert pieces["diamagnetic_term"] > 0.0
        assert pieces["current_term"] < 0.0

    def test_alpha_zero_has_no_gauge_terms(self):
        pieces = ef.energy2d_breakdown(ef.TrialState2D(ef.PairGaussianTrial(0.5), 0.0, 0.5), order=12)
        assert pieces["current_term"] == 0.0
        assert pieces["diamagnetic_term"] == 0.0
        assert pieces["expanded_total"] == pytest.approx(8.0, rel=1e-10)

    def test_dropping_the_phase_costs_energy(self):
        t = ef.TrialState2D(ef.PairGaussianTrial(0.5), 1.0, 0.5)
        with_phase = ef.energy2d_trial(t, order=12)
        without = ef.energy2d_trial(t, order=12, with_phase=False)
        assert without > with_phase + 0.1

    def test_rejects_non_vanishing_factor(self):
        with pytest.raises(ValidationError):
            ef.TrialState2D(ef.GaussianProductTrial(2), 0.5, 0.5)

    def test_rejects_three_particles(self):
        with pytest.raises(ResourceError):
            ef.TrialState2D(TGEigenstate.ground(3), 0.5, 0.5)

    @pytest.mark.parametrize("alpha,eps", [(2.0, 0.5), (-0.1, 0.5), (0.5, 0.0)])
    def test_rejects_bad_parameters(self, alpha, eps):
        with pytest.raises(ValidationError):
            ef.TrialState2D(ef.PairGaussianTrial(0.5), alpha, eps)


class TestDecoupling:
    @pytest.mark.parametrize("alpha,eps", [(0.3, 1.0), (1.0, 0.2), (1.5, 0.05)])
    def test_split_sums_to_energy(self, alpha, eps):
        t = ef.TrialState2D(ef.PairGaussianTrial(0.5), alpha, eps)
        split = ef.decoupling_split(t, order=12)
        energy = ef.energy2d_breakdown(t, order=12)["total"]
        assert split["sum"] == pytest.approx(energy, rel=1e-9)
        assert split["n_e_eps"] == pytest.approx(2.0 / eps, rel=1e-10)

    def test_excited_tg_state(self):
        t = ef.TrialState2D(TGEigenstate.from_orbitals((0, 3)), 0.5, 0.5)
        split = ef.decoupling_split(t, order=12)
        assert split["sum"] == pytest.approx(8.0 + 2.0 / 0.5, rel=1e-9)


# ---------------------------------------------------------------------------
# Hardy constants
# ---------------------------------------------------------------------------

class TestHardyConstants:
    @pytest.mark.parametrize("alpha,expected", [(1.0, 2.0), (0.5, 0.5), (1.5, 0.5), (0.2, 0.08)])
    def test_c_alpha(self, alpha, expected):
        assert ef.c_alpha(alpha) == pytest.approx(expected)

    @pytest.mark.parametrize("n,alpha,expected", [(2, 1.0, 2.0), (3, 1.0, 0.25), (3, 0.5, 1.0 / 7.0)])
    def test_many_anyon_constant(self, n, alpha, expected):
        assert ef.many_anyon_hardy_constant(n, alpha) == pytest.approx(expected)

    def test_many_anyon_constant_needs_two(self):
        with pytest.raises(ValidationError):
            ef.many_anyon_hardy_constant(1, 0.5)

    def test_channel_bound(self):
        assert ef.channel_bound(-2, 0.5) == (pytest.approx(2.25), pytest.approx(0.25))
        with pytest.raises(ValidationError):
            ef.channel_bound(1, 0.5)

    @pytest.mark.parametrize("b", [0.25, 1.0, 3.0])
    def test_channel_quotient_independent_of_width(self, b):
        assert ef.channel_quotient(0, 0.5, 2.0, b=b) == pytest.approx(0.5 + 4.0, rel=1e-12)

    def test_channel_quotient_dominates_bound(self):
        for m in (-2, 0, 2):
            for s in (0.5, 1.5, 3.0):
                q = ef.channel_quotient(m, 1.5, s)
                assert q >= 2.0 * ef.channel_bound(m, 1.5)[1]

    def test_channel_quotient_rejects_bad_exponent(self):
        with pytest.raises(ValidationError):
            ef.channel_quotient(0, 0.5, 0.0)

    def test_two_body_exact(self):
        assert ef.two_body_quotient_exact(0, 0.5, 2.0) == pytest.approx(8.5)
        assert ef.two_body_quotient_exact(2, 0.5, 1.5) == pytest.approx(12.5 + 6.0)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

class TestHardyMonteCarlo:
    @pytest.mark.parametrize("m,s", [(0, 2.0), (-2, 3.0), (2, 1.5)])
    def test_two_body_matches_closed_form(self, m, s):
        trial = ef.HardyTrial(2, 0.5, s=s, m=m)
        est = ef.hardy_quotient_mc(trial, samples=200_000, seed=7)
        exact = ef.two_body_quotient_exact(m, 0.5, s)
        assert not est.flagged
        assert abs(est.estimate - exact) <= 5.0 * est.stderr + 1e-3 * exact

    def test_three_particle_above_bound(self):
        trial = ef.HardyTrial(3, 1.0, s=2.0)
        est = ef.three_particle_quotient_mc(trial, samples=100_000, seed=3)
        assert est.estimate - 3.0 * est.stderr > 3.0

    def test_three_particle_needs_three(self):
        with pytest.raises(ValidationError):
            ef.three_particle_quotient_mc(ef.HardyTrial(2, 0.5), samples=1000, seed=1)

    def test_deterministic_for_seed_and_threads(self):
        trial = ef.HardyTrial(3, 0.5, s=2.0)
        a = ef.hardy_quotient_mc(trial, samples=20_000, seed=11, threads=1)
        b = ef.hardy_quotient_mc(trial, samples=20_000, seed=11, threads=3)
        assert a == b

    def test_antithetic_partner_mirrors_the_radius(self):
        z = np.random.default_rng(5).standard_normal((1000, 2, 2))
        partner = ef.antithetic_partner(z)
        r2 = np.sum(z * z, axis=(1, 2))
        r2_partner = np.sum(partner * partner, axis=(1, 2))
        np.testing.assert_allclose(stats.chi2.cdf(r2, 4) + stats.chi2.cdf(r2_partner, 4), 1.0,
                                   atol=1e-10)
        # same direction in R^4
        unit = z.reshape(1000, 4) / np.sqrt(r2)[:, None]
        unit_partner = partner.reshape(1000, 4) / np.sqrt(r2_partner)[:, None]
        np.testing.assert_allclose(unit, unit_partner, atol=1e-12)

    def test_antithetic_partner_is_not_a_symmetry_of_the_integrand(self):
        trial = ef.HardyTrial(2, 0.5, s=2.0)
        z = np.random.default_rng(6).standard_normal((1000, 2, 2))
        plus = trial.terms(z * trial.sigma)
        reflected = trial.terms(-z * trial.sigma)
        partner = trial.terms(ef.antithetic_partner(z) * trial.sigma)
        # x -> -x leaves the integrands unchanged; the radial mirror does not
        np.testing.assert_allclose(reflected["kinetic"], plus["kinetic"])
        assert np.max(np.abs(partner["kinetic"] - plus["kinetic"])) > 1e-3

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            ef.hardy_quotient_mc(ef.HardyTrial(2, 0.5), samples=4, seed=1, streams=4)

    def test_flag_threshold(self):
        assert ef.MCEstimate(1.0, 0.2).flagged
        assert not ef.MCEstimate(1.0, 0.05).flagged

    @pytest.mark.parametrize("kwargs", [
        {"n_particles": 4, "alpha": 0.5},
        {"n_particles": 2, "alpha": 2.0},
        {"n_particles": 2, "alpha": 0.5, "m": 1},
        {"n_particles": 2, "alpha": 0.5, "s": -1.0},
    ])
    def test_trial_validation(self, kwargs):
        with pytest.raises(ValidationError):
            ef.HardyTrial(**kwargs)

    def test_family(self):
        family = ef.hardy_trial_family(3, 0.5)
        assert len(family) == 9
        assert all(t.s > 1.0 and t.m % 2 == 0 for t in family)
        assert math.isclose(family[0].sigma, 1.0 / math.sqrt(2.0))
