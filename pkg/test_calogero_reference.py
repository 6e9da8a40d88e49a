"""Tests for calogero_reference.py: closed-form levels and the finite-difference oracle."""

import math

import numpy as np
import pytest

import calogero_reference as cr
from models import ValidationError


class TestParams:
    def test_coupling_and_exponent(self):
        p = cr.CalogeroParams(0.5)
        assert p.g == pytest.approx(0.5)
        assert p.nu == pytest.approx(math.sqrt(0.5))

    def test_rejects_alpha_outside_range(self):
        with pytest.raises(ValidationError):
            cr.CalogeroParams(0.0)


class TestClosedForm:
    def test_relative_levels(self):
        nu = math.sqrt(1.25)
        np.testing.assert_allclose(cr.calogero_relative_levels(1.0, 3),
                                   [2 * (1 + nu), 2 * (3 + nu), 2 * (5 + nu)])

    def test_two_particle_levels(self):
        # centre of mass 1, 3, 5 on top of relative 2(1 + nu), 2(3 + nu)
        ground = 1.0 + 2.0 * (1.0 + math.sqrt(0.5))
        np.testing.assert_allclose(cr.calogero_n2_levels(0.5, 3), [ground, ground + 2, ground + 4])
        assert ground == pytest.approx(3.0 + math.sqrt(2.0))

    def test_accepts_params_object(self):
        assert cr.calogero_n2_levels(cr.CalogeroParams(1.0), 2) == cr.calogero_n2_levels(1.0, 2)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 1.5])
    def test_gap_over_tg(self, alpha):
        gap = cr.calogero_vs_tg_gap(alpha)
        assert gap == pytest.approx(2.0 * math.sqrt(alpha**2 + 0.25) - 1.0)
        assert gap > 0.0

    def test_k_must_be_positive(self):
        with pytest.raises(ValidationError):
            cr.calogero_relative_levels(0.5, 0)
        with pytest.raises(ValidationError):
            cr.calogero_n2_levels(0.5, 0)


class TestFiniteDifferenceOracle:
    @pytest.mark.parametrize("alpha", [0.5, 1.5])
    def test_matches_closed_form(self, alpha):
        np.testing.assert_allclose(cr.calogero_fd_levels(alpha, 3),
                                   cr.calogero_relative_levels(alpha, 3), atol=1e-4)

    def test_grid_study_converges(self):
        rows = cr.calogero_grid_study(0.5, k=3, grids=(500, 1000, 2000))
        assert [r["n_grid"] for r in rows] == [500, 1000, 2000]
        assert rows[0]["observed_order"] is None
        errors = [r["raw_error"] for r in rows]
        assert errors[0] > errors[1] > errors[2]
        assert rows[-1]["observed_order"] > 1.5
        assert rows[-1]["extrapolated_error"] < rows[-1]["raw_error"]
