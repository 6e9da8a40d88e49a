"""Tests for anyon2d_solver.py: assembly, cache, Lanczos and the two-anyon spectrum."""

import math

import numpy as np
import pytest
from scipy import integrate

import anyon2d_solver as solver
from models import AssemblyError, ValidationError
from oscillator_basis import ab_radial_table, radial_fd_levels


def small_policy(**overrides):
    values = {"n_max": 4, "m_max": 4, "tol": 1e-9, "max_iter": 600, "mode": "standard",
              "check_doubling": False}
    values.update(overrides)
    return solver.TruncationPolicy(**values)


# ---------------------------------------------------------------------------
# RelativeProblem
# ---------------------------------------------------------------------------

class TestRelativeProblem:
    def test_layout(self):
        p = solver.RelativeProblem.create(0.5, 1.0, n_max=3, m_max=4)
        assert p.angular_momenta == [-4, -2, 0, 2, 4]
        assert p.dimension == 20
        assert p.index(2, 0) == 2 * 4 + 2
        assert p.nu(-2) == pytest.approx(1.5)
        assert len(p.basis()) == p.dimension
        assert p.quadrature_order == 5

    def test_default_basis_scale(self):
        p = solver.RelativeProblem.create(0.5, 0.25, n_max=2, m_max=2)
        assert p.omega_b == pytest.approx(2.0)
        assert solver.default_shift(0.25) == pytest.approx(4.0)

    def test_doubled(self):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=3, m_max=4).doubled()
        assert (p.n_max, p.m_max) == (6, 8)

    @pytest.mark.parametrize("kwargs", [
        {"alpha": 0.0, "epsilon": 1.0, "n_max": 2, "m_max": 2},
        {"alpha": 0.5, "epsilon": 1.5, "n_max": 2, "m_max": 2},
        {"alpha": 0.5, "epsilon": 1.0, "n_max": 0, "m_max": 2},
        {"alpha": 0.5, "epsilon": 1.0, "n_max": 2, "m_max": 3},
        {"alpha": 0.5, "epsilon": 1.0, "n_max": 2, "m_max": 2, "omega_b": -1.0},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            solver.RelativeProblem.create(**kwargs)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

class TestAssembly:
    def test_isotropic_matrix_is_diagonal(self):
        p = solver.RelativeProblem.create(0.5, 1.0, n_max=5, m_max=6)
        matrix = solver.assemble_relative(p)
        assert matrix.nnz == p.dimension
        expected = [2.0 * (2 * idx.n + idx.nu + 1) for idx in p.basis()]
        np.testing.assert_allclose(matrix.diagonal(), expected, rtol=1e-14)

    def test_symmetric_dense_form(self):
        p = solver.RelativeProblem.create(0.7, 0.3, n_max=4, m_max=4)
        dense = solver.assemble_relative(p).to_dense()
        np.testing.assert_allclose(dense, dense.T)
        np.testing.assert_allclose(np.diag(dense), solver.assemble_relative(p).diagonal())

    def test_metadata_carries_key(self):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=2, m_max=2)
        meta = solver.assemble_relative(p).metadata
        assert meta["format_version"] == solver.CACHE_FORMAT_VERSION
        assert meta["n_max"] == 2 and meta["epsilon"] == 0.5

    def test_quadrature_r2_matches_tridiagonal(self):
        nu, omega_b = 1.3, 1.7
        diag, off = solver.radial_r2_tridiagonal(6, nu, omega_b)
        expected = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        got = solver.radial_r2_integrals(6, nu, nu, omega_b, order=8)
        np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_cross_block_integrals_match_direct_integration(self):
        nu_a, nu_b, omega_b = 0.5, 1.5, 1.4
        r = np.linspace(0.0, 14.0, 40001)
        ra = ab_radial_table(3, nu_a, omega_b, r)
        rb = ab_radial_table(3, nu_b, omega_b, r)
        direct = np.array([[integrate.simpson(ra[i] * rb[j] * r ** 3, x=r) for j in range(4)]
                           for i in range(4)])
        got = solver.radial_r2_integrals(3, nu_a, nu_b, omega_b, order=6)
        np.testing.assert_allclose(got, direct, atol=1e-7)

    def test_matches_brute_force_quadrature_of_hamiltonian(self):
        # <phi_a|H_rel|phi_b> by radial quadrature of the kinetic form and a 2D
        # (r, theta) quadrature of the trap, for a basis with cross-m coupling
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=2, m_max=2)
        ms = p.angular_momenta
        size = p.block_size
        theta = 2.0 * math.pi * np.arange(32) / 32
        trap_angle = np.cos(theta) ** 2 + np.sin(theta) ** 2 / p.epsilon ** 2
        phases = np.exp(1j * np.outer(ms, theta))
        # angular[a, b] = (1/2pi) int e^{-i m_a t} e^{i m_b t} (cos^2 + sin^2/eps^2) dt
        angular = (phases.conj() * trap_angle) @ phases.T / len(theta)

        def integrand(r):
            radial, deriv = [], []
            for m in ms:
                table, d = ab_radial_table(p.n_max, p.nu(m), p.omega_b, r, derivative=True)
                radial.append(table)
                deriv.append(d)
            out = np.zeros((p.dimension, p.dimension))
            for a, ma in enumerate(ms):
                sa = slice(a * size, (a + 1) * size)
                kinetic = 2.0 * (np.outer(deriv[a], deriv[a])
                                 + (ma + p.alpha) ** 2 / r ** 2 * np.outer(radial[a], radial[a]))
                out[sa, sa] += kinetic * r
                for b in range(len(ms)):
                    sb = slice(b * size, (b + 1) * size)
                    out[sa, sb] += 0.5 * r ** 3 * angular[a, b].real * np.outer(radial[a], radial[b])
            return out

        brute, _ = integrate.quad_vec(integrand, 1e-12, 30.0, epsabs=1e-12, epsrel=1e-12,
                                      limit=2000)
        np.testing.assert_allclose(solver.assemble_relative(p).to_dense(), brute, atol=1e-8)

    def test_lower_triangle_storage_rejected(self):
        with pytest.raises(AssemblyError):
            solver.SparseSymmetric(3, np.array([1]), np.array([0]), np.array([1.0]))


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

class TestMatrixCache:
    def test_miss_then_hit(self, tmp_path):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=3, m_max=4)
        stats = {"hits": 0, "misses": 0}
        first = solver.get_relative_matrix(p, tmp_path, stats)
        second = solver.get_relative_matrix(p, tmp_path, stats)
        assert stats == {"hits": 1, "misses": 1}
        np.testing.assert_array_equal(first.to_dense(), second.to_dense())

    def test_no_cache_dir_always_assembles(self):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=2, m_max=2)
        stats = {}
        solver.get_relative_matrix(p, None, stats)
        solver.get_relative_matrix(p, None, stats)
        assert stats == {"misses": 2}

    def test_different_keys_do_not_collide(self, tmp_path):
        a = solver.RelativeProblem.create(0.5, 0.5, n_max=2, m_max=2)
        b = solver.RelativeProblem.create(0.6, 0.5, n_max=2, m_max=2)
        solver.save_cached_matrix(a, solver.assemble_relative(a), tmp_path)
        assert solver.load_cached_matrix(b, tmp_path) is None

    def test_corrupt_entry_is_a_miss(self, tmp_path):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=2, m_max=2)
        solver._cache_path(p, tmp_path).write_bytes(b"not a matrix")
        assert solver.load_cached_matrix(p, tmp_path) is None
        stats = {}
        solver.get_relative_matrix(p, tmp_path, stats)
        assert stats == {"misses": 1}
        assert solver.load_cached_matrix(p, tmp_path) is not None

    def test_default_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ANYON_CACHE_DIR", str(tmp_path))
        assert solver.default_cache_dir() == tmp_path


# ---------------------------------------------------------------------------
# Lanczos
# ---------------------------------------------------------------------------

def _random_symmetric(n=60, seed=11):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return (a + a.T) / 2.0


class TestLanczos:
    @pytest.mark.parametrize("mode", ["standard", "shift_invert"])
    def test_matches_dense_solver(self, mode):
        a = _random_symmetric()
        res = solver.lanczos_smallest(a, 4, tol=1e-10, mode=mode)
        np.testing.assert_allclose(res.eigenvalues, np.linalg.eigvalsh(a)[:4], atol=1e-8)
        assert res.all_converged

    def test_finds_every_copy_of_a_degenerate_level(self):
        diag = np.array([1.0, 1.0, 1.0] + list(range(2, 32)), dtype=float)
        res = solver.lanczos_smallest(np.diag(diag), 4, tol=1e-10)
        np.testing.assert_allclose(res.eigenvalues, [1.0, 1.0, 1.0, 2.0], atol=1e-9)

    def test_eigenvectors_have_small_residuals(self):
        a = _random_symmetric(40, seed=5)
        res = solver.lanczos_smallest(a, 3)
        for i in range(3):
            y = res.eigenvectors[:, i]
            assert np.linalg.norm(a @ y - res.eigenvalues[i] * y) <= 1e-8 * (1 + abs(res.eigenvalues[i]))
            assert np.linalg.norm(y) == pytest.approx(1.0)

    def test_shift_is_reported(self):
        res = solver.lanczos_smallest(np.diag(np.arange(1.0, 21.0)), 2, mode="shift_invert", shift=0.5)
        assert res.mode == "shift_invert(sigma=0.5)"

    def test_reproducible_for_seed(self):
        a = _random_symmetric()
        r1 = solver.lanczos_smallest(a, 3, seed=4)
        r2 = solver.lanczos_smallest(a, 3, seed=4)
        np.testing.assert_array_equal(r1.eigenvalues, r2.eigenvalues)

    def test_iteration_cap_flags_unconverged(self):
        a = _random_symmetric(200, seed=2)
        res = solver.lanczos_smallest(a, 3, tol=1e-14, max_iter=6, recheck=False)
        assert res.iterations <= 6
        assert not res.all_converged

    @pytest.mark.parametrize("k", [0, 10])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValidationError):
            solver.lanczos_smallest(np.eye(10), k)

    def test_unknown_mode(self):
        with pytest.raises(ValidationError):
            solver.lanczos_smallest(np.eye(10), 2, mode="inverse")


# ---------------------------------------------------------------------------
# Two-anyon spectrum
# ---------------------------------------------------------------------------

class TestTwoAnyonSpectrum:
    def test_cm_levels(self):
        assert solver.cm_levels(1.0, 4) == [(2.0, 0, 0), (4.0, 0, 1), (4.0, 1, 0), (6.0, 0, 2)]
        assert solver.cm_levels(0.5, 2) == [(3.0, 0, 0), (5.0, 1, 0)]

    @pytest.mark.parametrize("mode", ["standard", "shift_invert"])
    def test_isotropic_closed_form(self, mode):
        # relative levels 2(2n + |m + alpha| + 1) plus centre-of-mass levels 2(p + q + 1)
        res = solver.two_anyon_spectrum(0.5, 1.0, 4, small_policy(mode=mode))
        np.testing.assert_allclose(res.eigenvalues, [5.0, 7.0, 7.0, 7.0], atol=1e-8)
        assert res.all_converged
        assert res.provenance[0] == (0, 0, 0)
        np.testing.assert_allclose(res.relative_values, [3.0, 5.0, 7.0, 7.0], atol=1e-8)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5])
    def test_isotropic_levels_match_closed_form_and_radial_oracle(self, alpha):
        closed = sorted(2.0 * (2 * n + abs(m + alpha) + 1)
                        for m in range(-10, 11, 2) for n in range(10))[:10]
        p = solver.RelativeProblem.create(alpha, 1.0, n_max=10, m_max=10)
        assembled = np.linalg.eigvalsh(solver.assemble_relative(p).to_dense())[:10]
        np.testing.assert_allclose(assembled, closed, atol=1e-8)
        oracle = sorted(level for m in range(-10, 11, 2)
                        for level in 2.0 * radial_fd_levels(abs(m + alpha), 0.5, 4))[:10]
        np.testing.assert_allclose(oracle, closed, rtol=1e-4)

    def test_matches_dense_diagonalization(self):
        policy = small_policy(n_max=6, m_max=6)
        res = solver.two_anyon_spectrum(0.5, 0.4, 3, policy)
        p = solver.finest_problem(0.5, 0.4, policy)
        dense = np.linalg.eigvalsh(solver.assemble_relative(p).to_dense())
        cm = 1.0 + 1.0 / 0.4
        assert res.eigenvalues[0] == pytest.approx(cm + dense[0], abs=1e-8)
        np.testing.assert_allclose(res.relative_values, dense[:3], atol=1e-8)

    def test_doubling_refines_and_reports(self, tmp_path):
        stats = {"hits": 0, "misses": 0}
        policy = small_policy(n_max=4, m_max=4, check_doubling=True)
        res = solver.two_anyon_spectrum(0.5, 0.5, 3, policy, tmp_path, stats)
        assert res.truncation["coarse"]["n_max"] == 4
        assert res.truncation["fine"]["n_max"] == 8
        assert res.truncation_converged is not None
        # nested bases: refinement can only lower Ritz values
        assert np.all(res.relative_values <= res.reference + 1e-8)
        assert stats == {"hits": 0, "misses": 2}
        solver.two_anyon_spectrum(0.5, 0.5, 3, policy, tmp_path, stats)
        assert stats == {"hits": 2, "misses": 2}

    def test_sorted_and_above_harmonic_floor(self):
        eps = 0.5
        res = solver.two_anyon_spectrum(1.0, eps, 5, small_policy(n_max=6, m_max=6))
        assert np.all(np.diff(res.eigenvalues) >= -1e-12)
        # centre of mass 1 + 1/eps plus relative at least 1 + 1/eps
        assert res.eigenvalues[0] > 2.0 * (1.0 + 1.0 / eps)

    def test_default_truncation_converges_at_epsilon_floor(self, tmp_path):
        # alpha = 1 is fermion-like: the relative gap is exactly 4 at every eps
        eps = solver.EPSILON_FLOOR
        res = solver.two_anyon_spectrum(1.0, eps, 1, solver.TruncationPolicy(), tmp_path)
        assert res.all_converged
        assert bool(np.all(res.truncation_converged))
        gap = res.eigenvalues[0] - 2.0 / eps
        assert gap == pytest.approx(4.0, abs=1e-5)

    def test_rejects_invalid_arguments(self):
        with pytest.raises(ValidationError):
            solver.two_anyon_spectrum(2.0, 0.5, 3, small_policy())
        with pytest.raises(ValidationError):
            solver.two_anyon_spectrum(0.5, 0.0, 3, small_policy())
        with pytest.raises(ValidationError):
            solver.two_anyon_spectrum(0.5, 0.5, 0, small_policy())


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

class TestReconstruction:
    def test_single_basis_function(self):
        p = solver.RelativeProblem.create(0.5, 1.0, n_max=3, m_max=2)
        coeffs = np.zeros(p.dimension)
        coeffs[p.index(1, -2)] = 1.0
        r, theta = 0.9, 0.4
        expected = (ab_radial_table(1, 1.5, 1.0, r)[1] * np.exp(-2j * theta)
                    / math.sqrt(2 * math.pi))
        assert complex(solver.relative_wavefunction(p, coeffs, r, theta)) == pytest.approx(complex(expected))

    def test_cartesian_matches_polar(self):
        p = solver.RelativeProblem.create(0.5, 0.5, n_max=3, m_max=2)
        coeffs = np.random.default_rng(0).normal(size=p.dimension)
        polar = complex(solver.relative_wavefunction(p, coeffs, math.sqrt(2.0), math.pi / 4))
        cart = complex(solver.relative_wavefunction_cartesian(p, coeffs, 1.0, 1.0))
        assert cart == pytest.approx(polar)

    def test_wrong_coefficient_length(self):
        p = solver.RelativeProblem.create(0.5, 1.0, n_max=2, m_max=2)
        with pytest.raises(ValidationError):
            solver.relative_wavefunction(p, np.zeros(3), 1.0, 0.0)

    @pytest.mark.parametrize("p,q,eps", [(0, 0, 1.0), (2, 1, 0.3)])
    def test_cm_wavefunction_normalized(self, p, q, eps):
        x = np.linspace(-8.0, 8.0, 4001)
        fx, _ = solver.cm_factors(p, q, eps, x, 0.0)
        _, fy = solver.cm_factors(p, q, eps, 0.0, x)
        assert integrate.simpson(fx ** 2, x=x) == pytest.approx(1.0, rel=1e-8)
        assert integrate.simpson(fy ** 2, x=x) == pytest.approx(1.0, rel=1e-8)
