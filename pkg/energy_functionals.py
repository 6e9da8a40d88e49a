"""Quadratic forms evaluated directly on explicit trial states.

Covers the 2D energy of the gauge-dressed ansatz psi(x) U_eps(y) e^{-i alpha S},
the energy decoupling identity, 1D energies, and Monte Carlo Hardy quotients.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from gauge_geometry import grad_S, phase_S, vector_potentials
from models import ResourceError, ValidationError, check_alpha, check_epsilon
from oscillator_basis import make_quadrature, uepsilon_derivative, uepsilon_eval
from tonks_girardeau import TGEigenstate, tg_eigenfunction_gradient, tg_energy_quadrature

log = logging.getLogger("anyon_reduction.energy")

STDERR_FLAG_RATIO = 0.10
MC_CHUNK = 50_000


# ---------------------------------------------------------------------------
# 1D trial functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianProductTrial:
    """prod_j (2a/pi)^{1/4} exp(-a x_j^2); non-interacting, nonzero on coincidences."""

    N: int
    a: float = 0.5

    vanishes_on_diagonal = False

    def __post_init__(self):
        if self.N < 1 or not self.a > 0:
            raise ValidationError(f"invalid Gaussian trial N={self.N!r} a={self.a!r}")

    @property
    def x_scale(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.a)

    @property
    def energy(self) -> float:
        return self.N * (self.a + 1.0 / (4.0 * self.a))

    def value_and_gradient(self, xs) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        value = (2.0 * self.a / math.pi) ** (0.25 * self.N) * np.exp(-self.a * np.sum(xs * xs, axis=-1))
        return value, -2.0 * self.a * xs * value[..., None]


@dataclass(frozen=True)
class PairGaussianTrial:
    """(2a/sqrt(pi)) |x1 - x2| exp(-a (x1^2 + x2^2)); equals the TG ground state at a = 1/2."""

    a: float = 0.5

    N = 2
    vanishes_on_diagonal = True

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError(f"a must be positive, got {self.a!r}")

    @property
    def x_scale(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.a)

    @property
    def energy(self) -> float:
        return 4.0 * self.a + 1.0 / self.a

    def value_and_gradient(self, xs) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        if xs.shape[-1] != 2:
            raise ValidationError("pair trial takes two coordinates")
        c = 2.0 * self.a / math.sqrt(math.pi)
        diff = xs[..., 0] - xs[..., 1]
        envelope = c * np.exp(-self.a * np.sum(xs * xs, axis=-1))
        value = np.abs(diff) * envelope
        sign = np.sign(diff)
        grad = np.stack([sign * envelope, -sign * envelope], axis=-1) - 2.0 * self.a * xs * value[..., None]
        return value, grad


def _value_and_gradient(psi, xs):
    if isinstance(psi, TGEigenstate):
        return tg_eigenfunction_gradient(psi, xs)
    return psi.value_and_gradient(xs)


def _x_scale(psi) -> float:
    return getattr(psi, "x_scale", 1.0)


def _product_grid(orders, scales) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite points (P, D) at x = scale * xi with weights e^{xi^2} absorbed."""
    rules = [make_quadrature("gauss_hermite", o) for o in orders]
    axes = np.meshgrid(*[r.nodes * s for r, s in zip(rules, scales)], indexing="ij")
    w_axes = np.meshgrid(*[r.scaled_weights * s for r, s in zip(rules, scales)], indexing="ij")
    points = np.stack([a.ravel() for a in axes], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in w_axes]), axis=0)
    return points, weights


def _collision_free_orders(n: int, order: int) -> list[int]:
    """n Gauss-Hermite orders, from order upwards, with pairwise disjoint node sets.

    The tensor grid then has no point with x_i = x_j. Odd orders all contain
    the node 0, so two of them never go together.
    """
    orders: list[int] = []
    node_sets: list[np.ndarray] = []
    candidate = order
    while len(orders) < n:
        nodes = make_quadrature("gauss_hermite", candidate).nodes
        if all(np.min(np.abs(nodes[:, None] - other[None, :])) > 1e-10 for other in node_sets):
            orders.append(candidate)
            node_sets.append(nodes)
        candidate += 1
    return orders


def energy1d(psi, order: int = 48) -> float:
    """<psi| sum_j (-d_j^2 + x_j^2) |psi> by tensor quadrature with analytic gradients."""
    if isinstance(psi, TGEigenstate):
        return tg_energy_quadrature(psi, order)
    if psi.N > 3:
        raise ResourceError(f"tensor quadrature supports N <= 3, got {psi.N}")
    points, weights = _product_grid(_collision_free_orders(psi.N, order), [_x_scale(psi)] * psi.N)
    value, grad = psi.value_and_gradient(points)
    integrand = np.sum(grad * grad, axis=-1) + np.sum(points * points, axis=-1) * value * value
    return float(np.dot(weights, integrand))


# ---------------------------------------------------------------------------
# 2D ansatz energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialState2D:
    """Psi = psi(x_1, x_2) U_eps(y_1) U_eps(y_2) e^{-i alpha S}."""

    psi: object
    alpha: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 2.0:
            raise ValidationError(f"alpha must lie in [0, 2), got {self.alpha!r}")
        check_epsilon(self.epsilon)
        if self.N != 2:
            raise ResourceError(f"2D trial energies use 4D tensor quadrature (N = 2), got N={self.N}")
        if not getattr(self.psi, "vanishes_on_diagonal", True):
            raise ValidationError("the 1D factor must vanish on coincidences")

    @property
    def N(self) -> int:
        return self.psi.N


@dataclass
class _AnsatzGrid:
    weights: np.ndarray
    cfg: np.ndarray          # (P, 2, 2)
    psi: np.ndarray          # (P,)
    dpsi: np.ndarray         # (P, 2)
    u: np.ndarray            # (P,)  U_eps(y_1) U_eps(y_2)
    du: np.ndarray           # (P, 2)
    grad_s: np.ndarray       # (P, 2, 2)
    potentials: np.ndarray   # (P, 2, 2)
    phase: np.ndarray        # (P,)


def _ansatz_grid(t: TrialState2D, order: int) -> _AnsatzGrid:
    sx = _x_scale(t.psi)
    sy = math.sqrt(t.epsilon)
    points, weights = _product_grid([order, order + 1, order, order], [sx, sx, sy, sy])
    xs, ys = points[:, :2], points[:, 2:]
    cfg = np.stack([xs, ys], axis=-1)
    psi, dpsi = _value_and_gradient(t.psi, xs)
    uy = uepsilon_eval(t.epsilon, ys)
    duy = uepsilon_derivative(t.epsilon, ys)
    u = uy[:, 0] * uy[:, 1]
    du = np.stack([duy[:, 0] * uy[:, 1], uy[:, 0] * duy[:, 1]], axis=-1)
    return _AnsatzGrid(weights, cfg, psi, dpsi, u, du, grad_S(cfg), vector_potentials(cfg),
                       phase_S(cfg))


def energy2d_breakdown(t: TrialState2D, order: int = 24, with_phase: bool = True) -> dict:
    """Pieces of sum_j int (|D_j Psi|^2 + V_eps |Psi|^2) on a 4D Gauss-Hermite grid.

    The kinetic energy is assembled as |grad Psi|^2 + alpha A.J + alpha^2 |A|^2 |Psi|^2
    with J = 2 Im(conj(Psi) grad Psi), the gradient of the phase taken from grad_S
    and A from the vector potentials independently, so the alpha terms cancel
    numerically rather than by construction. x_1 and x_2 use rules of different
    order, so no node sits on the x-diagonal where psi vanishes.
    """
    g = _ansatz_grid(t, order)
    alpha = t.alpha
    phi = g.psi * g.u
    grad_phi = np.zeros(g.cfg.shape)
    grad_phi[..., 0] = g.dpsi * g.u[:, None]
    grad_phi[..., 1] = g.psi[:, None] * g.du
    if with_phase:
        rotation = np.exp(-1j * alpha * g.phase)
        Psi = phi * rotation
        grad_psi = (grad_phi - 1j * alpha * phi[:, None, None] * g.grad_s) * rotation[:, None, None]
    else:
        Psi = phi.astype(complex)
        grad_psi = grad_phi.astype(complex)

    density = np.abs(Psi) ** 2
    current = 2.0 * np.imag(np.conj(Psi)[:, None, None] * grad_psi)
    covariant = -1j * grad_psi + alpha * g.potentials * Psi[:, None, None]
    cov_sq = np.abs(covariant) ** 2

    xs, ys = g.cfg[..., 0], g.cfg[..., 1]
    potential = (np.sum(xs * xs, axis=-1) + np.sum(ys * ys, axis=-1) / t.epsilon**2) * density
    w = g.weights

    pieces = {
        "kinetic_x": float(w @ np.sum(cov_sq[..., 0], axis=-1)),
        "kinetic_y": float(w @ np.sum(cov_sq[..., 1], axis=-1)),
        "potential": float(w @ potential),
        "grad_sq": float(w @ np.sum(np.abs(grad_psi) ** 2, axis=(-1, -2))),
        "current_term": float(w @ (alpha * np.sum(g.potentials * current, axis=(-1, -2)))),
        "diamagnetic_term": float(w @ (alpha**2 * np.sum(g.potentials**2, axis=(-1, -2)) * density)),
        "gauge_residual": float(w @ (alpha**2 * np.sum((g.grad_s - g.potentials) ** 2, axis=(-1, -2))
                                     * density)),
        "norm": float(w @ density),
    }
    pieces["total"] = pieces["kinetic_x"] + pieces["kinetic_y"] + pieces["potential"]
    pieces["expanded_total"] = (pieces["grad_sq"] + pieces["current_term"]
                                + pieces["diamagnetic_term"] + pieces["potential"])
    return pieces


def energy2d_trial(t: TrialState2D, order: int = 24, with_phase: bool = True) -> float:
    """2D energy of the ansatz in expanded gauge form.

    Without the phase the 1/r^2 diamagnetic integrand is not polynomial and
    the value is only approximate.
    """
    return energy2d_breakdown(t, order, with_phase)["expanded_total"]


def decoupling_split(t: TrialState2D, order: int = 24) -> dict:
    """The three terms N e_eps ||Psi||^2, sum int U^2 |D_j Phi|^2 and sum int x_j^2 |Psi|^2.

    Phi = psi e^{-i alpha S}; their sum equals the 2D energy of Psi = Phi U.
    """
    g = _ansatz_grid(t, order)
    alpha = t.alpha
    rotation = np.exp(-1j * alpha * g.phase)
    Phi = g.psi * rotation
    grad_phi = np.zeros(g.cfg.shape, dtype=complex)
    grad_phi[..., 0] = g.dpsi * rotation[:, None]
    grad_phi = grad_phi - 1j * alpha * Phi[:, None, None] * g.grad_s
    covariant = -1j * grad_phi + alpha * g.potentials * Phi[:, None, None]
    density = np.abs(Phi) ** 2 * g.u**2
    w = g.weights
    xs = g.cfg[..., 0]
    split = {
        "n_e_eps": t.N / t.epsilon * float(w @ density),
        "covariant": float(w @ (g.u**2 * np.sum(np.abs(covariant) ** 2, axis=(-1, -2)))),
        "trap_x": float(w @ (np.sum(xs * xs, axis=-1) * density)),
    }
    split["sum"] = split["n_e_eps"] + split["covariant"] + split["trap_x"]
    return split


# ---------------------------------------------------------------------------
# Hardy constants
# ---------------------------------------------------------------------------

def c_alpha(alpha: float) -> float:
    """C_alpha = 2 min_{q in Z} (alpha - 2q)^2."""
    alpha = check_alpha(alpha)
    q = math.floor(alpha / 2.0)
    return 2.0 * min((alpha - 2.0 * q) ** 2, (alpha - 2.0 * (q + 1)) ** 2)


def many_anyon_hardy_constant(N: int, alpha: float) -> float:
    if N < 2:
        raise ValidationError(f"N must be >= 2, got {N!r}")
    c = c_alpha(alpha)
    return 2.0 * c / ((N - 1) * (2.0 + 3.0 * (N - 2) * c))


def channel_bound(m: int, alpha: float) -> tuple[float, float]:
    """((m + alpha)^2, min_q (alpha - 2q)^2) for even m."""
    if m % 2:
        raise ValidationError(f"m must be even, got {m!r}")
    return (m + alpha) ** 2, 0.5 * c_alpha(alpha)


def channel_quotient(m: int, alpha: float, s: float, b: float = 0.25, order: int = 40) -> float:
    """Relative-channel quotient 2(m+alpha)^2 + 2 int f'^2 r dr / int f^2 / r dr.

    f = r^s e^{-b r^2}. Both radial integrals are done by generalized
    Gauss-Laguerre in t = 2 b r^2, where they reduce to t^{s-1} e^{-t} times a
    quadratic.
    """
    if not s > 0 or not b > 0:
        raise ValidationError(f"need s > 0 and b > 0, got s={s!r} b={b!r}")
    angular, _ = channel_bound(m, alpha)
    rule = make_quadrature("gauss_laguerre_generalized", order, s - 1.0)
    t = rule.nodes
    # r f'^2 = f^2 (s - t)^2 / r, and the common factor cancels in the ratio
    numerator = rule.integrate((s - t) ** 2)
    denominator = rule.integrate(np.ones_like(t))
    return 2.0 * angular + 2.0 * numerator / denominator


def two_body_quotient_exact(m: int, alpha: float, s: float) -> float:
    """Full N=2 Hardy quotient of the trial family: relative channel plus the CM Gaussian."""
    angular, _ = channel_bound(m, alpha)
    return 2.0 * angular + 4.0 * s


# ---------------------------------------------------------------------------
# Monte Carlo Hardy quotients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HardyTrial:
    """phi = prod_{j<l} |x_j - x_l|^s exp(-a sum |x_j|^2) exp(i m sum_{j<l} theta_jl).

    theta_jl is the angle of x_j - x_l; m even keeps phi bosonic. Then
    |D_k phi|^2 = |grad_k |phi||^2 + (m + alpha)^2 |A_k|^2 |phi|^2.
    """

    n_particles: int
    alpha: float
    s: float = 2.0
    a: float = 0.5
    m: int = 0

    def __post_init__(self):
        if self.n_particles not in (2, 3):
            raise ValidationError(f"Hardy trials support N in {{2, 3}}, got {self.n_particles!r}")
        if not 0.0 <= self.alpha < 2.0:
            raise ValidationError(f"alpha must lie in [0, 2), got {self.alpha!r}")
        if self.s < 0 or not self.a > 0:
            raise ValidationError(f"need s >= 0 and a > 0, got s={self.s!r} a={self.a!r}")
        if self.m % 2:
            raise ValidationError(f"m must be even, got {self.m!r}")

    @property
    def sigma(self) -> float:
        """Per-coordinate standard deviation of the sampling density |exp(-a |x|^2)|^2."""
        return 1.0 / math.sqrt(4.0 * self.a)

    def terms(self, cfg: np.ndarray) -> dict[str, np.ndarray]:
        """Integrands divided by the Gaussian sampling density (up to one constant)."""
        n = self.n_particles
        pairs = list(itertools.combinations(range(n), 2))
        rho2 = {(j, l): np.sum((cfg[:, j] - cfg[:, l]) ** 2, axis=-1) for j, l in pairs}
        weight = np.ones(cfg.shape[0])
        for r2 in rho2.values():
            weight = weight * r2**self.s
        grad_log = -2.0 * self.a * cfg
        for (j, l), r2 in rho2.items():
            d = (cfg[:, j] - cfg[:, l]) / r2[:, None]
            grad_log[:, j] += self.s * d
            grad_log[:, l] -= self.s * d
        potentials = vector_potentials(cfg)
        kinetic = (np.sum(grad_log**2, axis=(-1, -2))
                   + (self.m + self.alpha) ** 2 * np.sum(potentials**2, axis=(-1, -2)))
        return {
            "kinetic": weight * kinetic,
            "pairs": weight * sum(1.0 / r2 for r2 in rho2.values()),
            "three_body": weight / sum(rho2.values()),
        }


def hardy_trial_family(n_particles: int, alpha: float) -> list[HardyTrial]:
    """Shipped trial family; s > 1 keeps the Monte Carlo variance finite."""
    return [HardyTrial(n_particles, alpha, s=s, m=m)
            for s in (1.5, 2.0, 3.0) for m in (0, -2, 2)]


class MCEstimate(NamedTuple):
    estimate: float
    stderr: float

    @property
    def flagged(self) -> bool:
        return self.stderr > STDERR_FLAG_RATIO * abs(self.estimate)


def antithetic_partner(z: np.ndarray) -> np.ndarray:
    """Standard-normal draws z of shape (size, N, 2) mapped to their antithetic partners.

    Each draw keeps its direction in R^{2N} while its squared radius r^2 ~ chi^2(2N)
    moves to the mirrored quantile, F(r'^2) = 1 - F(r^2). The partner is again
    standard normal. The Hardy integrands depend on the radius, unlike under
    x -> -x which leaves every one of them unchanged.
    """
    df = z.shape[-2] * z.shape[-1]
    r2 = np.sum(z * z, axis=(-2, -1))
    lower = stats.chi2.cdf(r2, df)
    # invert through the smaller tail
    mirrored = np.where(lower < 0.5, stats.chi2.isf(lower, df),
                        stats.chi2.ppf(stats.chi2.sf(r2, df), df))
    return z * np.sqrt(mirrored / r2)[:, None, None]


def _stream_samples(trial: HardyTrial, denominator: str, n_pairs: int,
                    seed: np.random.SeedSequence) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    num = np.empty(n_pairs)
    den = np.empty(n_pairs)
    for start in range(0, n_pairs, MC_CHUNK):
        size = min(MC_CHUNK, n_pairs - start)
        z = rng.standard_normal((size, trial.n_particles, 2))
        plus = trial.terms(z * trial.sigma)
        minus = trial.terms(antithetic_partner(z) * trial.sigma)
        num[start:start + size] = 0.5 * (plus["kinetic"] + minus["kinetic"])
        den[start:start + size] = 0.5 * (plus[denominator] + minus[denominator])
    return num, den


def _ratio_mc(trial: HardyTrial, denominator: str, samples: int, seed: int,
              streams: int, threads: int) -> MCEstimate:
    if samples < 2 * streams:
        raise ValidationError(f"samples={samples} too small for {streams} streams")
    n_pairs = samples // (2 * streams)
    children = np.random.SeedSequence(seed).spawn(streams)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(lambda ss: _stream_samples(trial, denominator, n_pairs, ss), children))
    num = np.concatenate([p[0] for p in parts])
    den = np.concatenate([p[1] for p in parts])
    ratio = num.mean() / den.mean()
    resid = num - ratio * den
    stderr = math.sqrt(resid.var(ddof=1) / resid.size) / den.mean()
    result = MCEstimate(float(ratio), float(stderr))
    if result.flagged:
        log.warning("Hardy estimate %.4f has stderr %.4f above %.0f%% (N=%d s=%g m=%d)",
                    result.estimate, result.stderr, 100 * STDERR_FLAG_RATIO,
                    trial.n_particles, trial.s, trial.m)
    return result


def hardy_quotient_mc(t: HardyTrial, samples: int, seed: int, streams: int = 4,
                      threads: int = 1) -> MCEstimate:
    """(sum_k int |D_k phi|^2) / (sum_{j<l} int |phi|^2 / |x_j - x_l|^2) by Monte Carlo.

    Samples the Gaussian envelope in antithetic pairs (see antithetic_partner);
    the standard error is the delta-method error of the ratio estimator.
    """
    return _ratio_mc(t, "pairs", samples, seed, streams, threads)


def three_particle_quotient_mc(t: HardyTrial, samples: int, seed: int, streams: int = 4,
                               threads: int = 1) -> MCEstimate:
    """(sum_k int |D_k phi|^2) / int |phi|^2 / rho^2, rho^2 the sum of squared pair distances.

    Bounded below by 3.
    """
    if t.n_particles != 3:
        raise ValidationError("the three-particle quotient needs N = 3")
    return _ratio_mc(t, "three_body", samples, seed, streams, threads)

