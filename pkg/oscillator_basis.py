"""Hermite functions, Aharonov-Bohm radial functions and Gauss-type quadrature rules.

Energy convention: the one-body operator is -d^2/dx^2 + x^2 with levels 2n + 1.
All evaluations are vectorized over their coordinate argument.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from models import ValidationError

log = logging.getLogger("anyon_reduction.basis")

# exp() of anything below this is treated as an exact zero
UNDERFLOW_EXPONENT = -700.0

PI_M14 = math.pi ** -0.25

QUADRATURE_KINDS = (
    "gauss_hermite",
    "gauss_laguerre_generalized",
    "gauss_legendre",
    "trapezoid_angular",
)


# ---------------------------------------------------------------------------
# Index types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermiteIndex:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError(f"Hermite index must be >= 0, got {self.n!r}")

    @property
    def energy(self) -> float:
        return oscillator_energy(self.n)


@dataclass(frozen=True)
class ABBasisIndex:
    """Radial quantum number n, even relative angular momentum m, exponent nu = |m + alpha|."""

    n: int
    m: int
    nu: float

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError(f"radial index must be >= 0, got {self.n!r}")
        if self.m % 2:
            raise ValidationError(f"angular momentum must be even, got {self.m!r}")
        if self.nu < 0:
            raise ValidationError(f"nu must be >= 0, got {self.nu!r}")

    @classmethod
    def for_alpha(cls, n: int, m: int, alpha: float) -> "ABBasisIndex":
        return cls(n=n, m=m, nu=abs(m + alpha))


def _index_value(n) -> int:
    return n.n if isinstance(n, HermiteIndex) else int(n)


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def _gaussian(exponent: np.ndarray, prefactor: float = 1.0) -> np.ndarray:
    """prefactor * exp(exponent), exact zero past the underflow radius."""
    safe = np.maximum(exponent, UNDERFLOW_EXPONENT)
    return np.where(exponent > UNDERFLOW_EXPONENT, prefactor * np.exp(safe), 0.0)


def hermite_table(n_max: int, x) -> np.ndarray:
    """Rows h_0..h_{n_max} evaluated at x; shape (n_max + 1, *x.shape).

    Uses the normalized recurrence
    h_{n+1} = x sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1}.
    """
    if n_max < 0:
        raise ValidationError(f"n_max must be >= 0, got {n_max!r}")
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = _gaussian(-0.5 * x * x, PI_M14)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for n in range(1, n_max):
        table[n + 1] = (x * math.sqrt(2.0 / (n + 1)) * table[n]
                        - math.sqrt(n / (n + 1)) * table[n - 1])
    return table


def hermite_derivative_table(n_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and first derivatives, h'_n = sqrt(2n) h_{n-1} - x h_n."""
    x = np.asarray(x, dtype=float)
    values = hermite_table(n_max, x)
    deriv = -x * values
    for n in range(1, n_max + 1):
        deriv[n] += math.sqrt(2.0 * n) * values[n - 1]
    return values, deriv


def hermite_eval(n, x):
    """L2-normalized eigenfunction h_n of -d^2/dx^2 + x^2."""
    n = _index_value(n)
    out = hermite_table(n, x)[n]
    return float(out) if np.ndim(out) == 0 else out


def oscillator_energy(n) -> float:
    n = _index_value(n)
    if n < 0:
        raise ValidationError(f"oscillator level must be >= 0, got {n!r}")
    return float(2 * n + 1)


def uepsilon_eval(epsilon: float, y):
    """Ground state (pi eps)^(-1/4) exp(-y^2 / (2 eps)) of -d^2/dy^2 + y^2/eps^2."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon!r}")
    y = np.asarray(y, dtype=float)
    out = _gaussian(-y * y / (2.0 * epsilon), (math.pi * epsilon) ** -0.25)
    return float(out) if out.ndim == 0 else out


def uepsilon_derivative(epsilon: float, y):
    y = np.asarray(y, dtype=float)
    return -(y / epsilon) * uepsilon_eval(epsilon, y)


# ---------------------------------------------------------------------------
# Aharonov-Bohm radial functions
# ---------------------------------------------------------------------------

def laguerre_table(n_max: int, nu: float, s) -> np.ndarray:
    """Scaled Laguerre polynomials p_n = sqrt(n! Gamma(nu+1) / Gamma(n+nu+1)) L_n^nu(s).

    p_0 = 1; orthonormal up to the factor Gamma(nu+1) under s^nu e^{-s} ds.
    """
    s = np.asarray(s, dtype=float)
    table = np.empty((n_max + 1,) + s.shape)
    table[0] = 1.0
    if n_max >= 1:
        table[1] = (1.0 + nu - s) / math.sqrt(1.0 + nu)
    for n in range(1, n_max):
        a = 1.0 / math.sqrt((n + 1) * (n + nu + 1))
        b = math.sqrt(n * (n + nu) / ((n + 1) * (n + nu + 1)))
        table[n + 1] = (2 * n + 1 + nu - s) * a * table[n] - b * table[n - 1]
    return table


def ab_radial_table(n_max: int, nu: float, omega_b: float, r, derivative: bool = False):
    """R_{n,nu}(r) for n = 0..n_max at basis scale omega_b.

    R_{n,nu} = N r^nu L_n^nu(s) e^{-s/2}, s = omega_b r^2 / 2, normalized so that
    int_0^inf R_n R_k r dr = delta_nk. These solve
    -(1/r)(r R')' + nu^2/r^2 R + omega_b^2 r^2/4 R = omega_b (2n + nu + 1) R.

    With derivative=True also returns dR/dr (r must be positive).
    """
    if not omega_b > 0:
        raise ValidationError(f"omega_b must be positive, got {omega_b!r}")
    if nu < 0:
        raise ValidationError(f"nu must be >= 0, got {nu!r}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValidationError("radial coordinate must be >= 0")
    c = 0.5 * omega_b
    s = c * r * r
    log_norm = 0.5 * (math.log(2.0) + (nu + 1.0) * math.log(c) - special.gammaln(nu + 1.0))
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    if nu == 0:
        log_power = np.zeros_like(r)
    else:
        log_power = np.where(r > 0, nu * log_r, -np.inf)
    envelope = _gaussian(log_norm + log_power - 0.5 * s)
    table = envelope * laguerre_table(n_max, nu, s)
    if not derivative:
        return table
    if np.any(r <= 0):
        raise ValidationError("radial derivative requires r > 0")
    deriv = np.empty_like(table)
    for n in range(n_max + 1):
        deriv[n] = ((nu + 2 * n) / r - c * r) * table[n]
        if n:
            deriv[n] -= (2.0 / r) * math.sqrt(n * (n + nu)) * table[n - 1]
    return table, deriv


def ab_radial_eval(idx: ABBasisIndex, omega_b: float, r):
    out = ab_radial_table(idx.n, idx.nu, omega_b, r)[idx.n]
    return float(out) if np.ndim(out) == 0 else out


def radial_fd_levels(nu: float, omega: float, k: int, r_max: float = 20.0,
                     n_grid: int = 4000, r_min: float = 1e-4,
                     extrapolate: bool = True) -> np.ndarray:
    """Lowest k eigenvalues of -w'' - (2nu+1) w'/r + omega^2 r^2 w by finite differences.

    w is the smooth factor left after pulling r^nu (planar radial problem) or
    r^(nu+1/2) (half-line problem) out of the eigenfunction, so the regular
    boundary behaviour at the origin is built in. Exact levels are
    2 omega (2n + nu + 1). Cell-centred conservative second-order scheme with
    weight r^(2nu+1), zero flux at r_min, Dirichlet at r_max; Richardson
    extrapolation over a grid doubling when extrapolate is set.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k!r}")

    def solve(cells: int) -> np.ndarray:
        h = (r_max - r_min) / cells
        faces = r_min + h * np.arange(cells + 1)
        centres = faces[:-1] + 0.5 * h
        p = 2.0 * nu + 1.0
        log_face = p * np.log(faces)
        log_centre = p * np.log(centres)
        left = np.exp(log_face[:-1] - log_centre)
        right = np.exp(log_face[1:] - log_centre)
        left[0] = 0.0
        right[-1] *= 2.0
        diag = (left + right) / h**2 + (omega * centres) ** 2
        off = -np.exp(log_face[1:-1] - 0.5 * (log_centre[:-1] + log_centre[1:])) / h**2
        return linalg.eigh_tridiagonal(diag, off, eigvals_only=True,
                                       select="i", select_range=(0, k - 1))

    coarse = solve(n_grid)
    if not extrapolate:
        return coarse
    fine = solve(2 * n_grid)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights for int f(x) w(x) dx ~ sum weights * f(nodes).

    scaled_weights = weights / w(nodes), for integrands that already carry their
    own decay.
    """

    kind: str
    order: int
    exponent: float
    nodes: np.ndarray
    weights: np.ndarray
    scaled_weights: np.ndarray
    moment: float

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _jacobi_matrix(kind: str, order: int, exponent: float) -> tuple[np.ndarray, np.ndarray, float]:
    k = np.arange(order, dtype=float)
    if kind == "gauss_hermite":
        return np.zeros(order), np.sqrt(k[1:] / 2.0), math.sqrt(math.pi)
    if kind == "gauss_laguerre_generalized":
        diag = 2.0 * k + exponent + 1.0
        off = np.sqrt(k[1:] * (k[1:] + exponent))
        return diag, off, math.exp(special.gammaln(exponent + 1.0))
    # gauss_legendre
    return np.zeros(order), k[1:] / np.sqrt(4.0 * k[1:] ** 2 - 1.0), 2.0


def _log_weight_function(kind: str, exponent: float, x: np.ndarray) -> np.ndarray:
    if kind == "gauss_hermite":
        return -x * x
    if kind == "gauss_laguerre_generalized":
        return exponent * np.log(x) - x
    return np.zeros_like(x)


def _golub_welsch(kind: str, order: int, exponent: float) -> QuadratureRule:
    diag, off, moment = _jacobi_matrix(kind, order, exponent)
    if order == 1:
        nodes = diag.copy()
    else:
        nodes = linalg.eigh_tridiagonal(diag, off, eigvals_only=True)
    # Christoffel sums of orthonormal functions q_k = p_k sqrt(w): stable in the tails
    log_w = _log_weight_function(kind, exponent, nodes)
    if kind == "gauss_laguerre_generalized":
        q_prev = np.exp(0.5 * (log_w - special.gammaln(exponent + 1.0)))
    else:
        q_prev = np.exp(0.5 * log_w) / math.sqrt(moment)
    total = q_prev * q_prev
    q_prev_prev = np.zeros_like(nodes)
    for j in range(order - 1):
        b_prev = off[j - 1] if j > 0 else 0.0
        q_next = ((nodes - diag[j]) * q_prev - b_prev * q_prev_prev) / off[j]
        total += q_next * q_next
        q_prev_prev, q_prev = q_prev, q_next
    scaled = 1.0 / total
    weights = np.exp(log_w) * scaled
    return QuadratureRule(kind, order, exponent, nodes, weights, scaled, moment)


@functools.lru_cache(maxsize=1024)
def make_quadrature(kind: str, order: int, exponent: float = 0.0) -> QuadratureRule:
    """Gauss rule of the given kind built from its three-term recurrence.

    Kinds: gauss_hermite (weight e^{-x^2}), gauss_laguerre_generalized
    (weight x^exponent e^{-x} on (0, inf)), gauss_legendre (weight 1 on [-1, 1]),
    trapezoid_angular (weight 1 on [0, 2 pi), exact for trigonometric
    polynomials of degree < order). Gauss rules are exact to degree 2 order - 1.
    Rules are cached and their arrays are read-only.
    """
    if kind not in QUADRATURE_KINDS:
        raise ValidationError(f"unsupported quadrature kind {kind!r}")
    if order < 1:
        raise ValidationError(f"quadrature order must be >= 1, got {order!r}")
    exponent = float(exponent)
    if kind == "gauss_laguerre_generalized" and not exponent > -1.0:
        raise ValidationError(f"Laguerre exponent must exceed -1, got {exponent!r}")

    if kind == "trapezoid_angular":
        nodes = 2.0 * math.pi * np.arange(order) / order
        weights = np.full(order, 2.0 * math.pi / order)
        rule = QuadratureRule(kind, order, exponent, nodes, weights, weights.copy(), 2.0 * math.pi)
    else:
        rule = _golub_welsch(kind, order, exponent)

    if not (np.all(np.isfinite(rule.weights)) and np.all(rule.weights > 0)):
        raise ValidationError(f"{kind}({order}, {exponent}) produced non-positive weights")
    for arr in (rule.nodes, rule.weights, rule.scaled_weights):
        arr.setflags(write=False)
    log.debug("Built %s rule order=%d exponent=%g", kind, order, exponent)
    return rule
