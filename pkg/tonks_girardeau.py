"""Exact 1D hard-core (Tonks-Girardeau) model via the Bose-Fermi mapping.

Eigenstates are labelled by sets of distinct oscillator orbitals; the energy of
a set is the sum of its one-body levels 2o + 1.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from models import ResourceError, ValidationError
from oscillator_basis import hermite_derivative_table, hermite_table, make_quadrature

log = logging.getLogger("anyon_reduction.tg")

MAX_PARTICLES = 12
ENUMERATION_CAP = 100_000
MAX_QUADRATURE_PARTICLES = 3


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class OrbitalSet:
    orbitals: tuple[int, ...]

    def __post_init__(self):
        orbs = tuple(int(o) for o in self.orbitals)
        object.__setattr__(self, "orbitals", orbs)
        if not orbs:
            raise ValidationError("an orbital set needs at least one orbital")
        if orbs[0] < 0 or any(b <= a for a, b in zip(orbs, orbs[1:])):
            raise ValidationError(f"orbitals must be strictly increasing and >= 0, got {orbs!r}")

    @property
    def n_particles(self) -> int:
        return len(self.orbitals)

    @property
    def energy(self) -> int:
        return sum(2 * o + 1 for o in self.orbitals)

    def promotions(self):
        """Sets reachable by raising a single orbital by one level."""
        orbs = self.orbitals
        for j, o in enumerate(orbs):
            if j + 1 < len(orbs) and orbs[j + 1] == o + 1:
                continue
            yield OrbitalSet(orbs[:j] + (o + 1,) + orbs[j + 1:])

    def __str__(self) -> str:
        return " ".join(str(o) for o in self.orbitals)


@dataclass(frozen=True)
class TGEigenstate:
    orbitals: OrbitalSet
    energy: float
    N: int

    @classmethod
    def from_orbitals(cls, orbitals) -> "TGEigenstate":
        if not isinstance(orbitals, OrbitalSet):
            orbitals = OrbitalSet(tuple(orbitals))
        return cls(orbitals=orbitals, energy=float(orbitals.energy), N=orbitals.n_particles)

    @classmethod
    def ground(cls, n_particles: int) -> "TGEigenstate":
        return cls.from_orbitals(range(n_particles))


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

def tg_levels(N: int, k: int) -> list[tuple[float, OrbitalSet]]:
    """The k smallest energies with their orbital sets, counted with multiplicity.

    Best-first search over single-orbital promotions starting from the filled
    Fermi sea; ties come out in lexicographic orbital order.
    """
    if not (1 <= N <= MAX_PARTICLES):
        raise ValidationError(f"N must lie in [1, {MAX_PARTICLES}], got {N!r}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k!r}")
    if k > ENUMERATION_CAP:
        raise ResourceError(f"k={k} exceeds the enumeration cap {ENUMERATION_CAP}")

    ground = OrbitalSet(tuple(range(N)))
    heap: list[tuple[int, tuple[int, ...]]] = [(ground.energy, ground.orbitals)]
    visited = {ground.orbitals}
    levels: list[tuple[float, OrbitalSet]] = []
    while heap and len(levels) < k:
        energy, orbs = heapq.heappop(heap)
        current = OrbitalSet(orbs)
        levels.append((float(energy), current))
        for nxt in current.promotions():
            if nxt.orbitals not in visited:
                visited.add(nxt.orbitals)
                heapq.heappush(heap, (nxt.energy, nxt.orbitals))
    log.debug("tg_levels(N=%d, k=%d): visited %d orbital sets", N, k, len(visited))
    return levels


def tg_states(N: int, k: int) -> list[TGEigenstate]:
    return [TGEigenstate.from_orbitals(orbs) for _, orbs in tg_levels(N, k)]


def tg_eigenspace(N: int, energy: float) -> list[TGEigenstate]:
    """All states sharing one energy level (an orthonormal eigenspace basis)."""
    states = []
    k = 1
    while True:
        levels = tg_levels(N, k)
        if levels[-1][0] > energy:
            break
        k *= 2
    for level_energy, orbs in levels:
        if level_energy == energy:
            states.append(TGEigenstate.from_orbitals(orbs))
    return states


# ---------------------------------------------------------------------------
# Eigenfunctions
# ---------------------------------------------------------------------------

def _check_coords(state: TGEigenstate, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.shape[-1] != state.N:
        raise ValidationError(f"expected {state.N} coordinates, got shape {xs.shape}")
    return xs


def _slater_matrix(state: TGEigenstate, xs: np.ndarray, derivative: bool = False):
    """M[..., i, j] = h_{o_i}(x_j) (and the matching derivative matrix)."""
    orbs = list(state.orbitals.orbitals)
    if derivative:
        values, deriv = hermite_derivative_table(orbs[-1], xs)
        return np.moveaxis(values[orbs], 0, -2), np.moveaxis(deriv[orbs], 0, -2)
    return np.moveaxis(hermite_table(orbs[-1], xs)[orbs], 0, -2)


def _det_closed_form(m: np.ndarray) -> np.ndarray:
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if n == 3:
        return (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
                - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
                + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))
    raise ResourceError(f"closed-form determinant only for N <= 3, got {n}")


def _determinant(m: np.ndarray, closed_form: bool) -> np.ndarray:
    return _det_closed_form(m) if closed_form else np.linalg.det(m)


def exchange_sign(xs) -> np.ndarray:
    """prod_{i<j} sgn(x_j - x_i); zero when two coordinates coincide."""
    xs = np.asarray(xs, dtype=float)
    sign = np.ones(xs.shape[:-1])
    for i, j in itertools.combinations(range(xs.shape[-1]), 2):
        sign = sign * np.sign(xs[..., j] - xs[..., i])
    return sign


def slater_value(state: TGEigenstate, xs, closed_form: bool = False):
    """(N!)^{-1/2} det[h_{o_i}(x_j)], the fermionic partner of the state."""
    xs = _check_coords(state, xs)
    norm = 1.0 / math.sqrt(math.factorial(state.N))
    return norm * _determinant(_slater_matrix(state, xs), closed_form)


def slater_gradient(state: TGEigenstate, xs) -> tuple[np.ndarray, np.ndarray]:
    """Slater value and its gradient, one column replaced by derivatives per coordinate."""
    xs = _check_coords(state, xs)
    norm = 1.0 / math.sqrt(math.factorial(state.N))
    values, deriv = _slater_matrix(state, xs, derivative=True)
    grad = np.empty(xs.shape)
    for j in range(state.N):
        replaced = values.copy()
        replaced[..., :, j] = deriv[..., :, j]
        grad[..., j] = norm * np.linalg.det(replaced)
    return norm * np.linalg.det(values), grad


def tg_eigenfunction_eval(state: TGEigenstate, xs, closed_form: bool = False):
    """psi = (N!)^{-1/2} prod_{i<j} sgn(x_j - x_i) det[h_{o_i}(x_j)].

    Symmetric in the coordinates and exactly zero on coincidences; the sign
    convention makes every ground state positive.
    """
    xs = _check_coords(state, xs)
    out = exchange_sign(xs) * slater_value(state, xs, closed_form)
    return float(out) if np.ndim(out) == 0 else out


def tg_eigenfunction_gradient(state: TGEigenstate, xs) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient of psi away from coincidences."""
    xs = _check_coords(state, xs)
    sign = exchange_sign(xs)
    value, grad = slater_gradient(state, xs)
    return sign * value, sign[..., None] * grad


# ---------------------------------------------------------------------------
# Quadrature checks
# ---------------------------------------------------------------------------

def tensor_hermite_grid(n_particles: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite points (P, N) and weights with e^{x^2} absorbed."""
    if n_particles > MAX_QUADRATURE_PARTICLES:
        raise ResourceError(f"tensor quadrature supports N <= {MAX_QUADRATURE_PARTICLES}, "
                            f"got {n_particles}")
    rule = make_quadrature("gauss_hermite", order)
    axes = np.meshgrid(*([rule.nodes] * n_particles), indexing="ij")
    w_axes = np.meshgrid(*([rule.scaled_weights] * n_particles), indexing="ij")
    weights = np.prod(np.stack(w_axes), axis=0)
    points = np.stack([a.ravel() for a in axes], axis=-1)
    return points, weights.ravel()


def tg_energy_quadrature(state: TGEigenstate, order: int = 48) -> float:
    """sum_j int (|d_j psi|^2 + x_j^2 |psi|^2) by tensor Gauss-Hermite quadrature.

    The sign factor squares to one off the diagonals, so the integrand is the
    smooth Slater expression and the rule is exact once order exceeds the
    highest orbital by two.
    """
    points, weights = tensor_hermite_grid(state.N, order)
    value, grad = slater_gradient(state, points)
    kinetic = np.sum(grad * grad, axis=-1)
    potential = np.sum(points * points, axis=-1) * value * value
    return float(np.dot(weights, kinetic + potential))


def tg_overlap_matrix(states: list[TGEigenstate], order: int = 32) -> np.ndarray:
    """Gram matrix <psi_a, psi_b> by tensor quadrature (identity for distinct states)."""
    n = states[0].N
    if any(s.N != n for s in states):
        raise ValidationError("all states must have the same particle number")
    points, weights = tensor_hermite_grid(n, order)
    values = np.stack([slater_value(s, points) for s in states])
    return (values * weights) @ values.T
