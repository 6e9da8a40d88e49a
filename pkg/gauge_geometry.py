"""Statistical gauge objects: vector potentials A_j, the phase S and the N=2 frame change.

Everything here is alpha-free geometry; alpha only multiplies A_j and S
downstream. Configurations are arrays of shape (..., N, 2).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from models import SingularityError, ValidationError

log = logging.getLogger("anyon_reduction.gauge")

# Closer than this to a coincidence (or x-diagonal) counts as singular
SINGULAR_DISTANCE = 1e-12


def _as_configuration(cfg) -> np.ndarray:
    cfg = np.asarray(cfg, dtype=float)
    if cfg.ndim < 2 or cfg.shape[-1] != 2:
        raise ValidationError(f"configuration must have shape (..., N, 2), got {cfg.shape}")
    if cfg.shape[-2] < 1:
        raise ValidationError("configuration needs at least one particle")
    return cfg


def perp(v) -> np.ndarray:
    """(x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _check_distinct(cfg: np.ndarray) -> None:
    n = cfg.shape[-2]
    for j, l in itertools.combinations(range(n), 2):
        d = np.hypot(*np.moveaxis(cfg[..., j, :] - cfg[..., l, :], -1, 0))
        if np.any(d < SINGULAR_DISTANCE):
            raise SingularityError(f"particles {j} and {l} coincide")


def _check_off_x_diagonals(cfg: np.ndarray) -> None:
    n = cfg.shape[-2]
    for j, l in itertools.combinations(range(n), 2):
        if np.any(np.abs(cfg[..., j, 0] - cfg[..., l, 0]) < SINGULAR_DISTANCE):
            raise SingularityError(f"particles {j} and {l} share an x-coordinate")


# ---------------------------------------------------------------------------
# Vector potential
# ---------------------------------------------------------------------------

def relative_potential(r) -> np.ndarray:
    """r^perp / |r|^2, the pair term of A_j for separation r."""
    r = np.asarray(r, dtype=float)
    dist2 = np.sum(r * r, axis=-1)
    if np.any(dist2 < SINGULAR_DISTANCE**2):
        raise SingularityError("pair separation vanishes")
    return perp(r) / dist2[..., None]


def vector_potential(j: int, cfg) -> np.ndarray:
    """A_j = sum_{k != j} (x_j - x_k)^perp / |x_j - x_k|^2 at particle j."""
    cfg = _as_configuration(cfg)
    n = cfg.shape[-2]
    if not 0 <= j < n:
        raise ValidationError(f"particle index {j} out of range for N={n}")
    _check_distinct(cfg)
    total = np.zeros(cfg.shape[:-2] + (2,))
    for k in range(n):
        if k != j:
            total = total + relative_potential(cfg[..., j, :] - cfg[..., k, :])
    return total


def vector_potentials(cfg) -> np.ndarray:
    """All A_j stacked, shape (..., N, 2)."""
    cfg = _as_configuration(cfg)
    return np.stack([vector_potential(j, cfg) for j in range(cfg.shape[-2])], axis=-2)


def potential_field(point, sources) -> np.ndarray:
    """sum_k (x - x_k)^perp / |x - x_k|^2 at a free point x (no self term)."""
    point = np.asarray(point, dtype=float)
    sources = np.asarray(sources, dtype=float)
    total = np.zeros(point.shape)
    for src in sources:
        total = total + relative_potential(point - src)
    return total


def circulation(j: int, cfg, center, radius: float, n_points: int = 2048) -> float:
    """Line integral of A_j (field of every particle except j) around a circle.

    Equals 2 pi times the number of other particles inside the loop; the
    trapezoid rule converges geometrically for loops clear of the sources.
    """
    cfg = _as_configuration(cfg)
    if cfg.ndim != 2:
        raise ValidationError("circulation takes a single configuration")
    sources = np.delete(cfg, j, axis=0)
    theta = 2.0 * math.pi * np.arange(n_points) / n_points
    center = np.asarray(center, dtype=float)
    pts = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    tangent = radius * np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    field = potential_field(pts, sources)
    return float(np.sum(field * tangent) * 2.0 * math.pi / n_points)


# ---------------------------------------------------------------------------
# Phase S
# ---------------------------------------------------------------------------

def phase_S(cfg):
    """S = sum_{j<l} arctan((y_j - y_l) / (x_j - x_l)), principal branch.

    Deliberately the one-argument arctan of the quotient, not atan2: S jumps by
    pi per pair across x_j = x_l, and configurations on those lines are
    rejected.
    """
    cfg = _as_configuration(cfg)
    _check_off_x_diagonals(cfg)
    n = cfg.shape[-2]
    total = np.zeros(cfg.shape[:-2])
    for j, l in itertools.combinations(range(n), 2):
        dx = cfg[..., j, 0] - cfg[..., l, 0]
        dy = cfg[..., j, 1] - cfg[..., l, 1]
        total = total + np.arctan(dy / dx)
    return float(total) if total.ndim == 0 else total


def grad_S(cfg) -> np.ndarray:
    """Analytic gradient of S, shape (..., N, 2); equals the vector potentials."""
    cfg = _as_configuration(cfg)
    _check_off_x_diagonals(cfg)
    n = cfg.shape[-2]
    grad = np.zeros(cfg.shape)
    for j, l in itertools.combinations(range(n), 2):
        dx = cfg[..., j, 0] - cfg[..., l, 0]
        dy = cfg[..., j, 1] - cfg[..., l, 1]
        u = dy / dx
        outer = 1.0 / (1.0 + u * u)
        # d/d(dx) arctan(dy/dx) = -u/dx * outer; d/d(dy) = outer/dx
        term = np.stack([-outer * u / dx, outer / dx], axis=-1)
        grad[..., j, :] += term
        grad[..., l, :] -= term
    return grad


# ---------------------------------------------------------------------------
# Centre-of-mass / relative frame (N = 2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CMRelativeFrame:
    R: np.ndarray
    r: np.ndarray


def _two_sum_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rounding error of a + b (Knuth's TwoSum); zero iff the sum is exact."""
    s = a + b
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def split_is_exact(cfg) -> bool:
    """True when x1 + x2 and x1 - x2 are representable, the inputs for which
    cm_relative_merge(cm_relative_split(cfg)) reproduces cfg bitwise."""
    cfg = _as_configuration(cfg)
    x1, x2 = cfg[..., 0, :], cfg[..., 1, :]
    return bool(np.all(_two_sum_error(x1, x2) == 0.0) and np.all(_two_sum_error(x1, -x2) == 0.0))


def cm_relative_split(cfg) -> CMRelativeFrame:
    """R = (x1 + x2)/2, r = x1 - x2."""
    cfg = _as_configuration(cfg)
    if cfg.shape[-2] != 2:
        raise ValidationError("the centre-of-mass split is defined for N = 2")
    x1, x2 = cfg[..., 0, :], cfg[..., 1, :]
    return CMRelativeFrame(R=(x1 + x2) / 2.0, r=x1 - x2)


def cm_relative_merge(frame: CMRelativeFrame) -> np.ndarray:
    """x1 = R + r/2, x2 = R - r/2.

    Inverts cm_relative_split bitwise whenever split_is_exact holds (for
    instance dyadic coordinates of moderate size); otherwise to within the
    rounding of x1 + x2 and x1 - x2.
    """
    R = np.asarray(frame.R, dtype=float)
    r = np.asarray(frame.r, dtype=float)
    return np.stack([R + r / 2.0, R - r / 2.0], axis=-2)
