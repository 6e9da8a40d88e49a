"""Run configuration, defaults, validation and the shared error hierarchy."""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class AnyonError(Exception):
    """Base class for every error raised by this tool."""

    kind = "error"


class ValidationError(AnyonError, ValueError):
    """Bad argument or configuration value (exit code 2)."""

    kind = "validation"


class SingularityError(ValidationError):
    """Configuration sits on a coincidence set where a gauge object is undefined."""

    kind = "singularity"


class ResourceError(AnyonError):
    """Request exceeds an enumeration cap or a supported problem size."""

    kind = "resource"


class AssemblyError(AnyonError):
    """Matrix assembly produced a non-finite or inconsistent result."""

    kind = "assembly"


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


# ---------------------------------------------------------------------------
# Shared argument checks
# ---------------------------------------------------------------------------

def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0):
        raise ValidationError(f"alpha must lie in (0, 2), got {alpha!r}")
    return alpha


def check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not (0.0 < epsilon <= 1.0) or math.isnan(epsilon):
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return epsilon


def check_eps_list(eps_list: list[float]) -> list[float]:
    values = [check_epsilon(e) for e in eps_list]
    if not values:
        raise ValidationError("eps_list must not be empty")
    for a, b in zip(values, values[1:]):
        if not b < a:
            raise ValidationError(f"eps_list must be strictly decreasing, got {values!r}")
    return values


# ---------------------------------------------------------------------------
# Defaults: mirrors config.json so the tool runs without the file
# ---------------------------------------------------------------------------

DEFAULT_CONFIG: dict = {
    "physics": {
        "alpha": 0.5,
        "epsilon": 1.0,
        "n_particles": 2,
    },
    "solver": {
        "k": 6,
        "n_max": 64,
        "m_max": 64,
        "omega_b": None,
        "tol": 1e-9,
        "max_iter": 600,
        "mode": "shift_invert",
        "check_doubling": True,
        "cache_dir": None,
    },
    "quadrature": {
        "order": 24,
        "overlap_x_order": 24,
        "overlap_y_order": 16,
        "overlap_r_order": 48,
        "overlap_theta_order": 48,
        "phi_grid_points": 41,
        "phi_grid_half_width": 5.0,
        "phi_y_order": 24,
    },
    "monte_carlo": {
        "samples": 1_000_000,
        "seed": 20240607,
        "streams": 4,
    },
    "experiments": {
        "eps_list": [1.0, 0.5, 0.2, 0.1, 0.05, 0.02],
        "k_max": 3,
        "alphas": [0.3, 0.5, 1.0, 1.5],
        "threads": 1,
    },
    "output": {
        "out_dir": "results",
        "out": None,
    },
}

SOLVER_MODES = ("standard", "shift_invert")

# Flat RunConfig field -> config.json section
FIELD_SECTIONS: dict[str, str] = {}
for _section, _values in DEFAULT_CONFIG.items():
    for _key in _values:
        FIELD_SECTIONS[_key] = _section


def merge_config(base: dict, override: dict) -> dict:
    """Return base updated section by section with override (None values skipped)."""
    merged = copy.deepcopy(base)
    for section, values in override.items():
        if not isinstance(values, dict):
            continue
        target = merged.setdefault(section, {})
        for key, value in values.items():
            if value is not None or key not in target:
                target[key] = value
    return merged


@dataclass
class RunConfig:
    """Flat view of the merged configuration, validated before any computation."""

    alpha: float = 0.5
    epsilon: float = 1.0
    n_particles: int = 2
    k: int = 6
    n_max: int = 64
    m_max: int = 64
    omega_b: float | None = None
    tol: float = 1e-9
    max_iter: int = 600
    mode: str = "shift_invert"
    check_doubling: bool = True
    cache_dir: str | None = None
    order: int = 24
    overlap_x_order: int = 24
    overlap_y_order: int = 16
    overlap_r_order: int = 48
    overlap_theta_order: int = 48
    phi_grid_points: int = 41
    phi_grid_half_width: float = 5.0
    phi_y_order: int = 24
    samples: int = 1_000_000
    seed: int = 20240607
    streams: int = 4
    eps_list: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.2, 0.1, 0.05, 0.02])
    k_max: int = 3
    alphas: list[float] = field(default_factory=lambda: [0.3, 0.5, 1.0, 1.5])
    threads: int = 1
    out_dir: str = "results"
    out: str | None = None

    @classmethod
    def from_dict(cls, config: dict) -> "RunConfig":
        merged = merge_config(DEFAULT_CONFIG, config)
        known = {f.name for f in fields(cls)}
        flat: dict[str, Any] = {}
        for section in merged.values():
            if isinstance(section, dict):
                flat.update({k: v for k, v in section.items() if k in known})
        return cls(**flat)

    def to_dict(self) -> dict:
        """Nested form, as written into manifests and accepted back by --config."""
        nested: dict[str, dict] = {section: {} for section in DEFAULT_CONFIG}
        for key, value in asdict(self).items():
            nested[FIELD_SECTIONS.get(key, "output")][key] = value
        return nested

    def validate(self, verb: str) -> "RunConfig":
        """Check ranges relevant to verb; raises ValidationError on the first problem."""
        if verb in ("spectrum2d", "sweep", "overlap", "decoupling", "calogero"):
            check_alpha(self.alpha)
        if verb == "spectrum2d":
            check_epsilon(self.epsilon)
        if verb in ("sweep", "overlap", "decoupling"):
            check_eps_list(self.eps_list)
        if verb in ("decoupling", "hardy"):
            for a in self.alphas:
                check_alpha(a)
        if verb == "tg" and not (1 <= int(self.n_particles) <= 12):
            raise ValidationError(f"n must lie in [1, 12], got {self.n_particles!r}")
        if verb == "hardy" and int(self.n_particles) not in (2, 3):
            raise ValidationError(f"hardy supports n in {{2, 3}}, got {self.n_particles!r}")
        if self.k < 1 or self.k_max < 1:
            raise ValidationError("k and k_max must be >= 1")
        if self.n_max < 1:
            raise ValidationError(f"nmax must be >= 1, got {self.n_max!r}")
        if self.m_max < 2 or self.m_max % 2:
            raise ValidationError(f"mmax must be an even integer >= 2, got {self.m_max!r}")
        if self.omega_b is not None and not self.omega_b > 0:
            raise ValidationError(f"omega_b must be positive, got {self.omega_b!r}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol!r}")
        if self.mode not in SOLVER_MODES:
            raise ValidationError(f"mode must be one of {SOLVER_MODES}, got {self.mode!r}")
        orders = (self.order, self.overlap_x_order, self.overlap_y_order,
                  self.overlap_r_order, self.overlap_theta_order, self.phi_y_order)
        if min(orders) < 1:
            raise ValidationError("quadrature orders must be >= 1")
        if self.phi_grid_points < 3:
            raise ValidationError("phi_grid_points must be >= 3")
        if self.threads < 1 or self.streams < 1:
            raise ValidationError("threads and streams must be >= 1")
        if self.samples < 100:
            raise ValidationError(f"samples must be >= 100, got {self.samples!r}")
        return self
