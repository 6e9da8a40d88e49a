"""Two-anyon spectrum in the anisotropic trap.

The centre of mass separates exactly; the relative problem

    H_rel = 2(-i grad + alpha r^perp/|r|^2)^2 + r_x^2/2 + r_y^2/(2 eps^2)

is solved by Galerkin projection onto the isotropic Aharonov-Bohm oscillator
basis at scale omega_b, split as

    H_rel = 2[(-i grad + alpha r^perp/|r|^2)^2 + omega_b^2 r^2/4]
            + (1/2 - omega_b^2/2) r^2 + (1/eps^2 - 1) r^2 (1 - cos 2theta)/4.

The first bracket is diagonal, r^2 is tridiagonal within each m block and
r^2 cos 2theta couples m to m +- 2. Only even m enter (bosonic exchange).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg
from scipy import special

from models import AssemblyError, ValidationError, check_alpha, check_epsilon
from oscillator_basis import (
    ABBasisIndex,
    ab_radial_table,
    hermite_table,
    laguerre_table,
    make_quadrature,
)

log = logging.getLogger("anyon_reduction.solver")

CACHE_FORMAT_VERSION = 1
DROP_TOLERANCE = 1e-14
# Rough floor below which the default basis is expected to be under-resolved
EPSILON_FLOOR = 0.02
CHUNK_POINTS = 65_536


# ---------------------------------------------------------------------------
# Problem definition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelativeProblem:
    alpha: float
    epsilon: float
    omega_b: float
    n_max: int
    m_max: int
    quad_order: int | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        check_epsilon(self.epsilon)
        if not self.omega_b > 0:
            raise ValidationError(f"omega_b must be positive, got {self.omega_b!r}")
        if self.n_max < 1:
            raise ValidationError(f"n_max must be >= 1, got {self.n_max!r}")
        if self.m_max < 2 or self.m_max % 2:
            raise ValidationError(f"m_max must be an even integer >= 2, got {self.m_max!r}")

    @classmethod
    def create(cls, alpha: float, epsilon: float, n_max: int, m_max: int,
               omega_b: float | None = None, quad_order: int | None = None) -> "RelativeProblem":
        if omega_b is None:
            omega_b = default_omega_b(epsilon)
        return cls(float(alpha), float(epsilon), float(omega_b), int(n_max), int(m_max), quad_order)

    @property
    def angular_momenta(self) -> list[int]:
        return list(range(-self.m_max, self.m_max + 1, 2))

    @property
    def block_size(self) -> int:
        return self.n_max + 1

    @property
    def dimension(self) -> int:
        return (self.n_max + 1) * (self.m_max + 1)

    @property
    def quadrature_order(self) -> int:
        return self.quad_order or self.n_max + 2

    def nu(self, m: int) -> float:
        return abs(m + self.alpha)

    def index(self, n: int, m: int) -> int:
        return self.angular_momenta.index(m) * self.block_size + n

    def basis(self) -> list[ABBasisIndex]:
        return [ABBasisIndex.for_alpha(n, m, self.alpha)
                for m in self.angular_momenta for n in range(self.n_max + 1)]

    def doubled(self) -> "RelativeProblem":
        order = 2 * self.quad_order if self.quad_order else None
        return replace(self, n_max=2 * self.n_max, m_max=2 * self.m_max, quad_order=order)

    def key(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "omega_b": self.omega_b,
            "n_max": self.n_max,
            "m_max": self.m_max,
            "quad_order": self.quadrature_order,
        }


def default_omega_b(epsilon: float) -> float:
    """Geometric mean of the x and y confinement frequencies."""
    return epsilon ** -0.5


def default_shift(epsilon: float) -> float:
    """Shift for shift-invert on the relative sector: 1/eps, below the bound 1 + 1/eps."""
    return 1.0 / epsilon


# ---------------------------------------------------------------------------
# Sparse symmetric storage
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseSymmetric:
    """Upper triangle (row <= col) of a real symmetric matrix plus assembly metadata."""

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.rows > self.cols):
            raise AssemblyError("entries must be stored with row <= col")

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_csr(self) -> sparse.csr_matrix:
        upper = sparse.coo_matrix((self.values, (self.rows, self.cols)),
                                  shape=(self.dimension, self.dimension))
        strict = self.rows != self.cols
        lower = sparse.coo_matrix((self.values[strict], (self.cols[strict], self.rows[strict])),
                                  shape=(self.dimension, self.dimension))
        return (upper + lower).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        on_diag = self.rows == self.cols
        out[self.rows[on_diag]] = self.values[on_diag]
        return out


# ---------------------------------------------------------------------------
# Matrix elements
# ---------------------------------------------------------------------------

def radial_r2_tridiagonal(n_max: int, nu: float, omega_b: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic <R_n|r^2|R_k> within one angular block: (diagonal, superdiagonal)."""
    n = np.arange(n_max + 1, dtype=float)
    scale = 2.0 / omega_b
    diag = scale * (2.0 * n + nu + 1.0)
    off = -scale * np.sqrt((n[:-1] + 1.0) * (n[:-1] + nu + 1.0))
    return diag, off


def radial_r2_integrals(n_max: int, nu_a: float, nu_b: float, omega_b: float,
                        order: int) -> np.ndarray:
    """I[n, k] = int_0^inf R_{n,nu_a} r^2 R_{k,nu_b} r dr by generalized Gauss-Laguerre.

    In s = omega_b r^2 / 2 the integrand is s^beta e^{-s} times a polynomial of
    degree n + k, beta = (nu_a + nu_b)/2 + 1, so the rule is exact once
    order > n_max.
    """
    c = 0.5 * omega_b
    beta = 0.5 * (nu_a + nu_b) + 1.0
    rule = make_quadrature("gauss_laguerre_generalized", order, beta)
    p_a = laguerre_table(n_max, nu_a, rule.nodes)
    p_b = laguerre_table(n_max, nu_b, rule.nodes)
    log_scale = (special.gammaln(beta + 1.0)
                 - 0.5 * special.gammaln(nu_a + 1.0)
                 - 0.5 * special.gammaln(nu_b + 1.0))
    normalized = rule.weights / rule.moment
    return (math.exp(log_scale) / c) * (p_a * normalized) @ p_b.T


def assemble_relative(p: RelativeProblem) -> SparseSymmetric:
    """Galerkin matrix of H_rel in the isotropic AB oscillator basis."""
    wb = p.omega_b
    k_r2 = 0.5 - 0.5 * wb * wb + 0.25 * (1.0 / p.epsilon**2 - 1.0)
    k_cos = -0.125 * (1.0 / p.epsilon**2 - 1.0)
    size = p.block_size
    n = np.arange(size)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    ms = p.angular_momenta
    order = p.quadrature_order

    for mi, m in enumerate(ms):
        nu = p.nu(m)
        base = mi * size
        r2_diag, r2_off = radial_r2_tridiagonal(p.n_max, nu, wb)
        rows += [base + n, base + n[:-1]]
        cols += [base + n, base + n[:-1] + 1]
        vals += [2.0 * wb * (2.0 * n + nu + 1.0) + k_r2 * r2_diag, k_r2 * r2_off]

        if k_cos != 0.0 and mi + 1 < len(ms):
            nu_next = p.nu(ms[mi + 1])
            block = k_cos * radial_r2_integrals(p.n_max, nu, nu_next, wb, order)
            rr, cc = np.meshgrid(base + n, base + size + n, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(block.ravel())

    rows_a = np.concatenate(rows).astype(np.int64)
    cols_a = np.concatenate(cols).astype(np.int64)
    vals_a = np.concatenate(vals)
    if not np.all(np.isfinite(vals_a)):
        raise AssemblyError(f"non-finite matrix element for {p.key()}")
    keep = np.abs(vals_a) >= DROP_TOLERANCE
    metadata = {**p.key(), "format_version": CACHE_FORMAT_VERSION}
    matrix = SparseSymmetric(p.dimension, rows_a[keep], cols_a[keep], vals_a[keep], metadata)
    log.debug("Assembled relative matrix dim=%d nnz=%d (alpha=%g eps=%g)",
              p.dimension, matrix.nnz, p.alpha, p.epsilon)
    return matrix


# ---------------------------------------------------------------------------
# Matrix cache
# ---------------------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("ANYON_CACHE_DIR", "")
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / ".cache" / "matrices"


def _cache_path(p: RelativeProblem, cache_dir: Path) -> Path:
    key = json.dumps(p.key(), sort_keys=True)
    return Path(cache_dir) / f"{hashlib.sha256(key.encode()).hexdigest()[:32]}.npz"


def load_cached_matrix(p: RelativeProblem, cache_dir) -> SparseSymmetric | None:
    path = _cache_path(p, cache_dir)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("format_version") != CACHE_FORMAT_VERSION or header.get("key") != p.key():
                log.warning("Ignoring stale matrix cache entry %s", path.name)
                return None
            return SparseSymmetric(int(data["dimension"]), data["rows"].copy(),
                                   data["cols"].copy(), data["values"].copy(),
                                   {**p.key(), "format_version": CACHE_FORMAT_VERSION})
    except (OSError, ValueError, KeyError) as e:
        log.warning("Unreadable matrix cache entry %s: %s", path.name, e)
        return None


def save_cached_matrix(p: RelativeProblem, matrix: SparseSymmetric, cache_dir) -> Path | None:
    path = _cache_path(p, cache_dir)
    header = json.dumps({"format_version": CACHE_FORMAT_VERSION, "key": p.key()}, sort_keys=True)
    tmp = path.with_suffix(".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as f:
            np.savez(f, header=np.array(header), dimension=np.array(matrix.dimension),
                     rows=matrix.rows, cols=matrix.cols, values=matrix.values)
        os.replace(tmp, path)
    except OSError as e:
        log.warning("Could not write matrix cache %s: %s", path, e)
        return None
    return path


def get_relative_matrix(p: RelativeProblem, cache_dir=None, stats: dict | None = None) -> SparseSymmetric:
    """Cached assembly; stats (if given) counts cache hits and misses."""
    if cache_dir is not None:
        cached = load_cached_matrix(p, cache_dir)
        if cached is not None:
            if stats is not None:
                stats["hits"] = stats.get("hits", 0) + 1
            return cached
    matrix = assemble_relative(p)
    if stats is not None:
        stats["misses"] = stats.get("misses", 0) + 1
    if cache_dir is not None:
        save_cached_matrix(p, matrix, cache_dir)
    return matrix


# ---------------------------------------------------------------------------
# Lanczos
# ---------------------------------------------------------------------------

@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    truncation: dict = field(default_factory=dict)
    eigenvectors: np.ndarray | None = None
    iterations: int = 0
    mode: str = "standard"
    provenance: list[tuple[int, int, int]] = field(default_factory=list)
    relative_values: np.ndarray | None = None
    reference: np.ndarray | None = None
    truncation_converged: np.ndarray | None = None

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _as_csr(M) -> sparse.csr_matrix:
    if isinstance(M, SparseSymmetric):
        return M.to_csr()
    if sparse.issparse(M):
        return M.tocsr()
    return sparse.csr_matrix(np.asarray(M, dtype=float))


def gershgorin_lower_bound(A: sparse.csr_matrix) -> float:
    diag = A.diagonal()
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius))


def _orthogonalize(w: np.ndarray, V: np.ndarray) -> np.ndarray:
    # two passes of classical Gram-Schmidt
    for _ in range(2):
        w = w - V @ (V.T @ w)
    return w


def lanczos_smallest(M, k: int, tol: float = 1e-9, max_iter: int | None = None,
                     mode: str = "standard", shift: float | None = None, seed: int = 0,
                     recheck: bool = True) -> SpectralResult:
    """k smallest eigenpairs of a real symmetric matrix.

    Lanczos with full reorthogonalization and Rayleigh-Ritz on the stored basis.
    mode="shift_invert" runs the iteration on (M - shift)^{-1} (sparse LU), which
    separates levels sitting on a large offset; shift must lie below the wanted
    levels. Eigenvalues are Rayleigh quotients of M and a pair counts as
    converged when ||M y - lambda y|| <= tol (1 + |lambda|). After apparent
    convergence a fresh random direction is injected to catch missed copies of
    degenerate levels. Non-convergence returns partial results flagged False.
    """
    A = _as_csr(M)
    n = A.shape[0]
    if not 1 <= k < n:
        raise ValidationError(f"need 1 <= k < dimension, got k={k}, dimension={n}")
    if mode not in ("standard", "shift_invert"):
        raise ValidationError(f"unknown Lanczos mode {mode!r}")
    cap = n if max_iter is None else max(k + 1, min(int(max_iter), n))

    if mode == "shift_invert":
        sigma = shift if shift is not None else gershgorin_lower_bound(A) - 1.0
        lu = splinalg.splu((A - sigma * sparse.identity(n, format="csr")).tocsc())
        apply = lu.solve
    else:
        sigma = None
        apply = A.dot

    rng = np.random.default_rng(seed)
    V = np.zeros((n, cap))
    W = np.zeros((n, cap))
    H = np.zeros((cap, cap))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)

    check_every = max(5, k)
    accepted: np.ndarray | None = None
    recheck_until = -1
    m = 0
    values = residuals = vectors = None
    flags = np.zeros(k, dtype=bool)

    while m < cap:
        V[:, m] = v
        W[:, m] = apply(v)
        H[: m + 1, m] = V[:, : m + 1].T @ W[:, m]
        H[m, : m + 1] = H[: m + 1, m]
        m += 1
        w = _orthogonalize(W[:, m - 1], V[:, :m])
        beta = np.linalg.norm(w)
        scale = max(1.0, float(np.max(np.abs(H[:m, :m]))))
        breakdown = beta <= 1e-12 * scale

        if m >= k and (m % check_every == 0 or breakdown or m == cap or m == recheck_until):
            theta, S = linalg.eigh(H[:m, :m])
            if mode == "shift_invert":
                pick = np.argsort(-np.abs(theta), kind="stable")[:k]
            else:
                pick = np.arange(k)
            Y = V[:, :m] @ S[:, pick]
            AY = A @ Y
            values = np.einsum("ij,ij->j", Y, AY)
            order = np.argsort(values, kind="stable")
            values, Y, AY = values[order], Y[:, order], AY[:, order]
            residuals = np.linalg.norm(AY - Y * values, axis=0)
            vectors = Y
            flags = residuals <= tol * (1.0 + np.abs(values))
            if flags.all():
                if not recheck or m == n:
                    break
                if m >= recheck_until:
                    if accepted is not None and np.all(
                            np.abs(values - accepted) <= tol * (1.0 + np.abs(values))):
                        break
                    accepted = values.copy()
                    recheck_until = min(cap, m + k + 5)
                    breakdown = True

        if m == cap:
            break
        if breakdown:
            v = _orthogonalize(rng.standard_normal(n), V[:, :m])
            norm = np.linalg.norm(v)
            if norm < 1e-10:
                break
            v /= norm
        else:
            v = w / beta

    if values is None:
        raise AssemblyError("Lanczos iteration produced no Ritz values")
    if not flags.all():
        log.warning("Lanczos: %d of %d pairs unconverged after %d iterations",
                    int(np.sum(~flags)), k, m)
    return SpectralResult(
        eigenvalues=values,
        residuals=residuals,
        converged=flags,
        eigenvectors=vectors,
        iterations=m,
        mode=mode if sigma is None else f"{mode}(sigma={sigma:.17g})",
    )


# ---------------------------------------------------------------------------
# Full two-anyon spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPolicy:
    n_max: int = 64
    m_max: int = 64
    omega_b: float | None = None
    tol: float = 1e-9
    max_iter: int | None = 600
    mode: str = "shift_invert"
    check_doubling: bool = True
    quad_order: int | None = None
    seed: int = 0
    rel_tol: float = 1e-4


def cm_levels(epsilon: float, k: int) -> list[tuple[float, int, int]]:
    """k smallest centre-of-mass levels (2p+1) + (2q+1)/eps as (value, p, q)."""
    levels = [((2 * p + 1) + (2 * q + 1) / epsilon, p, q) for p in range(k) for q in range(k)]
    levels.sort()
    return levels[:k]


def solve_relative(problem: RelativeProblem, k: int, policy: TruncationPolicy,
                   cache_dir=None, stats: dict | None = None) -> SpectralResult:
    matrix = get_relative_matrix(problem, cache_dir, stats)
    shift = default_shift(problem.epsilon) if policy.mode == "shift_invert" else None
    result = lanczos_smallest(matrix, k, tol=policy.tol, max_iter=policy.max_iter,
                              mode=policy.mode, shift=shift, seed=policy.seed)
    result.truncation = problem.key()
    return result


def two_anyon_spectrum(alpha: float, epsilon: float, k: int,
                       policy: TruncationPolicy | None = None, cache_dir=None,
                       stats: dict | None = None) -> SpectralResult:
    """k smallest eigenvalues of the two-anyon Hamiltonian with (p, q, rel) provenance.

    The relative sector is solved at the policy truncation and, with
    check_doubling, again at doubled n_max and m_max; reported values come from
    the finer solve and a level counts as converged when the two agree to
    rel_tol and the finer Lanczos pair converged.
    """
    policy = policy or TruncationPolicy()
    alpha = check_alpha(alpha)
    epsilon = check_epsilon(epsilon)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k!r}")
    if epsilon < EPSILON_FLOOR:
        log.warning("epsilon=%g is below %g; default truncations are likely unconverged",
                    epsilon, EPSILON_FLOOR)

    coarse_problem = RelativeProblem.create(alpha, epsilon, policy.n_max, policy.m_max,
                                            policy.omega_b, policy.quad_order)
    k_rel = min(k, coarse_problem.dimension - 1)
    coarse = solve_relative(coarse_problem, k_rel, policy, cache_dir, stats)
    finest, finest_problem = coarse, coarse_problem
    truncation_flags = None
    reference = None
    if policy.check_doubling:
        fine_problem = coarse_problem.doubled()
        fine = solve_relative(fine_problem, k_rel, policy, cache_dir, stats)
        change = np.abs(fine.eigenvalues - coarse.eigenvalues)
        truncation_flags = change <= policy.rel_tol * np.abs(fine.eigenvalues)
        rising = fine.eigenvalues > coarse.eigenvalues + 1e-10 * (1.0 + np.abs(coarse.eigenvalues))
        if np.any(rising):
            log.warning("Doubling raised %d relative levels (alpha=%g eps=%g)",
                        int(np.sum(rising)), alpha, epsilon)
        finest, finest_problem = fine, fine_problem
        reference = coarse.eigenvalues

    candidates = []
    for value, p, q in cm_levels(epsilon, k):
        for i, rel in enumerate(finest.eigenvalues):
            candidates.append((value + rel, p, q, i))
    best = heapq.nsmallest(k, candidates)

    pair_flags = finest.converged if truncation_flags is None else finest.converged & truncation_flags
    result = SpectralResult(
        eigenvalues=np.array([b[0] for b in best]),
        residuals=np.array([finest.residuals[b[3]] for b in best]),
        converged=np.array([bool(pair_flags[b[3]]) for b in best]),
        truncation={"coarse": coarse_problem.key(),
                    "fine": finest_problem.key() if policy.check_doubling else None},
        eigenvectors=finest.eigenvectors,
        iterations=finest.iterations,
        mode=finest.mode,
        provenance=[(b[1], b[2], b[3]) for b in best],
        relative_values=finest.eigenvalues,
        reference=reference,
        truncation_converged=truncation_flags,
    )
    log.info("two_anyon_spectrum alpha=%g eps=%g: lambda_1=%.10f (%d/%d converged)",
             alpha, epsilon, result.eigenvalues[0], int(np.sum(result.converged)), k)
    return result


def finest_problem(alpha: float, epsilon: float, policy: TruncationPolicy) -> RelativeProblem:
    """The truncation whose eigenvectors two_anyon_spectrum returns."""
    problem = RelativeProblem.create(alpha, epsilon, policy.n_max, policy.m_max,
                                     policy.omega_b, policy.quad_order)
    return problem.doubled() if policy.check_doubling else problem


# ---------------------------------------------------------------------------
# Eigenfunction reconstruction
# ---------------------------------------------------------------------------

def relative_wavefunction(problem: RelativeProblem, coeffs, r, theta) -> np.ndarray:
    """phi(r, theta) = sum_{n,m} c_{nm} R_{n,|m+alpha|}(r) e^{i m theta} / sqrt(2 pi)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (problem.dimension,):
        raise ValidationError(f"expected {problem.dimension} coefficients, got {coeffs.shape}")
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    flat_r, flat_t = r.ravel(), theta.ravel()
    out = np.zeros(flat_r.shape, dtype=complex)
    size = problem.block_size
    for start in range(0, flat_r.size, CHUNK_POINTS):
        rs = flat_r[start:start + CHUNK_POINTS]
        ts = flat_t[start:start + CHUNK_POINTS]
        acc = np.zeros(rs.shape, dtype=complex)
        for mi, m in enumerate(problem.angular_momenta):
            block = coeffs[mi * size:(mi + 1) * size]
            if not np.any(block):
                continue
            radial = block @ ab_radial_table(problem.n_max, problem.nu(m), problem.omega_b, rs)
            acc += radial * np.exp(1j * m * ts)
        out[start:start + CHUNK_POINTS] = acc
    return (out / math.sqrt(2.0 * math.pi)).reshape(r.shape)


def relative_wavefunction_cartesian(problem: RelativeProblem, coeffs, rx, ry) -> np.ndarray:
    rx, ry = np.broadcast_arrays(np.asarray(rx, dtype=float), np.asarray(ry, dtype=float))
    return relative_wavefunction(problem, coeffs, np.hypot(rx, ry), np.arctan2(ry, rx))


def cm_factors(p: int, q: int, epsilon: float, X, Y) -> tuple[np.ndarray, np.ndarray]:
    """Separate X and Y factors of the centre-of-mass eigenfunction."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    fx = 2.0 ** 0.25 * hermite_table(p, math.sqrt(2.0) * X)[p]
    sy = math.sqrt(2.0 / epsilon)
    fy = sy ** 0.5 * hermite_table(q, sy * Y)[q]
    return fx, fy


def cm_wavefunction(p: int, q: int, epsilon: float, X, Y) -> np.ndarray:
    """Normalized eigenfunction of -(1/2)d_X^2 + 2X^2 - (1/2)d_Y^2 + 2Y^2/eps^2."""
    fx, fy = cm_factors(p, q, epsilon, X, Y)
    return fx * fy
