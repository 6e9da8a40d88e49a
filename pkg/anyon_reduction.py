#!/usr/bin/env python3
"""Anyon dimensional reduction - spectra, overlaps and Hardy checks from the command line.

Every verb writes one CSV plus a JSON manifest next to it, and mirrors both
to MongoDB when MONGODB_URI is set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from anyon2d_solver import TruncationPolicy, default_cache_dir, two_anyon_spectrum
from calogero_reference import calogero_grid_study
from experiments import (
    CalogeroRow,
    DecouplingRow,
    HardyRow,
    OverlapQuadrature,
    OverlapRow,
    SweepRow,
    calogero_table,
    decoupling_table,
    epsilon_sweep,
    hardy_table,
    overlap_checks,
    overlap_study,
    sweep_checks,
)
from models import (
    DEFAULT_CONFIG,
    EXIT_CONVERGENCE,
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    AnyonError,
    RunConfig,
    ValidationError,
    merge_config,
)
from tonks_girardeau import tg_levels

log = logging.getLogger("anyon_reduction")

# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent
CONFIG_PATH = BASE_DIR / "config.json"

TOOL_VERSION = "1.0.0"
VERBS = ("tg", "spectrum2d", "sweep", "overlap", "hardy", "decoupling", "calogero")
CALOGERO_TOL = 1e-4


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def load_config(path: Path | None = None) -> dict:
    """Read a config file; a run manifest is accepted and its embedded config used.

    A missing default config.json is not an error (built-in defaults apply).
    """
    explicit = path is not None
    path = Path(path) if explicit else CONFIG_PATH
    if not explicit and not path.exists():
        return {}
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config {path} is not valid JSON: {e}") from e
    if isinstance(data, dict) and "run_id" in data and "config" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a JSON object")
    return data


def flag_overrides(args: argparse.Namespace) -> dict:
    """CLI flags as a nested override dict; unset flags are None and do not override."""
    alphas = [args.alpha] if args.alpha is not None else None
    return {
        "physics": {"alpha": args.alpha, "epsilon": args.epsilon, "n_particles": args.n},
        "solver": {"k": args.k, "n_max": args.nmax, "m_max": args.mmax, "omega_b": args.omega_b,
                   "tol": args.tol, "mode": args.mode, "cache_dir": args.cache_dir,
                   "check_doubling": False if args.no_doubling else None},
        "quadrature": {"order": args.order},
        "monte_carlo": {"samples": args.samples, "seed": args.seed},
        "experiments": {"eps_list": args.eps_list, "k_max": args.k_max, "alphas": alphas,
                        "threads": args.threads},
        "output": {"out": args.out},
    }


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """DEFAULT_CONFIG <- config file <- flags, validated for the verb."""
    merged = merge_config(DEFAULT_CONFIG, load_config(args.config))
    merged = merge_config(merged, flag_overrides(args))
    return RunConfig.from_dict(merged).validate(args.verb)


def truncation_policy(config: RunConfig) -> TruncationPolicy:
    return TruncationPolicy(
        n_max=config.n_max, m_max=config.m_max, omega_b=config.omega_b, tol=config.tol,
        max_iter=config.max_iter, mode=config.mode, check_doubling=config.check_doubling,
        seed=config.seed,
    )


def cache_dir(config: RunConfig) -> Path:
    return Path(config.cache_dir) if config.cache_dir else default_cache_dir()


# ---------------------------------------------------------------------------
# Run bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class Run:
    verb: str
    config: RunConfig
    timings: dict = field(default_factory=dict)
    cache: dict = field(default_factory=lambda: {"hits": 0, "misses": 0})
    seeds: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    @property
    def run_id(self) -> str:
        payload = json.dumps({"verb": self.verb, "config": self.config.to_dict()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class VerbResult:
    fields: tuple[str, ...]
    rows: list[dict]
    ok: bool


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, fields, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([format_value(row.get(name)) for name in fields])


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".manifest.json")


def write_manifest(csv_path: Path, run: Run) -> dict:
    manifest = {
        "run_id": run.run_id,
        "verb": run.verb,
        "tool_version": TOOL_VERSION,
        "config": run.config.to_dict(),
        "timings": run.timings,
        "wall_time": round(time.perf_counter() - run.started, 6),
        "convergence": run.convergence,
        "cache": run.cache,
        "seeds": run.seeds,
        "checksums": {csv_path.name: sha256_file(csv_path)},
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(manifest_path(csv_path), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def mirror_to_mongodb(manifest: dict, rows: list[dict]) -> None:
    """Best-effort copy to MongoDB; failures never change the exit code."""
    import db as db_module
    if not db_module.enabled():
        return
    try:
        db_module.ensure_indexes()
        stored = db_module.get_manifest(manifest["run_id"])
        if stored and stored.get("checksums") == manifest["checksums"]:
            log.info("Run %s already mirrored with identical output", manifest["run_id"][:12])
            return
        db_module.save_manifest(manifest)
        db_module.save_rows(manifest["run_id"], manifest["verb"], rows)
        log.info("Mirrored run %s to MongoDB", manifest["run_id"][:12])
    except Exception as e:
        log.warning("MongoDB mirror failed: %s", e)
    finally:
        db_module.close()


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------

def cmd_tg(config: RunConfig, run: Run) -> VerbResult:
    levels = tg_levels(config.n_particles, config.k)
    rows = [{"n_particles": config.n_particles, "k": i, "energy": energy, "orbitals": str(orbs)}
            for i, (energy, orbs) in enumerate(levels, 1)]
    log.info("TG N=%d: lowest %d levels %s", config.n_particles, config.k,
             ", ".join(format_value(r["energy"]) for r in rows))
    run.convergence = {"rows": len(rows), "converged": len(rows)}
    return VerbResult(("n_particles", "k", "energy", "orbitals"), rows, True)


def cmd_spectrum2d(config: RunConfig, run: Run) -> VerbResult:
    run.seeds["lanczos"] = config.seed
    res = two_anyon_spectrum(config.alpha, config.epsilon, config.k, truncation_policy(config),
                             cache_dir(config), run.cache)
    rows = []
    for i, (p, q, rel) in enumerate(res.provenance):
        rows.append({
            "alpha": config.alpha, "epsilon": config.epsilon, "k": i + 1,
            "lambda2d": float(res.eigenvalues[i]), "cm_p": p, "cm_q": q, "rel_idx": rel,
            "lambda_rel": float(res.relative_values[rel]), "residual": float(res.residuals[i]),
            "converged": bool(res.converged[i]),
        })
    converged = sum(r["converged"] for r in rows)
    run.convergence = {"rows": len(rows), "converged": converged, "truncation": res.truncation,
                       "iterations": res.iterations, "mode": res.mode}
    fields = ("alpha", "epsilon", "k", "lambda2d", "cm_p", "cm_q", "rel_idx", "lambda_rel",
              "residual", "converged")
    return VerbResult(fields, rows, converged == len(rows))


def cmd_sweep(config: RunConfig, run: Run) -> VerbResult:
    run.seeds["lanczos"] = config.seed
    rows = epsilon_sweep(config.alpha, config.eps_list, config.k_max, truncation_policy(config),
                         cache_dir(config), config.threads, run.cache)
    checks = sweep_checks(rows)
    for message in checks.violations:
        log.warning("Sweep check: %s", message)
    log.info("gap(eps=%g) = %.8f approaching from %s; distance to TG %.3e, to Calogero %.3e",
             rows[-1].epsilon, checks.gap_at_smallest, checks.direction, checks.distance_to_tg,
             checks.distance_to_calogero)
    converged = sum(r.converged for r in rows)
    run.convergence = {"rows": len(rows), "converged": converged, "checks": checks.to_dict()}
    return VerbResult(SweepRow.CSV_FIELDS, [r.to_row() for r in rows],
                      converged == len(rows) and checks.passed)


def cmd_overlap(config: RunConfig, run: Run) -> VerbResult:
    run.seeds["lanczos"] = config.seed
    quad = OverlapQuadrature(config.overlap_x_order, config.overlap_y_order,
                             config.overlap_r_order, config.overlap_theta_order)
    grid = {"grid_points": config.phi_grid_points, "half_width": config.phi_grid_half_width,
            "y_order": config.phi_y_order}
    rows = overlap_study(config.alpha, config.eps_list, config.k_max, truncation_policy(config),
                         quad, cache_dir(config), config.threads, with_projection=True,
                         projection_grid=grid, stats=run.cache)
    for r in rows:
        if r.k == 1:
            log.info("eps=%g: overlap %.8f (no phase %.8f), L2 distance %.3e",
                     r.epsilon, r.overlap, r.overlap_no_phase, r.l2_dist)
    checks = overlap_checks(rows)
    for message in checks.violations:
        log.warning("Overlap check: %s", message)
    run.convergence = {"rows": len(rows), **checks.to_dict()}
    return VerbResult(OverlapRow.CSV_FIELDS, [r.to_row() for r in rows], checks.passed)


def cmd_hardy(config: RunConfig, run: Run) -> VerbResult:
    run.seeds.update({"monte_carlo": config.seed, "streams": config.streams,
                      "samples": config.samples})
    rows = hardy_table(config.n_particles, config.alphas, config.samples, config.seed,
                       config.streams, config.threads)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        log.warning("Hardy %s N=%d alpha=%g s=%g m=%d: %.6f < %.6f - 3*%.2e",
                    r.check, r.n_particles, r.alpha, r.s, r.m, r.estimate, r.bound, r.stderr)
    run.convergence = {"rows": len(rows), "passed": len(rows) - len(failed),
                       "flagged": sum(r.flagged for r in rows)}
    return VerbResult(HardyRow.CSV_FIELDS, [r.to_row() for r in rows], not failed)


def cmd_decoupling(config: RunConfig, run: Run) -> VerbResult:
    rows = decoupling_table(config.alphas, config.eps_list, config.k_max, config.order,
                            config.threads)
    worst = max(abs(r.deviation) for r in rows)
    log.info("Decoupling identity: worst deviation %.3e over %d rows", worst, len(rows))
    passed = sum(r.passed for r in rows)
    run.convergence = {"rows": len(rows), "passed": passed, "worst_deviation": worst}
    return VerbResult(DecouplingRow.CSV_FIELDS, [r.to_row() for r in rows], passed == len(rows))


def cmd_calogero(config: RunConfig, run: Run) -> VerbResult:
    rows = calogero_table(config.alphas, config.k)
    study = calogero_grid_study(config.alphas[0], min(config.k, 5))
    worst = max(abs(r.deviation) for r in rows)
    log.info("Calogero oracle: worst deviation %.3e; gaps vs TG %s", worst,
             ", ".join(f"{r.gap_vs_tg:.6f}" for r in rows if r.k == 1))
    run.convergence = {"rows": len(rows), "worst_deviation": worst, "grid_study": study}
    return VerbResult(CalogeroRow.CSV_FIELDS, [r.to_row() for r in rows], worst < CALOGERO_TOL)


COMMANDS = {
    "tg": cmd_tg,
    "spectrum2d": cmd_spectrum2d,
    "sweep": cmd_sweep,
    "overlap": cmd_overlap,
    "hardy": cmd_hardy,
    "decoupling": cmd_decoupling,
    "calogero": cmd_calogero,
}


def output_path(verb: str, config: RunConfig) -> Path:
    return Path(config.out) if config.out else Path(config.out_dir) / f"{verb}.csv"


def execute(verb: str, config: RunConfig) -> bool:
    """Run one verb end to end; returns False when results failed their checks."""
    log.info("=" * 60)
    log.info("anyon_reduction %s starting at %s", verb, datetime.now(timezone.utc).isoformat())
    log.info("=" * 60)
    log.info("Config: alpha=%g eps=%g N=%d k=%d nmax=%d mmax=%d mode=%s threads=%d",
             config.alpha, config.epsilon, config.n_particles, config.k, config.n_max,
             config.m_max, config.mode, config.threads)

    run = Run(verb, config)
    with run.stage("compute"):
        result = COMMANDS[verb](config, run)
    path = output_path(verb, config)
    with run.stage("write"):
        write_csv(path, result.fields, result.rows)
    manifest = write_manifest(path, run)
    mirror_to_mongodb(manifest, result.rows)

    log.info("Wrote %d rows to %s (cache hits %d, misses %d) in %.2fs", len(result.rows), path,
             run.cache["hits"], run.cache["misses"], manifest["wall_time"])
    if not result.ok:
        log.warning("%s finished with unconverged or failing rows", verb)
    return result.ok


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _eps_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid epsilon list {text!r}") from e


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Few-anyon dimensional reduction toolkit")
    parser.add_argument("verb", choices=VERBS, help="What to compute")
    parser.add_argument("--alpha", type=float, help="Statistics parameter in (0, 2)")
    parser.add_argument("--epsilon", type=float, help="Anisotropy in (0, 1]")
    parser.add_argument("--eps-list", type=_eps_list, help="Comma-separated decreasing epsilons")
    parser.add_argument("--n", type=int, help="Particle number")
    parser.add_argument("--k", type=int, help="Number of levels")
    parser.add_argument("--k-max", type=int, help="Levels per epsilon in sweeps")
    parser.add_argument("--nmax", type=int, help="Radial truncation")
    parser.add_argument("--mmax", type=int, help="Angular truncation (even)")
    parser.add_argument("--omega-b", type=float, help="Basis scale (default eps^-1/2)")
    parser.add_argument("--order", type=int, help="Quadrature order")
    parser.add_argument("--tol", type=float, help="Eigenpair residual tolerance")
    parser.add_argument("--mode", choices=("standard", "shift_invert"), help="Lanczos mode")
    parser.add_argument("--no-doubling", action="store_true", help="Skip the truncation doubling check")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples")
    parser.add_argument("--threads", type=int, help="Worker threads (1 = deterministic)")
    parser.add_argument("--cache-dir", help="Matrix cache directory")
    parser.add_argument("--out", help="Output CSV path")
    parser.add_argument("--config", type=Path, help="Config file or run manifest")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings only")
    return parser.parse_args(argv)


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    logging.getLogger().setLevel(level)


def _fail(kind: str, message: str, code: int) -> int:
    log.error("%s: %s", kind, message)
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args)
    try:
        config = resolve_config(args)
        ok = execute(args.verb, config)
    except ValidationError as e:
        return _fail(e.kind, str(e), EXIT_VALIDATION)
    except AnyonError as e:
        return _fail(e.kind, str(e), EXIT_CONVERGENCE)
    except OSError as e:
        return _fail("io", str(e), EXIT_IO)
    return EXIT_OK if ok else EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
