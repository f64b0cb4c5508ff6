"""Run configuration: TOML schema, defaults, and resolution into live objects.

Schema (all tables optional except [run].problem):

  [run]      name, problem ("mbb"|"gripper"), seed, iterations,
             initial_population, batch_size, workers, out_dir
  [problem]  keyword overrides for the problem factory (nx, ny, volfrac, ...)
  [genome]   n_max, l_max, w_max, p_mut, p_flip, sigma_frac, crossover_prob
  [simp]     penal, rmin, move, inner_iters, conv_tol, interpolation,
             void_mode, solver, random_init
  [archive]  entropy_bins, dispersion_bins, entropy_hi, dispersion_hi
             (zero/absent bounds are derived: ln(n_max) and half the domain
             diagonal)
"""

import json
import math
from dataclasses import dataclass, replace

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from .archive import DescriptorSpace
from .fem import SolverSettings
from .genome import GeneBounds, VariationParams
from .problems import build_problem

_RUN_DEFAULTS = {
    "name": "", "problem": "", "seed": 1, "iterations": 10,
    "initial_population": 20, "batch_size": 10, "workers": 1, "out_dir": "out",
}
_GENOME_DEFAULTS = {
    "n_max": 10, "l_max": 0, "w_max": 0,
    "p_mut": 0.3, "p_flip": 0.1, "sigma_frac": 0.1, "crossover_prob": 0.5,
}
_SIMP_KEYS = ("penal", "rmin", "move", "inner_iters", "conv_tol",
              "interpolation", "void_mode", "random_init")
_ARCHIVE_DEFAULTS = {
    "entropy_bins": 8, "dispersion_bins": 8, "entropy_hi": 0.0,
    "dispersion_hi": 0.0, "dispersion_statistic": "std",
}


class ConfigError(Exception):
    pass


def _merge(section, defaults, raw, label):
    out = dict(defaults)
    table = raw.get(section, {})
    unknown = set(table) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in [{label}]: {sorted(unknown)}")
    out.update(table)
    return out


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: live problem/bounds/space objects plus the
    normalized raw dictionary they were built from (for dumps and resume)."""

    name: str
    seed: int
    iterations: int
    initial_population: int
    batch_size: int
    workers: int
    out_dir: str
    n_max: int
    dispersion_statistic: str
    problem: object
    bounds: GeneBounds
    variation: VariationParams
    space: DescriptorSpace
    raw: dict

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def resolve_config(data):
    """Build a RunConfig from a (parsed) configuration dictionary."""
    known = {"run", "problem", "genome", "simp", "archive"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config tables: {sorted(unknown)}")
    run = _merge("run", _RUN_DEFAULTS, data, "run")
    if not run["problem"]:
        raise ConfigError("[run].problem is required")
    if not run["name"]:
        run["name"] = run["problem"]
    for key in ("iterations", "initial_population", "batch_size", "workers", "seed"):
        if int(run[key]) < (0 if key == "seed" else 1):
            raise ConfigError(f"[run].{key} must be at least 1")

    problem_overrides = dict(data.get("problem", {}))
    genome = _merge("genome", _GENOME_DEFAULTS, data, "genome")

    simp_table = dict(data.get("simp", {}))
    unknown = set(simp_table) - set(_SIMP_KEYS) - {"solver"}
    if unknown:
        raise ConfigError(f"unknown keys in [simp]: {sorted(unknown)}")
    solver = simp_table.pop("solver", "direct")

    try:
        problem = build_problem(run["problem"], **problem_overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [problem] section: {exc}") from exc
    simp = replace(problem.simp, solver=SolverSettings(method=solver),
                   **{k: simp_table[k] for k in simp_table})
    problem = replace(problem, simp=simp)

    nx, ny = problem.mesh.nx, problem.mesh.ny
    l_max = int(genome["l_max"]) or max(1, nx // 4)
    w_max = int(genome["w_max"]) or max(1, ny // 4)
    bounds = GeneBounds(nx=nx, ny=ny, l_max=l_max, w_max=w_max)
    variation = VariationParams(
        p_mut=float(genome["p_mut"]), p_flip=float(genome["p_flip"]),
        sigma_frac=float(genome["sigma_frac"]),
        crossover_prob=float(genome["crossover_prob"]),
    )

    arch = _merge("archive", _ARCHIVE_DEFAULTS, data, "archive")
    if arch["dispersion_statistic"] not in ("std", "mean"):
        raise ConfigError(
            f"[archive].dispersion_statistic must be 'std' or 'mean', "
            f"got {arch['dispersion_statistic']!r}")
    n_max = int(genome["n_max"])
    entropy_hi = float(arch["entropy_hi"]) or (math.log(n_max) if n_max > 1 else 1.0)
    dispersion_hi = float(arch["dispersion_hi"]) or math.hypot(nx, ny) / 2.0
    space = DescriptorSpace(
        los=(0.0, 0.0), his=(entropy_hi, dispersion_hi),
        bins=(int(arch["entropy_bins"]), int(arch["dispersion_bins"])),
    )

    normalized = {
        "run": run,
        "problem": problem_overrides,
        "genome": {**genome, "l_max": l_max, "w_max": w_max},
        "simp": {**{k: getattr(simp, k) for k in _SIMP_KEYS}, "solver": solver},
        "archive": {**arch, "entropy_hi": entropy_hi, "dispersion_hi": dispersion_hi},
    }
    return RunConfig(
        name=str(run["name"]), seed=int(run["seed"]),
        iterations=int(run["iterations"]),
        initial_population=int(run["initial_population"]),
        batch_size=int(run["batch_size"]), workers=int(run["workers"]),
        out_dir=str(run["out_dir"]), n_max=n_max,
        dispersion_statistic=str(arch["dispersion_statistic"]),
        problem=problem, bounds=bounds, variation=variation, space=space,
        raw=normalized,
    )


def load_config(path, seed=None, workers=None, out_dir=None):
    """Parse a TOML run configuration with optional CLI overrides."""
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    run = data.setdefault("run", {})
    if seed is not None:
        run["seed"] = seed
    if workers is not None:
        run["workers"] = workers
    if out_dir is not None:
        run["out_dir"] = out_dir
    return resolve_config(data)
