"""Batch orchestration: outer-loop evolution runs, baselines, checkpointing.

Reproducibility: one master seed; every stochastic decision draws from a
counter-derived stream SeedSequence(seed, spawn_key=(domain, ...)) with
domain 0 = initial population (per individual), 1 = offspring variation
(per iteration and offspring index), 2 = baseline repeats.  Evaluations may
run in parallel, but results are buffered and inserted in offspring-index
order, so outputs are byte-identical for any worker count.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .archive import Archive, ArchiveEntry
from .errors import InvalidDesign
from .genome import crossover, decode, descriptor, mutate, random_genome
from .imaging import write_pgm
from .simp import run_simp

log = logging.getLogger("qdtopo")

METRICS_HEADER = ("iteration,evaluated,invalid,coverage,best_fitness,"
                  "batch_mean_fitness,archive_mean_fitness,qd_score,qd_offset")

_INIT_STREAM, _OFFSPRING_STREAM, _BASELINE_STREAM = 0, 1, 2


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _fmt(value):
    return "" if value is None else repr(float(value))


@dataclass
class EvalOutcome:
    index: int
    genome: object
    ok: bool
    fitness: float = float("nan")
    density: np.ndarray | None = None
    error: str = ""


def _evaluate_one(args):
    """Worker entry point: decode the genome and run the inner optimizer."""
    problem, genome, index = args
    voids = decode(genome, problem.mesh.nx, problem.mesh.ny)
    try:
        result = run_simp(problem, voids, params=problem.simp)
        return EvalOutcome(index=index, genome=genome, ok=True,
                           fitness=result.objective, density=result.density.rho)
    except InvalidDesign as exc:
        return EvalOutcome(index=index, genome=genome, ok=False, error=str(exc))


def _evaluate_baseline(args):
    problem, params, seed, repeat = args
    rng = _stream(seed, _BASELINE_STREAM, repeat)
    result = run_simp(problem, None, params=params, rng=rng)
    return repeat, result.objective


class _Evaluator:
    """Maps evaluation tasks over a spawn-context process pool (or inline
    when a single worker is configured)."""

    def __init__(self, workers):
        self.pool = None
        if workers > 1:
            self.pool = ProcessPoolExecutor(max_workers=workers,
                                            mp_context=get_context("spawn"))

    def map(self, fn, tasks):
        if self.pool is None:
            return [fn(t) for t in tasks]
        return list(self.pool.map(fn, tasks))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _make_batch(config, archive, iteration):
    """Genomes to evaluate at this iteration, derived deterministically from
    the master seed and the archive state frozen at iteration start."""
    genomes = []
    if iteration == 1:
        for j in range(config.initial_population):
            rng = _stream(config.seed, _INIT_STREAM, j)
            genomes.append(random_genome(rng, config.bounds, config.n_max))
        return genomes
    for j in range(config.batch_size):
        rng = _stream(config.seed, _OFFSPRING_STREAM, iteration, j)
        if not archive.cells:
            genomes.append(random_genome(rng, config.bounds, config.n_max))
            continue
        child = archive.select_parents(rng, 1)[0].genome
        if rng.random() < config.variation.crossover_prob:
            other = archive.select_parents(rng, 1)[0].genome
            child = crossover(child, other, rng)
        genomes.append(mutate(child, rng, config.bounds, config.variation))
    return genomes


def _atomic_write(path, data):
    tmp = path.with_suffix(path.suffix + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _portable_config(raw):
    """The run-defining part of a config: execution placement (output
    directory, worker count) is excluded so identical runs dump identical
    bytes wherever and however they execute."""
    run = {k: v for k, v in raw["run"].items() if k not in ("out_dir", "workers")}
    return {**raw, "run": run}


def _archive_json(config, archive, iteration):
    envelope = {"config": _portable_config(config.raw), "iteration": iteration,
                "archive": archive.to_dict()}
    return json.dumps(envelope, indent=2, sort_keys=True) + "\n"


def _write_checkpoint(out, config, archive, iteration, metrics_lines):
    _atomic_write(out / "archive.json", _archive_json(config, archive, iteration))
    densities = {f"c{i}_{j}": e.density for (i, j), e in archive.cells.items()
                 if e.density is not None}
    tmp = out / "elites.npz.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **densities)
    os.replace(tmp, out / "elites.npz")
    _atomic_write(out / "metrics.csv", "\n".join(metrics_lines) + "\n")


def _export_heatmap(out, archive):
    rows = archive.heatmap_rows()
    text = "\n".join(",".join(row) for row in rows) + "\n"
    _atomic_write(out / "heatmap.csv", text)


def _export_elites(out, archive, mesh):
    elites = out / "elites"
    elites.mkdir(exist_ok=True)
    for (i, j), entry in sorted(archive.cells.items()):
        if entry.density is not None:
            write_pgm(entry.density, mesh.nx, mesh.ny, elites / f"{i}_{j}.pgm")


def _load_checkpoint(out, config):
    """Restore archive state and verbatim metrics lines from a run directory.

    The iteration budget may differ (resume can extend a run); everything
    else that defines the run must match.
    """
    with open(out / "archive.json") as fh:
        envelope = json.load(fh)

    def identity(raw):
        portable = _portable_config(raw)
        run = {k: v for k, v in portable["run"].items() if k != "iterations"}
        return {**portable, "run": run}

    if identity(envelope["config"]) != identity(config.raw):
        raise ValueError("checkpoint configuration does not match the current config")
    archive = Archive.from_dict(envelope["archive"])
    iteration = int(envelope["iteration"])
    npz_path = out / "elites.npz"
    if npz_path.exists():
        with np.load(npz_path) as npz:
            for (i, j), entry in archive.cells.items():
                key = f"c{i}_{j}"
                if key in npz.files:
                    entry.density = npz[key]
    lines = [METRICS_HEADER]
    metrics_path = out / "metrics.csv"
    if metrics_path.exists():
        for line in metrics_path.read_text().splitlines()[1:]:
            if line and int(line.split(",", 1)[0]) <= iteration:
                lines.append(line)
    return archive, iteration, lines


@dataclass
class RunOutput:
    archive: Archive
    out_dir: Path
    metrics_lines: list


def run_oidd(config, resume=False):
    """Execute the outer evolutionary loop and write all run artifacts.

    Iteration 1 evaluates the random initial population; each later iteration
    selects parents from the archive, applies crossover (with the configured
    probability) then mutation, evaluates the offspring, and inserts results
    in offspring order.  A checkpoint (archive.json, elites.npz, metrics.csv)
    is written at the end of every iteration; pass resume=True to continue an
    interrupted run from its last checkpoint.
    """
    out = Path(config.out_dir) / config.name
    out.mkdir(parents=True, exist_ok=True)
    archive = Archive(config.space)
    start, metrics_lines = 1, [METRICS_HEADER]
    if resume and (out / "archive.json").exists():
        archive, done, metrics_lines = _load_checkpoint(out, config)
        start = done + 1
        log.info("resuming %s from iteration %d", config.name, start)
    _atomic_write(out / "config.json",
                  json.dumps(_portable_config(config.raw), indent=2,
                             sort_keys=True) + "\n")

    evaluator = _Evaluator(config.workers)
    try:
        for iteration in range(start, config.iterations + 1):
            genomes = _make_batch(config, archive, iteration)
            tasks = [(config.problem, g, j) for j, g in enumerate(genomes)]
            outcomes = sorted(evaluator.map(_evaluate_one, tasks),
                              key=lambda oc: oc.index)
            valid = []
            for oc in outcomes:
                if not oc.ok:
                    log.info("iteration %d offspring %d discarded: %s",
                             iteration, oc.index, oc.error)
                    continue
                entry = ArchiveEntry(
                    genome=oc.genome, fitness=oc.fitness,
                    descriptor=descriptor(oc.genome, config.bounds,
                                          config.dispersion_statistic),
                    density=oc.density, iteration=iteration, index=oc.index,
                )
                archive.try_insert(entry)
                valid.append(oc.fitness)
            m = archive.metrics()
            batch_mean = float(np.mean(valid)) if valid else None
            metrics_lines.append(",".join([
                str(iteration), str(len(outcomes)), str(len(outcomes) - len(valid)),
                _fmt(m.coverage), _fmt(m.best_fitness), _fmt(batch_mean),
                _fmt(m.mean_fitness), _fmt(m.qd_score), _fmt(m.qd_offset),
            ]))
            _write_checkpoint(out, config, archive, iteration, metrics_lines)
            log.info("iteration %d/%d: coverage %.3f, best %s", iteration,
                     config.iterations, m.coverage, _fmt(m.best_fitness) or "-")
    finally:
        evaluator.close()

    _export_heatmap(out, archive)
    _export_elites(out, archive, config.problem.mesh)
    return RunOutput(archive=archive, out_dir=out, metrics_lines=metrics_lines)


def run_baseline(config, repeats, random_init=False):
    """Plain inner-loop runs on the void-free domain.

    Deterministic initialization makes every repeat identical; random_init
    draws the starting densities uniformly in [volfrac - 0.1, volfrac + 0.1]
    (rescaled to the volume target) so repeats spread like independent runs.
    """
    from dataclasses import replace

    params = replace(config.problem.simp, random_init=random_init)
    tasks = [(config.problem, params, config.seed, r) for r in range(repeats)]
    evaluator = _Evaluator(config.workers)
    try:
        results = sorted(evaluator.map(_evaluate_baseline, tasks))
    finally:
        evaluator.close()
    return np.array([obj for _, obj in results])


def write_baseline_csv(objectives, path):
    lines = ["objective"] + [repr(float(o)) for o in objectives]
    _atomic_write(Path(path), "\n".join(lines) + "\n")
