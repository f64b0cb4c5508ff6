"""Orchestration tests: deterministic runs, checkpoint/resume, baselines."""

import json

import numpy as np

from qdtopo.config import resolve_config
from qdtopo.genome import decode
from qdtopo.runner import run_baseline, run_oidd
from qdtopo.simp import run_simp


def tiny_config(tmp_path, **run_overrides):
    run = {
        "problem": "mbb", "name": "tiny", "seed": 7, "iterations": 3,
        "initial_population": 5, "batch_size": 4, "workers": 1,
        "out_dir": str(tmp_path),
    }
    run.update(run_overrides)
    return resolve_config({
        "run": run,
        "problem": {"nx": 16, "ny": 8, "volfrac": 0.5},
        "genome": {"n_max": 4, "l_max": 4, "w_max": 2},
        "simp": {"inner_iters": 6, "rmin": 1.5},
    })


class TestRunOidd:
    def test_run_produces_artifacts_and_valid_archive(self, tmp_path):
        config = tiny_config(tmp_path)
        output = run_oidd(config)
        out = output.out_dir
        for name in ("archive.json", "metrics.csv", "heatmap.csv",
                     "elites.npz", "config.json"):
            assert (out / name).exists()
        archive = output.archive
        assert len(archive.cells) >= 1
        for cell, entry in archive.cells.items():
            assert archive.space.bin(entry.descriptor) == cell
            assert np.isfinite(entry.fitness)
            assert entry.density is not None
        pgms = list((out / "elites").glob("*.pgm"))
        assert len(pgms) == len(archive.cells)
        lines = (out / "metrics.csv").read_text().splitlines()
        assert len(lines) == 1 + config.iterations
        assert lines[0].startswith("iteration,")

    def test_degenerate_single_run_equals_plain_simp(self, tmp_path):
        config = tiny_config(tmp_path, iterations=1, initial_population=1)
        # Seed chosen so the single random genome has every void inactive.
        found = None
        from qdtopo.genome import random_genome
        from qdtopo.runner import _stream
        for seed in range(200):
            g = random_genome(_stream(seed, 0, 0), config.bounds, config.n_max)
            if all(gene.a == 0 for gene in g.genes):
                found = seed
                break
        assert found is not None
        config = tiny_config(tmp_path, iterations=1, initial_population=1,
                             seed=found, name="degenerate")
        output = run_oidd(config)
        assert len(output.archive.cells) == 1
        (entry,) = output.archive.occupied()
        plain = run_simp(config.problem, None, config.problem.simp)
        assert entry.fitness == plain.objective

    def test_elites_reevaluate_to_stored_fitness(self, tmp_path):
        config = tiny_config(tmp_path, name="reeval")
        output = run_oidd(config)
        for entry in output.archive.occupied():
            voids = decode(entry.genome, config.problem.mesh.nx,
                           config.problem.mesh.ny)
            again = run_simp(config.problem, voids, config.problem.simp)
            assert again.objective == entry.fitness
            assert np.array_equal(again.density.rho, entry.density)

    def test_worker_count_does_not_change_outputs(self, tmp_path):
        a = tiny_config(tmp_path / "w1", name="wdet", workers=1)
        b = tiny_config(tmp_path / "w2", name="wdet", workers=2)
        out_a = run_oidd(a).out_dir
        out_b = run_oidd(b).out_dir
        assert (out_a / "archive.json").read_bytes() == (out_b / "archive.json").read_bytes()
        assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()
        assert (out_a / "heatmap.csv").read_bytes() == (out_b / "heatmap.csv").read_bytes()

    def test_repeat_run_bitwise_identical(self, tmp_path):
        a = tiny_config(tmp_path / "r1", name="rep")
        b = tiny_config(tmp_path / "r2", name="rep")
        out_a = run_oidd(a).out_dir
        out_b = run_oidd(b).out_dir
        assert (out_a / "archive.json").read_bytes() == (out_b / "archive.json").read_bytes()

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        full = tiny_config(tmp_path / "full", name="resume", iterations=4)
        out_full = run_oidd(full).out_dir

        part = tiny_config(tmp_path / "part", name="resume", iterations=2)
        run_oidd(part)
        cont = tiny_config(tmp_path / "part", name="resume", iterations=4)
        out_cont = run_oidd(cont, resume=True).out_dir

        assert (out_full / "archive.json").read_bytes() == (out_cont / "archive.json").read_bytes()
        assert (out_full / "metrics.csv").read_bytes() == (out_cont / "metrics.csv").read_bytes()

    def test_checkpoint_iteration_recorded(self, tmp_path):
        config = tiny_config(tmp_path, name="ckpt", iterations=2)
        out = run_oidd(config).out_dir
        envelope = json.loads((out / "archive.json").read_text())
        assert envelope["iteration"] == 2
        assert envelope["config"]["run"]["seed"] == 7
        assert envelope["archive"]["cells"]

    def test_invalid_designs_are_skipped_not_fatal(self, tmp_path):
        # Large voids on a small domain: some genomes must be invalid.
        config = resolve_config({
            "run": {"problem": "mbb", "name": "inv", "seed": 3, "iterations": 2,
                    "initial_population": 12, "batch_size": 6, "workers": 1,
                    "out_dir": str(tmp_path)},
            "problem": {"nx": 8, "ny": 4, "volfrac": 0.5},
            "genome": {"n_max": 6, "l_max": 8, "w_max": 4},
            "simp": {"inner_iters": 3, "rmin": 1.5},
        })
        output = run_oidd(config)
        lines = output.metrics_lines[1:]
        invalid_counts = [int(line.split(",")[2]) for line in lines]
        assert sum(invalid_counts) > 0
        assert len(output.archive.cells) >= 1


class TestBaseline:
    def test_deterministic_repeats_identical(self, tmp_path):
        config = tiny_config(tmp_path)
        objs = run_baseline(config, repeats=3, random_init=False)
        assert len(objs) == 3
        assert objs[0] == objs[1] == objs[2]

    def test_random_init_repeats_differ_but_replay(self, tmp_path):
        config = tiny_config(tmp_path)
        objs = run_baseline(config, repeats=4, random_init=True)
        assert len(set(objs.tolist())) > 1
        again = run_baseline(config, repeats=4, random_init=True)
        assert np.array_equal(objs, again)

    def test_matches_direct_run_simp(self, tmp_path):
        config = tiny_config(tmp_path)
        objs = run_baseline(config, repeats=1, random_init=False)
        direct = run_simp(config.problem, None, config.problem.simp)
        assert objs[0] == direct.objective
