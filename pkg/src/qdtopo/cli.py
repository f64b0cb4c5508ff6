"""Command-line interface.

Subcommands:
  run       execute an evolutionary run from a TOML config
  baseline  repeated plain inner-loop runs on the void-free domain
  stats     Kruskal-Wallis + Bonferroni comparison of objective files
  export    re-render heatmap/elite images from an archive.json
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, resolve_config
from .stats import bonferroni, kruskal_wallis


def _add_common(p):
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override [run].seed")
    p.add_argument("--workers", type=int, default=None, help="override [run].workers")
    p.add_argument("--out", default=None, help="override [run].out_dir")


def build_parser():
    parser = argparse.ArgumentParser(prog="qdtopo")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evolutionary archive run")
    _add_common(run)
    run.add_argument("--resume", action="store_true",
                     help="continue from the run directory's last checkpoint")

    base = sub.add_parser("baseline", help="plain optimizer repeats")
    _add_common(base)
    base.add_argument("--repeats", type=int, default=30)
    base.add_argument("--random-init", action="store_true",
                      help="randomize starting densities so repeats differ")

    stats = sub.add_parser("stats", help="compare groups of objective values")
    stats.add_argument("files", nargs="+", help="one file per group")
    stats.add_argument("--alpha", type=float, default=0.05)
    stats.add_argument("--column", default="objective",
                       help="CSV column to read when a header is present")

    export = sub.add_parser("export", help="re-render artifacts from archive.json")
    export.add_argument("--archive", required=True)
    export.add_argument("--out", required=True)
    return parser


def _read_group(path, column):
    """Numbers from a plain/CSV file: one value per line, or the named column
    when a header row is present."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} contains no data")
    values, start, col = lines, 0, 0
    header = [c.strip() for c in lines[0].split(",")]
    if any(not _is_number(c) for c in header):
        if column in header:
            col = header.index(column)
        elif len(header) == 1:
            col = 0
        else:
            raise ValueError(f"{path}: no column named {column!r} in header {header}")
        start = 1
    out = []
    for ln in values[start:]:
        fields = ln.split(",")
        out.append(float(fields[col]))
    return out


def _is_number(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def _cmd_run(args):
    config = load_config(args.config, seed=args.seed, workers=args.workers,
                         out_dir=args.out)
    from .runner import run_oidd

    output = run_oidd(config, resume=args.resume)
    m = output.archive.metrics()
    print(f"run {config.name}: {len(output.archive.cells)} elites, "
          f"coverage {m.coverage:.4f}, best {m.best_fitness}")
    print(f"artifacts in {output.out_dir}")
    return 0


def _cmd_baseline(args):
    config = load_config(args.config, seed=args.seed, workers=args.workers,
                         out_dir=args.out)
    from .runner import run_baseline, write_baseline_csv

    objectives = run_baseline(config, args.repeats, random_init=args.random_init)
    out = Path(config.out_dir) / config.name
    out.mkdir(parents=True, exist_ok=True)
    path = out / "objectives.csv"
    write_baseline_csv(objectives, path)
    print(f"baseline {config.name}: {len(objectives)} runs, "
          f"mean {np.mean(objectives):.4f}, std {np.std(objectives, ddof=1) if len(objectives) > 1 else 0.0:.4f}")
    print(f"objectives in {path}")
    return 0


def _cmd_stats(args):
    groups = [_read_group(path, args.column) for path in args.files]
    overall = kruskal_wallis(groups)
    print(f"groups: {len(groups)}, sizes: {[len(g) for g in groups]}")
    note = " (degenerate: all observations identical)" if overall.degenerate else ""
    print(f"Kruskal-Wallis: H = {overall.h:.4f}, p = {overall.p_value:.6g}{note}")
    if len(groups) > 2:
        pairs = [(i, j) for i in range(len(groups)) for j in range(i + 1, len(groups))]
        pvals = [kruskal_wallis([groups[i], groups[j]]).p_value for i, j in pairs]
        corrected = bonferroni(pvals, alpha=args.alpha)
        print(f"pairwise comparisons (Bonferroni threshold {corrected.threshold:.6g}):")
        for (i, j), p, sig, adj in zip(pairs, pvals, corrected.significant,
                                       corrected.adjusted):
            mark = "significant" if sig else "not significant"
            print(f"  {args.files[i]} vs {args.files[j]}: p = {p:.6g}, "
                  f"adjusted = {adj:.6g} -> {mark}")
    else:
        corrected = bonferroni([overall.p_value], alpha=args.alpha)
        mark = "significant" if corrected.significant[0] else "not significant"
        print(f"at alpha {args.alpha}: {mark}")
    return 0


def _cmd_export(args):
    from .archive import Archive
    from .imaging import write_pgm
    from .runner import _evaluate_one, _export_heatmap

    with open(args.archive) as fh:
        envelope = json.load(fh)
    config = resolve_config(envelope["config"])
    archive = Archive.from_dict(envelope["archive"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _export_heatmap(out, archive)

    npz_path = Path(args.archive).parent / "elites.npz"
    densities = {}
    if npz_path.exists():
        with np.load(npz_path) as npz:
            densities = {k: npz[k] for k in npz.files}
    elites = out / "elites"
    elites.mkdir(exist_ok=True)
    mesh = config.problem.mesh
    for (i, j), entry in sorted(archive.cells.items()):
        rho = densities.get(f"c{i}_{j}")
        if rho is None:
            # No sidecar densities: re-evaluate the stored genome.
            oc = _evaluate_one((config.problem, entry.genome, 0))
            if not oc.ok:
                raise RuntimeError(f"stored elite at cell ({i}, {j}) failed "
                                   f"re-evaluation: {oc.error}")
            rho = oc.density
        write_pgm(rho, mesh.nx, mesh.ny, elites / f"{i}_{j}.pgm")
    print(f"exported heatmap.csv and {len(archive.cells)} elite images to {out}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _cmd_run, "baseline": _cmd_baseline,
                "stats": _cmd_stats, "export": _cmd_export}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
