"""MAP-Elites archive: descriptor binning, elite insertion, selection, metrics.

Cells hold the best (lowest fitness) design seen for their descriptor bin;
ties discard the newcomer, so per-cell fitness is non-increasing over a run.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyArchive
from .genome import Genome

INSERTED = "inserted"
REPLACED = "replaced"
DISCARDED = "discarded"


@dataclass(frozen=True)
class DescriptorSpace:
    """Axis-aligned box partitioned into uniform bins per dimension."""

    los: tuple
    his: tuple
    bins: tuple

    def __post_init__(self):
        if not len(self.los) == len(self.his) == len(self.bins):
            raise ValueError("mismatched descriptor space dimensions")
        for lo, hi, b in zip(self.los, self.his, self.bins):
            if not lo < hi:
                raise ValueError(f"need lo < hi per dimension, got [{lo}, {hi}]")
            if b < 1:
                raise ValueError("need at least one bin per dimension")

    @property
    def n_dims(self):
        return len(self.bins)

    @property
    def n_cells(self):
        return int(np.prod(self.bins))

    def bin(self, descriptor):
        """Cell index: floor((d - lo)/(hi - lo) * bins) per dimension, clamped
        so out-of-range descriptors land in the edge bins."""
        idx = []
        for d, lo, hi, b in zip(descriptor, self.los, self.his, self.bins):
            i = int(np.floor((d - lo) / (hi - lo) * b))
            idx.append(min(max(i, 0), b - 1))
        return tuple(idx)

    def to_dict(self):
        return {"los": list(self.los), "his": list(self.his), "bins": list(self.bins)}

    @classmethod
    def from_dict(cls, d):
        return cls(los=tuple(d["los"]), his=tuple(d["his"]), bins=tuple(d["bins"]))


@dataclass
class ArchiveEntry:
    genome: Genome
    fitness: float
    descriptor: tuple
    density: np.ndarray | None = None
    iteration: int = 0
    index: int = 0


@dataclass
class ArchiveMetrics:
    coverage: float
    best_fitness: float | None
    mean_fitness: float | None
    qd_score: float
    qd_offset: float | None


class Archive:
    def __init__(self, space):
        self.space = space
        self.cells = {}
        self.worst_admitted = None

    def try_insert(self, entry):
        """Insert per the strict-improvement rule; returns the outcome.

        Empty cell: inserted.  Strictly lower fitness than the incumbent:
        replaced.  Otherwise (ties included): discarded.
        """
        if not np.isfinite(entry.fitness):
            raise ValueError(f"fitness must be finite, got {entry.fitness}")
        cell = self.space.bin(entry.descriptor)
        incumbent = self.cells.get(cell)
        if incumbent is None:
            outcome = INSERTED
        elif entry.fitness < incumbent.fitness:
            outcome = REPLACED
        else:
            return DISCARDED
        self.cells[cell] = entry
        if self.worst_admitted is None or entry.fitness > self.worst_admitted:
            self.worst_admitted = float(entry.fitness)
        return outcome

    def occupied(self):
        """Entries in deterministic cell-index order."""
        return [self.cells[c] for c in sorted(self.cells)]

    def select_parents(self, rng, k):
        """k uniform draws (with replacement) over occupied cells; consumes a
        single vectorized integer draw of length k."""
        entries = self.occupied()
        if not entries:
            raise EmptyArchive("cannot select parents from an empty archive")
        picks = rng.integers(0, len(entries), size=k)
        return [entries[int(i)] for i in picks]

    def metrics(self):
        fits = [e.fitness for e in self.occupied()]
        if not fits:
            return ArchiveMetrics(0.0, None, None, 0.0, self.worst_admitted)
        offset = self.worst_admitted
        return ArchiveMetrics(
            coverage=len(fits) / self.space.n_cells,
            best_fitness=float(min(fits)),
            mean_fitness=float(np.mean(fits)),
            qd_score=float(sum(offset - f for f in fits)),
            qd_offset=offset,
        )

    def to_dict(self):
        """JSON-ready dump: space bounds plus per-cell genome, fitness,
        descriptor, and provenance (density fields are exported separately)."""
        cells = []
        for idx in sorted(self.cells):
            e = self.cells[idx]
            cells.append({
                "cell": list(idx),
                "fitness": e.fitness,
                "descriptor": list(e.descriptor),
                "genome": e.genome.to_flat(),
                "iteration": e.iteration,
                "index": e.index,
            })
        return {
            "space": self.space.to_dict(),
            "worst_admitted": self.worst_admitted,
            "cells": cells,
        }

    @classmethod
    def from_dict(cls, d):
        archive = cls(DescriptorSpace.from_dict(d["space"]))
        archive.worst_admitted = d["worst_admitted"]
        for c in d["cells"]:
            entry = ArchiveEntry(
                genome=Genome.from_flat(c["genome"]),
                fitness=float(c["fitness"]),
                descriptor=tuple(c["descriptor"]),
                density=None,
                iteration=int(c["iteration"]),
                index=int(c["index"]),
            )
            archive.cells[tuple(c["cell"])] = entry
        return archive

    def heatmap_rows(self):
        """Fitness grid for CSV export: rows over the first descriptor's bins,
        columns over the second's; empty cells are empty strings."""
        if self.space.n_dims != 2:
            raise ValueError("heatmap export needs a 2-D descriptor space")
        rows = []
        for i in range(self.space.bins[0]):
            row = []
            for j in range(self.space.bins[1]):
                e = self.cells.get((i, j))
                row.append(repr(e.fitness) if e is not None else "")
            rows.append(row)
        return rows
