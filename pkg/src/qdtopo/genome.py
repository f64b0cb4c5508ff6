"""Void-region genome: encoding, decoding, behavioral descriptors, variation.

A genome is a fixed-length list of rectangular void genes (x, y, l, w, a):
top-left corner in element coordinates, size in elements, and an activation
flag.  Rectangles reaching past the domain are clipped at decode time, never
rejected.  Descriptors are computed from the genome's active voids alone:

  * size entropy  H = -sum(p_i ln p_i) over normalized clipped areas (nats);
  * centroid dispersion = population standard deviation of all pairwise
    centroid distances (zero for fewer than three active voids).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class VoidGene(NamedTuple):
    x: int
    y: int
    l: int
    w: int
    a: int


@dataclass(frozen=True)
class GeneBounds:
    """Domain dimensions and void size limits for gene sampling and clamping."""

    nx: int
    ny: int
    l_max: int
    w_max: int

    def __post_init__(self):
        if min(self.nx, self.ny) < 1 or min(self.l_max, self.w_max) < 1:
            raise ValueError(f"degenerate gene bounds: {self}")


@dataclass(frozen=True)
class Genome:
    genes: tuple

    @property
    def n_max(self):
        return len(self.genes)

    def to_array(self):
        return np.array([tuple(g) for g in self.genes], dtype=np.int64)

    @classmethod
    def from_array(cls, arr):
        return cls(genes=tuple(VoidGene(*(int(v) for v in row)) for row in arr))

    def to_flat(self):
        """Concatenated [x1, y1, l1, w1, a1, x2, ...] integer encoding."""
        return [int(v) for gene in self.genes for v in gene]

    @classmethod
    def from_flat(cls, flat):
        if len(flat) % 5 != 0:
            raise ValueError(f"flat genome length {len(flat)} is not a multiple of 5")
        genes = tuple(VoidGene(*(int(v) for v in flat[i:i + 5]))
                      for i in range(0, len(flat), 5))
        return cls(genes=genes)


def random_genome(rng, bounds, n_max):
    """Uniform gene sampling; activation is Bernoulli(1/2).

    Consumes exactly five vectorized integer draws from rng, in the order
    x, y, l, w, a.
    """
    if n_max < 1:
        raise ValueError("need at least one void slot")
    x = rng.integers(0, bounds.nx, size=n_max)
    y = rng.integers(0, bounds.ny, size=n_max)
    l = rng.integers(1, bounds.l_max + 1, size=n_max)
    w = rng.integers(1, bounds.w_max + 1, size=n_max)
    a = rng.integers(0, 2, size=n_max)
    return Genome.from_array(np.column_stack([x, y, l, w, a]))


def clipped_rects(genome, nx, ny):
    """Active genes as (x0, x1, y0, y1) element ranges clipped to the domain,
    dropping any that clip to zero area."""
    rects = []
    for g in genome.genes:
        if not g.a:
            continue
        x0, y0 = max(0, g.x), max(0, g.y)
        x1, y1 = min(g.x + g.l, nx), min(g.y + g.w, ny)
        if x1 > x0 and y1 > y0:
            rects.append((x0, x1, y0, y1))
    return rects


def decode(genome, nx, ny):
    """Boolean forced-void element mask (flat, element id = ei*ny + ej)."""
    grid = np.zeros((nx, ny), dtype=bool)
    for x0, x1, y0, y1 in clipped_rects(genome, nx, ny):
        grid[x0:x1, y0:y1] = True
    return grid.ravel()


def entropy_descriptor(genome, bounds):
    """Shannon entropy of the normalized clipped void areas, in nats.

    Areas are sorted before reduction so the value is exactly invariant to
    gene order."""
    areas = sorted((x1 - x0) * (y1 - y0)
                   for x0, x1, y0, y1 in clipped_rects(genome, bounds.nx, bounds.ny))
    if len(areas) <= 1:
        return 0.0
    total = float(sum(areas))
    return float(-sum((a / total) * math.log(a / total) for a in areas))


def dispersion_descriptor(genome, bounds, statistic="std"):
    """Spread of pairwise void-centroid distances, exactly invariant to gene
    order (the distance multiset is sorted).

    statistic "std" (default) is the population standard deviation; "mean"
    averages the distances instead.  Fewer than three active voids leave no
    measurable spread and map to zero.
    """
    if statistic not in ("std", "mean"):
        raise ValueError(f"unknown dispersion statistic {statistic!r}")
    rects = clipped_rects(genome, bounds.nx, bounds.ny)
    if len(rects) < 3:
        return 0.0
    centroids = np.array([((x0 + x1) / 2.0, (y0 + y1) / 2.0)
                          for x0, x1, y0, y1 in rects])
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    iu = np.triu_indices(len(rects), k=1)
    reduce = np.std if statistic == "std" else np.mean
    return float(reduce(np.sort(dist[iu])))


def descriptor(genome, bounds, dispersion_statistic="std"):
    return (entropy_descriptor(genome, bounds),
            dispersion_descriptor(genome, bounds, dispersion_statistic))


@dataclass(frozen=True)
class VariationParams:
    p_mut: float = 0.3
    p_flip: float = 0.1
    sigma_frac: float = 0.1
    crossover_prob: float = 0.5
    ensure_change: bool = True


def _field_ranges(bounds):
    lo = np.array([0, 0, 1, 1], dtype=np.int64)
    hi = np.array([bounds.nx - 1, bounds.ny - 1, bounds.l_max, bounds.w_max],
                  dtype=np.int64)
    return lo, hi


def mutate(genome, rng, bounds, params=VariationParams()):
    """Gaussian integer jitter on position/size fields, Bernoulli activation
    flips, clamped to bounds.

    Each of the four coordinate fields is perturbed with probability p_mut by
    a step drawn from N(0, (sigma_frac * field range)^2) rounded to the
    nearest integer; each activation bit flips with probability p_flip.  When
    ensure_change is set the whole draw is repeated until the genome actually
    changed (skipped when p_mut = p_flip = 0, which cannot change anything).
    """
    arr = genome.to_array()
    n = arr.shape[0]
    lo, hi = _field_ranges(bounds)
    sigma = params.sigma_frac * (hi - lo).astype(np.float64)
    can_change = params.p_mut > 0 or params.p_flip > 0
    for _ in range(10_000):
        out = arr.copy()
        pick = rng.random((n, 4)) < params.p_mut
        steps = np.rint(rng.normal(0.0, 1.0, size=(n, 4)) * sigma).astype(np.int64)
        coords = np.clip(arr[:, :4] + np.where(pick, steps, 0), lo, hi)
        out[:, :4] = coords
        flips = rng.random(n) < params.p_flip
        out[:, 4] = np.where(flips, 1 - arr[:, 4], arr[:, 4])
        if not params.ensure_change or not can_change or not np.array_equal(out, arr):
            return Genome.from_array(out)
    raise RuntimeError("mutation failed to produce a change after 10000 draws")


def crossover(parent_a, parent_b, rng):
    """Uniform crossover at whole-gene granularity (one coin per gene slot,
    heads takes parent_a's gene)."""
    if parent_a.n_max != parent_b.n_max:
        raise ValueError("parents must have the same number of gene slots")
    coins = rng.random(parent_a.n_max) < 0.5
    genes = tuple(a if c else b
                  for a, b, c in zip(parent_a.genes, parent_b.genes, coins))
    return Genome(genes=genes)
