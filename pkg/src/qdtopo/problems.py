"""Benchmark problem definitions: half-MBB beam and bending gripper finger.

Both constructors are pure and deterministic.  Geometry follows the package
grid conventions (column-major nodes, row index increasing downward); see
fem.py.
"""

from dataclasses import dataclass, replace

import numpy as np

from .fem import LoadCase, Mesh2D
from .simp import FORCED_VOID, SimpParams


@dataclass(frozen=True)
class ProblemSpec:
    """A fully specified optimization problem.

    objective: "compliance" minimizes f^T u; "mechanism" minimizes
    output_weight * u[output_dof] with port springs on the diagonal.
    passive_mask: problem-intrinsic passive elements (int8; never designable),
    independent of any genome-supplied voids.
    """

    name: str
    mesh: Mesh2D
    load_case: LoadCase
    objective: str
    volfrac: float
    simp: SimpParams
    passive_mask: np.ndarray | None = None
    output_weight: float = 1.0

    def __post_init__(self):
        if self.objective not in ("compliance", "mechanism"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if not 0 < self.volfrac < 1:
            raise ValueError(f"volume fraction must lie in (0, 1), got {self.volfrac}")
        if self.objective == "mechanism" and self.load_case.output_dof is None:
            raise ValueError("mechanism problems need an output DOF")
        for dof in list(self.load_case.loads) + sorted(self.load_case.fixed_dofs):
            if not 0 <= int(dof) < self.mesh.n_dofs:
                raise ValueError(f"DOF {dof} outside the mesh")
        if self.passive_mask is not None:
            self._check_passive_clear_of_ports()

    def _check_passive_clear_of_ports(self):
        mesh = self.mesh
        lc = self.load_case
        nodes = set(int(d) // 2 for d in lc.loads)
        nodes |= set(int(d) // 2 for d in lc.fixed_dofs)
        nodes |= set(int(d) // 2 for d in lc.springs)
        if lc.output_dof is not None:
            nodes.add(int(lc.output_dof) // 2)
        for n in nodes:
            i, j = divmod(n, mesh.ny + 1)
            for ci in (i - 1, i):
                for cj in (j - 1, j):
                    if 0 <= ci < mesh.nx and 0 <= cj < mesh.ny:
                        if self.passive_mask[ci * mesh.ny + cj] != 0:
                            raise ValueError(
                                "intrinsic passive region touches a load/support "
                                f"node at element ({ci}, {cj})")


def default_rmin(nx):
    """Filter radius scaled with the mesh: nx/50 elements, at least 1.5."""
    return max(1.5, nx / 50.0)


def mbb_problem(nx=200, ny=100, volfrac=0.5, simp=None):
    """Half MBB beam: unit load on the vertical DOF of the top-left node,
    symmetry (horizontal DOFs fixed) along the left edge, vertical DOF pinned
    at the bottom-right corner node."""
    if nx < 4 or ny < 4:
        raise ValueError("MBB mesh must be at least 4x4")
    mesh = Mesh2D(nx, ny)
    fixed = frozenset(2 * mesh.node(0, j) for j in range(ny + 1)) | {mesh.n_dofs - 1}
    lc = LoadCase(loads={1: -1.0}, fixed_dofs=fixed)
    params = simp if simp is not None else SimpParams(rmin=default_rmin(nx))
    return ProblemSpec(name="mbb", mesh=mesh, load_case=lc,
                       objective="compliance", volfrac=volfrac, simp=params)


def gripper_problem(nx=150, ny=70, volfrac=0.3, k_in=0.1, k_out=0.1,
                    load=1.0, clamp_frac=0.25, void_rect=(0.3, 0.8, 0.4, 0.2),
                    simp=None):
    """Bending finger: a horizontal force pressed into the top-right corner
    must sweep the free bottom-left tip toward the bottom edge (the closing
    direction), with input/output port springs.

    The upper portion (clamp_frac) of the left edge is clamped; an intrinsic
    forced-void strip (void_rect, in domain fractions x0/y0/width/height)
    keeps the closing path along the bottom edge clear.
    """
    if nx < 10 or ny < 10:
        raise ValueError("gripper mesh must be at least 10x10")
    mesh = Mesh2D(nx, ny)
    in_dof = 2 * mesh.node(nx, 0)
    out_dof = 2 * mesh.node(0, ny) + 1
    n_clamp = max(2, int(round(clamp_frac * ny)))
    fixed = frozenset(d for j in range(n_clamp + 1)
                      for d in (2 * mesh.node(0, j), 2 * mesh.node(0, j) + 1))
    lc = LoadCase(loads={in_dof: -load}, fixed_dofs=fixed, output_dof=out_dof,
                  springs={in_dof: k_in, out_dof: k_out})

    mask = np.zeros(mesh.n_elems, dtype=np.int8)
    fx, fy, fw, fh = void_rect
    x0, x1 = int(round(fx * nx)), int(round((fx + fw) * nx))
    y0, y1 = int(round(fy * ny)), int(round((fy + fh) * ny))
    grid = mask.reshape(nx, ny)
    grid[x0:x1, y0:y1] = FORCED_VOID

    params = simp if simp is not None else SimpParams(rmin=default_rmin(nx))
    # output_weight -1: minimizing -u_out rewards tip motion toward larger
    # row indices, i.e. toward the cleared bottom edge.
    return ProblemSpec(name="gripper", mesh=mesh, load_case=lc,
                       objective="mechanism", volfrac=volfrac, simp=params,
                       passive_mask=mask, output_weight=-1.0)


PROBLEMS = {"mbb": mbb_problem, "gripper": gripper_problem}


def build_problem(name, simp=None, **overrides):
    """Problem registry lookup with keyword overrides."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; available: {sorted(PROBLEMS)}") from None
    return factory(simp=simp, **overrides)


def with_simp(problem, **simp_overrides):
    """Copy of the problem with selected SIMP parameters replaced."""
    return replace(problem, simp=replace(problem.simp, **simp_overrides))
