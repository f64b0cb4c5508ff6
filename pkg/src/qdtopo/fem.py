"""Plane-stress finite elements on a regular grid of unit square bilinear quads.

Conventions (shared by the whole package):

  * Nodes are numbered column-major: node(col i, row j) = i*(ny+1) + j, with
    the row index increasing downward; DOFs are (2n, 2n+1) = (horizontal,
    vertical) displacement of node n.
  * Elements are numbered e = ei*ny + ej; element DOFs are ordered
    (top-left, top-right, bottom-right, bottom-left) node pairs.
  * A positive value on a vertical DOF points toward larger row indices.

The closed-form element matrix below is the exact integral of B^T D B over
the unit square (2x2 Gauss quadrature reproduces it to machine precision).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergence, SingularSystem


@dataclass(frozen=True)
class Mesh2D:
    """Regular nx-by-ny grid of unit square elements."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"mesh must have at least one element per side, got {self.nx}x{self.ny}")

    @property
    def n_elems(self):
        return self.nx * self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_dofs(self):
        return 2 * self.n_nodes

    def node(self, col, row):
        return col * (self.ny + 1) + row

    def edof(self):
        return _edof_matrix(self.nx, self.ny)


@lru_cache(maxsize=32)
def _edof_matrix(nx, ny):
    ei, ej = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    n1 = (ei * (ny + 1) + ej).ravel()
    n2 = ((ei + 1) * (ny + 1) + ej).ravel()
    edof = np.column_stack([
        2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1,
        2 * n2 + 2, 2 * n2 + 3, 2 * n1 + 2, 2 * n1 + 3,
    ])
    return np.ascontiguousarray(edof, dtype=np.int64)


@lru_cache(maxsize=32)
def _scatter_indices(nx, ny):
    edof = _edof_matrix(nx, ny)
    ik = np.repeat(edof, 8, axis=1).ravel()
    jk = np.tile(edof, (1, 8)).ravel()
    return ik, jk


@dataclass(frozen=True)
class LoadCase:
    """Point loads, supports, and the optional mechanism output port.

    loads maps DOF -> force; springs maps DOF -> stiffness added to the
    diagonal (mechanism input/output ports).  A DOF may not be both loaded
    and fixed.
    """

    loads: dict
    fixed_dofs: frozenset
    output_dof: int | None = None
    springs: dict = field(default_factory=dict)

    def __post_init__(self):
        fixed = frozenset(int(d) for d in self.fixed_dofs)
        object.__setattr__(self, "fixed_dofs", fixed)
        if not fixed:
            raise ValueError("at least one DOF must be fixed")
        overlap = set(self.loads) & fixed
        if overlap:
            raise ValueError(f"DOFs {sorted(overlap)} are both loaded and fixed")
        if self.output_dof is not None and int(self.output_dof) in fixed:
            raise ValueError(f"output DOF {self.output_dof} is fixed")

    def force_vector(self, n_dofs):
        f = np.zeros(n_dofs)
        for dof, val in self.loads.items():
            f[int(dof)] = val
        return f


def element_stiffness(young_modulus=1.0, poisson_ratio=0.3):
    """Unit-square Q4 plane-stress stiffness matrix (exact closed form)."""
    if young_modulus <= 0:
        raise ValueError(f"Young's modulus must be positive, got {young_modulus}")
    if not 0 <= poisson_ratio < 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {poisson_ratio}")
    nu = poisson_ratio
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ])
    idx = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return young_modulus / (1 - nu ** 2) * k[idx]


def assemble_scaled(mesh, young, poisson_ratio=0.3, ke=None):
    """Global stiffness from a per-element Young's modulus vector."""
    young = np.asarray(young, dtype=np.float64)
    if young.shape != (mesh.n_elems,):
        raise ValueError(f"expected {mesh.n_elems} element moduli, got shape {young.shape}")
    if ke is None:
        ke = element_stiffness(1.0, poisson_ratio)
    ik, jk = _scatter_indices(mesh.nx, mesh.ny)
    vals = (young[:, None] * ke.ravel()[None, :]).ravel()
    n = mesh.n_dofs
    return sp.coo_matrix((vals, (ik, jk)), shape=(n, n)).tocsc()


def assemble(mesh, densities, penal=3.0, e_min=1e-9, e0=1.0, poisson_ratio=0.3):
    """Global stiffness under the modified power-law interpolation
    E(rho) = e_min + rho^penal * (e0 - e_min)."""
    rho = np.asarray(densities, dtype=np.float64)
    if rho.shape != (mesh.n_elems,):
        raise ValueError(f"expected {mesh.n_elems} densities, got shape {rho.shape}")
    if rho.min() < 0 or rho.max() > 1:
        raise ValueError("densities must lie in [0, 1]")
    if penal < 1:
        raise ValueError(f"penalization must be >= 1, got {penal}")
    if not 0 < e_min < e0:
        raise ValueError(f"need 0 < e_min < e0, got e_min={e_min}, e0={e0}")
    young = e_min + rho ** penal * (e0 - e_min)
    return assemble_scaled(mesh, young, poisson_ratio)


@dataclass(frozen=True)
class SolverSettings:
    """Linear solver configuration.  The contract is the residual tolerance,
    not the algorithm: ``direct`` (sparse LU) is the default; ``cg`` is a
    Jacobi-preconditioned conjugate gradient capped at cg_cap_factor
    iterations per DOF; ``dense`` is for tiny meshes."""

    method: str = "direct"
    tolerance: float = 1e-8
    cg_cap_factor: float = 10.0

    def __post_init__(self):
        if self.method not in ("direct", "cg", "dense"):
            raise ValueError(f"unknown solver method {self.method!r}")


def free_dofs(n_dofs, fixed):
    fixed = np.fromiter(fixed, dtype=np.int64)
    fixed.sort()
    return np.setdiff1d(np.arange(n_dofs), fixed, assume_unique=True)


class ReducedSystemBuilder:
    """Precomputed scatter pattern for repeated assembly of the reduced
    (free-DOF) stiffness matrix.

    The sparsity pattern is fixed across density updates, so the per-call cost
    is one value gather plus a bincount into preallocated CSC storage.  Port
    springs from the load case are appended as constant diagonal entries.
    """

    def __init__(self, mesh, load_case):
        ik, jk = _scatter_indices(mesh.nx, mesh.ny)
        n = mesh.n_dofs
        self.n_dofs = n
        self.free = free_dofs(n, load_case.fixed_dofs)
        dof_map = np.full(n, -1, dtype=np.int64)
        dof_map[self.free] = np.arange(len(self.free))
        ri, ci = dof_map[ik], dof_map[jk]
        self.keep = (ri >= 0) & (ci >= 0)
        rows, cols = ri[self.keep], ci[self.keep]
        spring_dofs = sorted(int(d) for d in load_case.springs)
        spring_idx = dof_map[np.array(spring_dofs, dtype=np.int64)] if spring_dofs else np.empty(0, np.int64)
        if np.any(spring_idx < 0):
            raise ValueError("spring on a fixed DOF")
        self.spring_vals = np.array([load_case.springs[d] for d in spring_dofs])
        rows = np.concatenate([rows, spring_idx])
        cols = np.concatenate([cols, spring_idx])
        order = np.lexsort((rows, cols))
        sr, sc = rows[order], cols[order]
        fresh = np.empty(len(order), dtype=bool)
        fresh[0] = True
        fresh[1:] = (sr[1:] != sr[:-1]) | (sc[1:] != sc[:-1])
        slot_sorted = np.cumsum(fresh) - 1
        self.slots = np.empty(len(order), dtype=np.int64)
        self.slots[order] = slot_sorted
        self.nnz = int(slot_sorted[-1]) + 1
        self.indices = sr[fresh].astype(np.int32)
        counts = np.bincount(sc[fresh], minlength=len(self.free))
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

    def assemble(self, young, ke):
        vals = (young[:, None] * ke.ravel()[None, :]).ravel()[self.keep]
        if len(self.spring_vals):
            vals = np.concatenate([vals, self.spring_vals])
        data = np.bincount(self.slots, weights=vals, minlength=self.nnz)
        nf = len(self.free)
        return sp.csc_matrix((data, self.indices, self.indptr), shape=(nf, nf))


class FactorizedSystem:
    """A reduced stiffness system prepared for one or more right-hand sides.

    Applies port springs to the diagonal, eliminates fixed DOFs, and (for the
    direct method) factorizes once so that state and adjoint solves share the
    factorization.
    """

    def __init__(self, K, load_case, settings=SolverSettings()):
        if load_case.springs:
            dofs = np.fromiter((int(d) for d in load_case.springs), dtype=np.int64)
            vals = np.fromiter(load_case.springs.values(), dtype=np.float64)
            K = K + sp.coo_matrix((vals, (dofs, dofs)), shape=K.shape).tocsc()
        free = free_dofs(K.shape[0], load_case.fixed_dofs)
        self._setup(K[free, :][:, free].tocsc(), free, K.shape[0], settings)

    @classmethod
    def from_reduced(cls, K_ff, free, n_dofs, settings=SolverSettings()):
        """Wrap an already-reduced stiffness (see ReducedSystemBuilder)."""
        self = cls.__new__(cls)
        self._setup(K_ff, free, n_dofs, settings)
        return self

    def _setup(self, K_ff, free, n_dofs, settings):
        self.settings = settings
        self.n_dofs = n_dofs
        self.free = free
        self.K_ff = K_ff
        self._lu = None
        if settings.method == "direct":
            try:
                self._lu = spla.splu(self.K_ff, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise SingularSystem(f"stiffness factorization failed: {exc}") from exc

    def solve(self, f):
        """Solve for a full-length force vector; returns a full-length
        displacement vector with fixed DOFs at exactly zero."""
        f = np.asarray(f, dtype=np.float64)
        f_f = f[self.free]
        method = self.settings.method
        if method == "direct":
            u_f = self._refine(self._lu.solve, f_f)
        elif method == "dense":
            try:
                dense = self.K_ff.toarray()
                u_f = self._refine(lambda rhs: np.linalg.solve(dense, rhs), f_f)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from exc
        else:
            diag = self.K_ff.diagonal()
            if np.any(diag <= 0):
                raise SingularSystem("non-positive diagonal entry in reduced stiffness")
            M = spla.LinearOperator(self.K_ff.shape, matvec=lambda v: v / diag)
            atol = self.settings.tolerance * max(1.0, float(np.linalg.norm(f_f)))
            cap = max(1, int(self.settings.cg_cap_factor * len(f_f)))
            u_f, info = spla.cg(self.K_ff, f_f, rtol=0.0, atol=atol,
                                maxiter=cap, M=M)
            if info > 0:
                raise NonConvergence(f"cg hit the iteration cap ({info} iterations)")
            if info < 0:
                raise SingularSystem(f"cg failed with status {info}")
        if not np.all(np.isfinite(u_f)):
            raise SingularSystem("solver produced non-finite displacements")
        res = np.linalg.norm(self.K_ff @ u_f - f_f) / max(1.0, np.linalg.norm(f_f))
        if res > self.settings.tolerance:
            raise SingularSystem(f"residual {res:.3e} exceeds tolerance")
        u = np.zeros(self.n_dofs)
        u[self.free] = u_f
        return u

    def _refine(self, apply_inverse, f_f):
        """Iterative refinement: strongly penalized void regions make the
        system ill-conditioned enough that one factored solve can miss the
        residual tolerance; a few correction passes restore it."""
        u_f = apply_inverse(f_f)
        scale = max(1.0, float(np.linalg.norm(f_f)))
        for _ in range(3):
            if not np.all(np.isfinite(u_f)):
                break
            r = f_f - self.K_ff @ u_f
            if np.linalg.norm(r) <= self.settings.tolerance * scale:
                break
            u_f = u_f + apply_inverse(r)
        return u_f


def solve(K, load_case, settings=SolverSettings()):
    """Displacement field for a load case; fixed DOFs are exactly zero."""
    system = FactorizedSystem(K, load_case, settings)
    return system.solve(load_case.force_vector(K.shape[0]))


def adjoint_solve(K, load_case, settings=SolverSettings()):
    """Adjoint field lam with K lam = -L, L the unit selector of the output DOF."""
    if load_case.output_dof is None:
        raise ValueError("load case has no output DOF")
    system = FactorizedSystem(K, load_case, settings)
    rhs = np.zeros(K.shape[0])
    rhs[int(load_case.output_dof)] = -1.0
    return system.solve(rhs)


def compliance(u, densities, mesh, penal=3.0, e_min=1e-9, e0=1.0, poisson_ratio=0.3):
    """Compliance u^T K u and the per-element strain energies E(rho_e) ce_e."""
    from . import kernels

    rho = np.asarray(densities, dtype=np.float64)
    ke = element_stiffness(1.0, poisson_ratio)
    ce = kernels.pair_energies(u, u, mesh.edof(), ke)
    energies = (e_min + rho ** penal * (e0 - e_min)) * ce
    return float(np.sum(energies)), energies
