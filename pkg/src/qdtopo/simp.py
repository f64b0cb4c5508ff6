"""Density-based topology optimization inner loop (SIMP with optimality criteria).

One call to :func:`run_simp` performs the full pipeline for a fixed design
domain: FE solve, sensitivity analysis, mesh-independence filtering, and the
bisected optimality-criteria volume update, honoring passive element masks.

Two stiffness interpolations are supported:

  * ``modified`` (default): E(rho) = e_min + rho^p (e0 - e_min), densities in
    [0, 1], forced voids pinned at rho = 0.
  * ``classic``: E(rho) = e0 rho^p with densities clamped to [rho_floor, 1],
    the convention of the published educational optimizers; forced voids are
    pinned at the floor, which carries the same stiffness as e_min above.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import BisectionFailure, InvalidDesign, NonConvergence, SingularSystem
from .fem import (FactorizedSystem, ReducedSystemBuilder, SolverSettings,
                  element_stiffness)

DESIGNABLE = 0
FORCED_VOID = 1
FORCED_SOLID = 2


@dataclass
class DensityField:
    """Per-element densities plus the passive mask that produced them."""

    rho: np.ndarray
    passive_mask: np.ndarray

    @property
    def volume(self):
        return float(np.mean(self.rho))


@dataclass(frozen=True)
class OcSettings:
    """Bisection control for the optimality-criteria multiplier.

    The defaults converge the multiplier essentially to machine precision and
    then require the volume target to be met within ``volume_tol``.  Setting
    ``interval_atol`` with ``interval_rtol = 0`` reproduces the loose,
    absolute-interval stopping rule of the classic educational codes.
    """

    lambda_hi: float = 1e9
    interval_rtol: float = 1e-13
    interval_atol: float = 0.0
    max_iters: int = 256
    volume_tol: float = 1e-4
    enforce_volume: bool = True
    gradient_floor: float = 1e-10


# Mirrors the published OC bisection: lambda in [0, 1e5], stop when the
# interval is narrower than 1e-4, no volume postcondition.
CLASSIC_OC = OcSettings(lambda_hi=1e5, interval_rtol=0.0, interval_atol=1e-4,
                        max_iters=100_000, enforce_volume=False)


@dataclass(frozen=True)
class SimpParams:
    penal: float = 3.0
    rmin: float = 1.5
    move: float = 0.2
    inner_iters: int = 50
    conv_tol: float = 0.01
    interpolation: str = "modified"
    e0: float = 1.0
    e_min_ratio: float = 1e-9
    rho_floor: float = 1e-3
    nu: float = 0.3
    filter_gamma: float = 1e-3
    void_mode: str = "pinned"
    oc: OcSettings = field(default_factory=OcSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    random_init: bool = False
    init_halfwidth: float = 0.1

    def __post_init__(self):
        if self.interpolation not in ("modified", "classic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.void_mode not in ("pinned", "initial_only"):
            raise ValueError(f"unknown void_mode {self.void_mode!r}")
        if self.penal < 1:
            raise ValueError("penalization must be >= 1")
        if not 0 < self.move <= 1:
            raise ValueError("move limit must lie in (0, 1]")
        if self.rmin < 1:
            raise ValueError("filter radius must be at least one element")

    @property
    def e_min(self):
        return self.e_min_ratio * self.e0


@dataclass
class SimpResult:
    objective: float
    density: DensityField
    objective_history: np.ndarray
    volume_history: np.ndarray
    change_history: np.ndarray
    converged: bool

    @property
    def n_iters(self):
        return len(self.objective_history)


def stiffness_scale(rho, params):
    """Per-element Young's modulus under the configured interpolation."""
    if params.interpolation == "modified":
        return params.e_min + rho ** params.penal * (params.e0 - params.e_min)
    return params.e0 * rho ** params.penal


def _stiffness_gradient_factor(rho, params):
    """d E / d rho per element."""
    if params.interpolation == "modified":
        return params.penal * rho ** (params.penal - 1) * (params.e0 - params.e_min)
    return params.penal * rho ** (params.penal - 1) * params.e0


def sensitivity_compliance(u, rho, mesh, params):
    """Gradient of compliance w.r.t. densities; every entry is <= 0."""
    ke = element_stiffness(1.0, params.nu)
    ce = kernels.pair_energies(u, u, mesh.edof(), ke)
    return -_stiffness_gradient_factor(rho, params) * ce


def sensitivity_mechanism(u, lam, rho, mesh, params, weight=1.0):
    """Gradient of weight * u[output] via the adjoint field; sign unrestricted."""
    ke = element_stiffness(1.0, params.nu)
    cross = kernels.pair_energies(lam, u, mesh.edof(), ke)
    return weight * _stiffness_gradient_factor(rho, params) * cross


def filter_sensitivities(rho, gradient, mesh, rmin, gamma=1e-3):
    """Density-weighted cone filter; rmin in element widths."""
    if rmin < 1:
        raise ValueError("filter radius must be at least one element")
    return kernels.filter_apply(rho, gradient, mesh.nx, mesh.ny, rmin, gamma)


def oc_update(rho, gradient, volfrac, move, designable, lo=0.0, hi=1.0,
              settings=OcSettings()):
    """One optimality-criteria density update under the volume constraint.

    Finds the Lagrange multiplier by bisection so that the mean density over
    all elements (passive included) hits volfrac, then returns the move-limited
    clamped update.  Passive elements pass through untouched.
    """
    n = rho.shape[0]
    target = volfrac * n
    bnum = np.maximum(-gradient, settings.gradient_floor)
    l1, l2 = 0.0, settings.lambda_hi
    xnew = rho
    it = 0
    while (l2 - l1) > max(settings.interval_atol,
                          settings.interval_rtol * (l1 + l2)) and it < settings.max_iters:
        lmid = 0.5 * (l2 + l1)
        xnew = kernels.oc_candidate(rho, bnum, lmid, move, lo, hi, designable)
        if np.sum(xnew) - target > 0:
            l1 = lmid
        else:
            l2 = lmid
        it += 1
    if settings.enforce_volume and abs(np.mean(xnew) - volfrac) > settings.volume_tol:
        raise BisectionFailure(
            f"volume target {volfrac} unreachable (achieved mean {np.mean(xnew):.6f})"
        )
    return xnew


def merge_masks(mesh, intrinsic, extra):
    """Combine a problem's intrinsic passive mask with caller-supplied
    passives: either a boolean array of genome-decoded voids or a full
    tri-state mask.  Voids union; intrinsic assignments take precedence.
    Returns an int8 mask over elements."""
    mask = np.zeros(mesh.n_elems, dtype=np.int8) if intrinsic is None else intrinsic.astype(np.int8).copy()
    if extra is not None:
        extra = np.asarray(extra)
        if extra.shape != (mesh.n_elems,):
            raise ValueError(f"passive mask shape {extra.shape} does not match mesh")
        voids = extra if extra.dtype == bool else extra == FORCED_VOID
        mask[voids & (mask != FORCED_SOLID)] = FORCED_VOID
        if extra.dtype != bool:
            mask[(extra == FORCED_SOLID) & (mask == DESIGNABLE)] = FORCED_SOLID
    return mask


def _node_buried_in_voids(mesh, node, void):
    """True when every element adjacent to the node is forced void."""
    i, j = divmod(int(node), mesh.ny + 1)
    cells = [
        (ci, cj)
        for ci in (i - 1, i)
        for cj in (j - 1, j)
        if 0 <= ci < mesh.nx and 0 <= cj < mesh.ny
    ]
    return all(void[ci * mesh.ny + cj] for ci, cj in cells)


def validate_design(problem, mask, volfrac):
    """Raise InvalidDesign when the masked domain cannot be evaluated."""
    mesh = problem.mesh
    void = mask == FORCED_VOID
    solid = mask == FORCED_SOLID
    n = mesh.n_elems
    if not np.any(mask == DESIGNABLE):
        raise InvalidDesign("no designable elements remain")
    if void.sum() >= (1.0 - volfrac) * n:
        raise InvalidDesign(
            f"forced voids cover {void.sum() / n:.3f} of the domain; "
            f"volume fraction {volfrac} is unreachable"
        )
    if solid.sum() > volfrac * n + 1e-9 * n:
        raise InvalidDesign("forced solids already exceed the volume budget")
    lc = problem.load_case
    ports = set(int(d) for d in lc.loads) | set(int(d) for d in lc.springs)
    if lc.output_dof is not None:
        ports.add(int(lc.output_dof))
    for dof in sorted(ports):
        if _node_buried_in_voids(mesh, dof // 2, void):
            raise InvalidDesign(f"load/output DOF {dof} is buried inside forced voids")
    for dof in sorted(lc.fixed_dofs):
        if _node_buried_in_voids(mesh, dof // 2, void):
            raise InvalidDesign(f"support DOF {dof} is buried inside forced voids")


def _initial_density(mask, volfrac, params, rng):
    rho = np.empty(mask.shape[0])
    designable = mask == DESIGNABLE
    lo = params.rho_floor if params.interpolation == "classic" else 0.0
    if params.random_init:
        if rng is None:
            raise ValueError("random_init requires an rng")
        width = params.init_halfwidth
        draw = rng.uniform(volfrac - width, volfrac + width, size=int(designable.sum()))
        rho[designable] = draw
    else:
        rho[designable] = volfrac
    rho[mask == FORCED_VOID] = lo
    rho[mask == FORCED_SOLID] = 1.0
    if params.random_init:
        # Rescale the designable block so the whole-domain mean hits volfrac.
        for _ in range(4):
            current = rho[designable].sum()
            want = volfrac * mask.shape[0] - rho[mask == FORCED_SOLID].sum() - rho[mask == FORCED_VOID].sum()
            if current > 0:
                rho[designable] = np.clip(rho[designable] * (want / current), lo, 1.0)
    return rho


def run_simp(problem, passive_mask=None, params=None, rng=None,
             check_invariants=False):
    """Run the inner-loop optimizer on the problem's domain.

    passive_mask: optional per-element passives beyond the problem's intrinsic
    regions; a boolean array marks genome-decoded voids, an int8 array may
    also force solids.  Raises InvalidDesign when the masked domain cannot be
    evaluated (buried load or support, unreachable volume target, failed
    solve).

    Deterministic: identical inputs produce a bit-identical result under a
    fixed kernel backend.
    """
    params = params if params is not None else problem.simp
    mesh = problem.mesh
    lc = problem.load_case
    volfrac = problem.volfrac

    pin_genome = params.void_mode == "pinned"
    mask = merge_masks(mesh, problem.passive_mask,
                       passive_mask if pin_genome else None)
    init_mask = mask if pin_genome else merge_masks(mesh, problem.passive_mask, passive_mask)
    validate_design(problem, mask, volfrac)

    designable = mask == DESIGNABLE
    lo = params.rho_floor if params.interpolation == "classic" else 0.0
    rho = _initial_density(init_mask, volfrac, params, rng)
    if not pin_genome:
        # Seeded (non-pinned) voids start at the density floor, not exact
        # zero: the multiplicative OC update cannot regrow a zero density.
        seeded = (init_mask == FORCED_VOID) & designable
        rho[seeded] = max(lo, params.rho_floor)

    ke = element_stiffness(1.0, params.nu)
    edof = mesh.edof()
    f = lc.force_vector(mesh.n_dofs)
    builder = ReducedSystemBuilder(mesh, lc)
    grad_factor = _stiffness_gradient_factor  # local alias
    mechanism = problem.objective == "mechanism"

    def evaluate(rho_now):
        young = stiffness_scale(rho_now, params)
        K_ff = builder.assemble(young, ke)
        try:
            system = FactorizedSystem.from_reduced(K_ff, builder.free,
                                                   mesh.n_dofs, params.solver)
            u = system.solve(f)
            lam = None
            if mechanism:
                rhs = np.zeros(mesh.n_dofs)
                rhs[int(lc.output_dof)] = -1.0
                lam = system.solve(rhs)
        except (SingularSystem, NonConvergence) as exc:
            raise InvalidDesign(f"FE solve failed: {exc}") from exc
        ce = kernels.pair_energies(u, u, edof, ke)
        if mechanism:
            objective = problem.output_weight * u[int(lc.output_dof)]
        else:
            objective = float(np.sum(young * ce))
            if check_invariants:
                work = float(f @ u)
                if abs(objective - work) > 1e-6 * max(1.0, work):
                    raise AssertionError(
                        f"energy identity violated: uKu={objective!r} fu={work!r}")
        return objective, u, lam, ce

    objectives, volumes, changes = [], [], []
    converged = False
    for _ in range(params.inner_iters):
        objective, u, lam, ce = evaluate(rho)
        if mechanism:
            cross = kernels.pair_energies(lam, u, edof, ke)
            g = problem.output_weight * grad_factor(rho, params) * cross
        else:
            g = -grad_factor(rho, params) * ce
        g = kernels.filter_apply(rho, g, mesh.nx, mesh.ny, params.rmin,
                                 params.filter_gamma)
        try:
            rho_new = oc_update(rho, g, volfrac, params.move, designable,
                                lo=lo, hi=1.0, settings=params.oc)
        except BisectionFailure as exc:
            raise InvalidDesign(str(exc)) from exc
        change = float(np.max(np.abs(rho_new - rho)))
        if check_invariants:
            assert rho_new.min() >= 0.0 and rho_new.max() <= 1.0
            assert np.array_equal(rho_new[~designable], rho[~designable])
            if params.oc.enforce_volume:
                assert abs(np.mean(rho_new) - volfrac) <= params.oc.volume_tol
        objectives.append(objective)
        volumes.append(float(np.mean(rho_new)))
        changes.append(change)
        rho = rho_new
        if params.conv_tol > 0 and change < params.conv_tol:
            converged = True
            break

    final_objective, _, _, _ = evaluate(rho)
    return SimpResult(
        objective=float(final_objective),
        density=DensityField(rho=rho, passive_mask=mask),
        objective_history=np.array(objectives),
        volume_history=np.array(volumes),
        change_history=np.array(changes),
        converged=converged,
    )


def classic_params(**overrides):
    """SimpParams preset reproducing the published educational optimizer:
    power-law interpolation, 1e-3 density floor, loose absolute OC bisection."""
    base = SimpParams(interpolation="classic", conv_tol=0.0, oc=CLASSIC_OC)
    return replace(base, **overrides) if overrides else base
