"""Shared builders for objective evaluation and toy problems used by the
unit and acceptance suites."""

import numpy as np

from qdtopo.fem import LoadCase, Mesh2D, assemble_scaled, compliance, solve
from qdtopo.problems import ProblemSpec
from qdtopo.simp import SimpParams, stiffness_scale


def varied_rho(n, lo=0.25, hi=0.85):
    """Deterministic non-uniform density field strictly inside (0, 1)."""
    return lo + (hi - lo) * ((np.arange(n) * 7919) % 101) / 100.0


def compliance_objective(problem, rho):
    """Objective and displacement by the public single-solve route."""
    params = problem.simp
    K = assemble_scaled(problem.mesh, stiffness_scale(rho, params), params.nu)
    u = solve(K, problem.load_case)
    c, _ = compliance(u, rho, problem.mesh, penal=params.penal,
                      e_min=params.e_min, e0=params.e0, poisson_ratio=params.nu)
    return c, u


def mechanism_objective(problem, rho):
    params = problem.simp
    K = assemble_scaled(problem.mesh, stiffness_scale(rho, params), params.nu)
    u = solve(K, problem.load_case, params.solver)
    return problem.output_weight * u[problem.load_case.output_dof], u, K


def mechanism_toy(nx=8, ny=4):
    """Small mechanism problem: clamped left edge, input force pulls the
    top-right corner, output is the bottom-right corner's vertical motion,
    both ported through springs."""
    mesh = Mesh2D(nx, ny)
    in_dof = 2 * mesh.node(nx, 0)
    out_dof = 2 * mesh.node(nx, ny) + 1
    fixed = frozenset(d for j in range(ny + 1)
                      for d in (2 * mesh.node(0, j), 2 * mesh.node(0, j) + 1))
    lc = LoadCase(loads={in_dof: -1.0}, fixed_dofs=fixed, output_dof=out_dof,
                  springs={in_dof: 0.1, out_dof: 0.1})
    return ProblemSpec(name="toy", mesh=mesh, load_case=lc, objective="mechanism",
                       volfrac=0.4, simp=SimpParams(rmin=1.5), output_weight=1.0)
