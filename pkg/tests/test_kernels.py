"""Backend equivalence: the numba and numpy kernel implementations must agree
to roundoff on identical inputs, whichever backend is active."""

import numpy as np
import pytest

from qdtopo import kernels
from qdtopo.fem import Mesh2D, element_stiffness
from qdtopo.kernels import (_filter_apply_numpy, _oc_candidate_numpy,
                            _pair_energies_numpy)

needs_numba = pytest.mark.skipif(not kernels.USING_NUMBA,
                                 reason="numba backend not active")


def _setup(nx=12, ny=7, seed=0):
    rng = np.random.default_rng(seed)
    mesh = Mesh2D(nx, ny)
    u = rng.normal(size=mesh.n_dofs)
    v = rng.normal(size=mesh.n_dofs)
    rho = rng.uniform(0.0, 1.0, mesh.n_elems)
    g = -rng.uniform(0.0, 3.0, mesh.n_elems)
    return mesh, u, v, rho, g


@needs_numba
def test_pair_energies_backends_agree():
    mesh, u, v, rho, g = _setup()
    ke = element_stiffness()
    a = kernels._pair_energies_numba(u, v, mesh.edof(), ke)
    b = _pair_energies_numpy(u, v, mesh.edof(), ke)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(b).max())


@needs_numba
@pytest.mark.parametrize("rmin", [1.0, 1.5, 2.0, 3.2])
def test_filter_backends_agree(rmin):
    mesh, u, v, rho, g = _setup()
    a = kernels._filter_apply_numba(rho, g, mesh.nx, mesh.ny, rmin, 1e-3)
    b = _filter_apply_numpy(rho, g, mesh.nx, mesh.ny, rmin, 1e-3)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(b).max())


@needs_numba
def test_oc_candidate_backends_agree():
    mesh, u, v, rho, g = _setup()
    bnum = np.maximum(-g, 1e-10)
    designable = rho > 0.2
    a = kernels._oc_candidate_numba(rho, bnum, 0.7, 0.2, 0.0, 1.0, designable)
    b = _oc_candidate_numpy(rho, bnum, 0.7, 0.2, 0.0, 1.0, designable)
    assert np.array_equal(a, b)


def test_active_backend_is_exported():
    assert kernels.BACKEND in ("numba", "numpy")
    assert kernels.USING_NUMBA == (kernels.BACKEND == "numba")


def test_oc_candidate_respects_passivity_and_clamps():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, 100)
    bnum = np.maximum(rng.uniform(-1, 3, 100), 1e-10)
    designable = rng.random(100) < 0.7
    out = kernels.oc_candidate(x, bnum, 0.9, 0.15, 0.0, 1.0, designable)
    assert np.array_equal(out[~designable], x[~designable])
    moved = out[designable] - x[designable]
    assert np.abs(moved).max() <= 0.15 + 1e-15
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_filter_weights_cache_reused():
    before = dict(kernels._FILTER_CACHE)
    kernels._filter_weights(9, 5, 1.7)
    first = kernels._FILTER_CACHE[(9, 5, 1.7)]
    kernels._filter_weights(9, 5, 1.7)
    assert kernels._FILTER_CACHE[(9, 5, 1.7)] is first
    kernels._FILTER_CACHE.clear()
    kernels._FILTER_CACHE.update(before)
