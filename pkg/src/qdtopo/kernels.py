"""Hot numeric kernels with interchangeable numba and pure-numpy backends.

The backend is chosen once at import time from the QDTOPO_BACKEND environment
variable:

  * ``numba`` — require numba, fail if it cannot be imported;
  * ``numpy`` — pure numpy, numba is never imported;
  * unset / ``auto`` — numba when importable, numpy otherwise (with a warning).

Both backends implement the same math; per-element floating point operations
are identical, so results agree to roundoff.  Within one backend every kernel
is bit-reproducible.  ``benchmarks/bench_kernels.py`` compares the two.
"""

import os
import warnings

import numpy as np

_CHOICES = ("auto", "numba", "numpy")
_requested = os.environ.get("QDTOPO_BACKEND", "auto").lower()
if _requested not in _CHOICES:
    raise ValueError(
        f"QDTOPO_BACKEND={_requested!r} not understood; expected one of {_CHOICES}"
    )

USING_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn(
            "numba is not importable; falling back to the pure-numpy kernels "
            "(set QDTOPO_BACKEND=numpy to silence this warning)",
            stacklevel=2,
        )

BACKEND = "numba" if USING_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pair_energies: per-element quadratic forms ua_e^T KE ub_e
# ---------------------------------------------------------------------------

def _pair_energies_numpy(ua, ub, edof, ke):
    return np.einsum("ij,jk,ik->i", ua[edof], ke, ub[edof])


if USING_NUMBA:

    @njit(cache=True)
    def _pair_energies_numba(ua, ub, edof, ke):
        nel = edof.shape[0]
        out = np.empty(nel)
        for e in range(nel):
            acc = 0.0
            for a in range(8):
                row = 0.0
                for b in range(8):
                    row += ke[a, b] * ub[edof[e, b]]
                acc += ua[edof[e, a]] * row
            out[e] = acc
        return out


def pair_energies(ua, ub, edof, ke):
    """Per-element energies ua_e^T KE ub_e for all elements.

    ua, ub: full DOF vectors; edof: (nel, 8) int32 connectivity; ke: 8x8.
    """
    if USING_NUMBA:
        return _pair_energies_numba(ua, ub, edof, ke)
    return _pair_energies_numpy(ua, ub, edof, ke)


# ---------------------------------------------------------------------------
# filter_apply: density-weighted sensitivity filter on the regular grid
#
# out_e = sum_i w_i rho_i g_i / (max(rho_e, gamma) * sum_i w_i),
# w_i = max(0, rmin - dist(e, i)), element id e = ei*ny + ej.
# ---------------------------------------------------------------------------

_FILTER_CACHE = {}


def _filter_weights(nx, ny, rmin):
    """Sparse filter weight matrix W (csr) and its row sums, cached per mesh."""
    import scipy.sparse as sp

    key = (nx, ny, float(rmin))
    hit = _FILTER_CACHE.get(key)
    if hit is not None:
        return hit
    hw = int(np.floor(rmin))
    ii = np.arange(nx * ny)
    ei, ej = ii // ny, ii % ny
    rows, cols, vals = [], [], []
    for di in range(-hw, hw + 1):
        for dj in range(-hw, hw + 1):
            w = rmin - np.sqrt(di * di + dj * dj)
            if w <= 0:
                continue
            ni, nj = ei + di, ej + dj
            ok = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
            rows.append(ii[ok])
            cols.append(ni[ok] * ny + nj[ok])
            vals.append(np.full(ok.sum(), w))
    W = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nx * ny),
    ).tocsr()
    wsum = np.asarray(W.sum(axis=1)).ravel()
    _FILTER_CACHE[key] = (W, wsum)
    return W, wsum


def _filter_apply_numpy(rho, g, nx, ny, rmin, gamma):
    W, wsum = _filter_weights(nx, ny, rmin)
    return (W @ (rho * g)) / (np.maximum(rho, gamma) * wsum)


if USING_NUMBA:

    @njit(cache=True)
    def _filter_apply_numba(rho, g, nx, ny, rmin, gamma):
        hw = int(np.floor(rmin))
        span = 2 * hw + 1
        stencil = np.empty((span, span))
        for di in range(-hw, hw + 1):
            for dj in range(-hw, hw + 1):
                stencil[di + hw, dj + hw] = rmin - np.sqrt(di * di + dj * dj)
        out = np.empty(nx * ny)
        for ei in range(nx):
            for ej in range(ny):
                total = 0.0
                acc = 0.0
                for ni in range(max(ei - hw, 0), min(ei + hw + 1, nx)):
                    for nj in range(max(ej - hw, 0), min(ej + hw + 1, ny)):
                        w = stencil[ni - ei + hw, nj - ej + hw]
                        if w > 0.0:
                            i = ni * ny + nj
                            total += w
                            acc += w * rho[i] * g[i]
                e = ei * ny + ej
                out[e] = acc / (max(rho[e], gamma) * total)
        return out


def filter_apply(rho, g, nx, ny, rmin, gamma=1e-3):
    """Density-weighted cone filter of the per-element field g."""
    if USING_NUMBA:
        return _filter_apply_numba(rho, g, nx, ny, float(rmin), float(gamma))
    return _filter_apply_numpy(rho, g, nx, ny, float(rmin), float(gamma))


# ---------------------------------------------------------------------------
# oc_candidate: one optimality-criteria trial update at a given multiplier
#
# xnew_e = clip(x_e * sqrt(bnum_e / lam), max(lo, x_e - move), min(hi, x_e + move))
# on designable elements; passive elements pass through unchanged.
# ---------------------------------------------------------------------------

def _oc_candidate_numpy(x, bnum, lam, move, lo, hi, designable):
    trial = x * np.sqrt(bnum / lam)
    lower = np.maximum(lo, x - move)
    upper = np.minimum(hi, x + move)
    return np.where(designable, np.minimum(upper, np.maximum(lower, trial)), x)


if USING_NUMBA:

    @njit(cache=True)
    def _oc_candidate_numba(x, bnum, lam, move, lo, hi, designable):
        n = x.shape[0]
        out = np.empty(n)
        for e in range(n):
            if designable[e]:
                trial = x[e] * np.sqrt(bnum[e] / lam)
                lower = max(lo, x[e] - move)
                upper = min(hi, x[e] + move)
                out[e] = min(upper, max(lower, trial))
            else:
                out[e] = x[e]
        return out


def oc_candidate(x, bnum, lam, move, lo, hi, designable):
    """Trial density update for one bisection step of the OC multiplier."""
    if USING_NUMBA:
        return _oc_candidate_numba(
            x, bnum, float(lam), float(move), float(lo), float(hi), designable
        )
    return _oc_candidate_numpy(x, bnum, lam, move, lo, hi, designable)
