"""Second eigenvector of the unnormalized graph Laplacian ``L = D - W``."""

from __future__ import annotations

import numpy as np

from .graph import Graph

__all__ = ["DisconnectedGraphError", "laplacian_apply", "second_eigenvector"]


class DisconnectedGraphError(ValueError):
    def __init__(self, components: int):
        self.components = components
        super().__init__(f"graph has {components} connected components; "
                         "the second eigenvector is not unique")


def laplacian_apply(g: Graph, x: np.ndarray) -> np.ndarray:
    return g.degrees() * x - g.adjacency @ x


def second_eigenvector(g: Graph, tol: float = 1e-8, max_iter: int = 1_000_000,
                       seed: int = 0) -> np.ndarray:
    """Unit eigenvector of the second smallest Laplacian eigenvalue.

    Power iteration on ``c I - L`` restricted to the complement of the
    constant vector, with ``c = 1 + 2 * max_degree`` so that ``c I - L`` is
    positive definite. Stops when ``||L v - (v^T L v) v|| <= tol``. The sign
    is fixed by making the first nonzero entry positive.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if g.n < 2:
        raise ValueError("need at least two vertices")
    ncomp = g.n_components()
    if ncomp > 1:
        raise DisconnectedGraphError(ncomp)
    deg = g.degrees()
    adj = g.adjacency
    shift = 1.0 + 2.0 * deg.max()

    v = np.random.default_rng(seed).standard_normal(g.n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        lv = deg * v - adj @ v
        rayleigh = float(v @ lv)
        if np.linalg.norm(lv - rayleigh * v) <= tol:
            break
        v = shift * v - lv
        v -= v.mean()
        v /= np.linalg.norm(v)
    else:
        raise RuntimeError(f"power iteration did not reach residual {tol:g} in {max_iter} steps")
    # entries at rounding level count as zero
    nz = np.flatnonzero(np.abs(v) > 1e-6 * np.abs(v).max())
    if v[nz[0]] < 0:
        v = -v
    return v
