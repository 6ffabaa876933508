"""Convex inner problem ``min_{||u||_2 <= 1} TV_w(u) - <u, v>``.

The total variation is written as ``sum_e w_e |(B u)_e|`` with ``B`` the
unweighted signed incidence matrix (one row per edge, ``+1`` at the head,
``-1`` at the tail), so the edge weights become the radii of the dual box
``|alpha_e| <= w_e``. The saddle problem

    min_{||u|| <= 1} max_{|alpha| <= w} <B u, alpha> - <u, v>

is solved by the primal-dual hybrid gradient method. Its dual function is
``D(alpha) = -||B^T alpha - v||_2``, a lower bound on the inner minimum,
which gives both the duality gap and a certificate that no descent below a
target value is possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import Graph

__all__ = [
    "InnerProblem",
    "InnerSolution",
    "InnerSolverError",
    "solve_inner",
    "solve_inner_prox_form",
    "pd_gap",
    "pdhg_trajectory",
]

_CONVERGED, _NO_DESCENT, _MAX_ITER = 0, 1, 2


class InnerSolverError(RuntimeError):
    """Iteration budget spent without descent and without a certificate.

    ``solution`` holds the best iterate found.
    """

    def __init__(self, message, solution):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True, eq=False)
class InnerProblem:
    """Data of one inner problem.

    ``target`` is the value the solve has to beat, ``Phi(f^k) = -c p`` in the
    outer loop. ``+inf`` turns the solve into plain minimization.
    """

    n: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray
    v: np.ndarray
    target: float = np.inf

    @classmethod
    def from_graph(cls, g: Graph, v, target: float = np.inf, scale: float = 1.0) -> "InnerProblem":
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (g.n,):
            raise ValueError(f"linear term has shape {v.shape}, expected ({g.n},)")
        if not scale > 0:
            raise ValueError("total variation scale must be positive")
        return cls(g.n, np.ascontiguousarray(g.heads), np.ascontiguousarray(g.tails),
                   np.ascontiguousarray(g.weights * scale), v, float(target))

    @property
    def max_degree(self) -> int:
        if self.heads.size == 0:
            return 0
        return int(np.bincount(np.concatenate([self.heads, self.tails]), minlength=self.n).max())

    @property
    def step_size(self) -> float:
        # sigma = tau and sigma * tau * ||B||^2 <= 0.98 since ||B||^2 <= 2 d_max
        return 0.99 / np.sqrt(2.0 * max(self.max_degree, 1))

    def apply_b(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        return u[self.heads] - u[self.tails]

    def apply_bt(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64)
        return (np.bincount(self.heads, weights=alpha, minlength=self.n)
                - np.bincount(self.tails, weights=alpha, minlength=self.n))

    def phi(self, u) -> float:
        u = np.asarray(u, dtype=np.float64)
        return float(np.dot(self.weights, np.abs(self.apply_b(u))) - np.dot(u, self.v))

    def dual_value(self, alpha) -> float:
        return -float(np.linalg.norm(self.apply_bt(alpha) - self.v))


@dataclass
class InnerSolution:
    u: np.ndarray
    phi: float
    gap: float
    lower_bound: float
    iterations: int
    descent_achieved: bool
    certified: bool
    alpha: np.ndarray


def pd_gap(p: InnerProblem, u, alpha) -> float:
    """``Phi(u) - D(alpha)``, an upper bound on ``Phi(u) - min Phi``.

    ``u`` must lie in the unit ball and ``alpha`` in the dual box.
    """
    return max(p.phi(u) - p.dual_value(alpha), 0.0)


@njit(cache=True, nogil=True)
def _primal_dual(heads, tails, w, v, u, alpha, step, tol, target, eps, max_iter, check_every,
                 dist_tol):
    n = u.size
    m = w.size
    ubar = u.copy()
    unew = np.empty(n)
    bta = np.zeros(n)
    best_u = u.copy()
    best_phi = np.inf
    best_dual = -np.inf
    status = _MAX_ITER
    it = 0
    while it < max_iter:
        it += 1
        for e in range(m):
            a = alpha[e] + step * (ubar[heads[e]] - ubar[tails[e]])
            if a > w[e]:
                a = w[e]
            elif a < -w[e]:
                a = -w[e]
            alpha[e] = a
        bta[:] = 0.0
        for e in range(m):
            bta[heads[e]] += alpha[e]
            bta[tails[e]] -= alpha[e]
        nrm2 = 0.0
        for i in range(n):
            unew[i] = u[i] - step * (bta[i] - v[i])
            nrm2 += unew[i] * unew[i]
        if nrm2 > 1.0:
            scale = 1.0 / np.sqrt(nrm2)
            for i in range(n):
                unew[i] *= scale
        for i in range(n):
            ubar[i] = 2.0 * unew[i] - u[i]
            u[i] = unew[i]

        if it % check_every == 0 or it == max_iter:
            tv = 0.0
            for e in range(m):
                tv += w[e] * abs(u[heads[e]] - u[tails[e]])
            lin = 0.0
            nrm2 = 0.0
            res2 = 0.0
            for i in range(n):
                lin += u[i] * v[i]
                nrm2 += u[i] * u[i]
                r = bta[i] - v[i]
                res2 += r * r
            phi = tv - lin
            # one-homogeneity: moving a point with phi < 0 to the sphere lowers phi
            if phi < 0.0 and nrm2 > 0.0:
                phi = phi / np.sqrt(nrm2)
            dual = -np.sqrt(res2)
            if dual > best_dual:
                best_dual = dual
            if phi < best_phi:
                best_phi = phi
                best_u[:] = u
            gap = best_phi - best_dual
            if best_dual >= target - eps:
                status = _NO_DESCENT
                break
            if best_phi < target - eps and gap <= tol * (1.0 + abs(best_phi)):
                # on the sphere Phi(u) - Phi* >= |Phi*| / 2 ||u - u*||^2
                if dist_tol <= 0.0 or 2.0 * gap <= dist_tol * dist_tol * -best_phi:
                    status = _CONVERGED
                    break
    return status, it, best_u, best_phi, best_dual


def solve_inner(p: InnerProblem, tol: float, max_iter: int, *, u0=None, alpha0=None,
                eps: float = 0.0, check_every: int = 10, dist_tol: float = 0.0) -> InnerSolution:
    """Minimize the inner objective over the unit ball by PDHG.

    Iterates ``alpha <- clip(alpha + s B ubar, +-w)``,
    ``u <- proj(u - s (B^T alpha - v))``, ``ubar <- 2 u_new - u_old``.

    The solve stops once ``Phi(u) < target - eps`` and the duality gap is at
    most ``tol * (1 + |Phi(u)|)``, or once the dual bound proves
    ``min Phi >= target - eps`` (``certified``, no descent). If ``max_iter``
    runs out after descent was reached the inexact point is returned.

    A positive ``dist_tol`` additionally requires the gap to guarantee
    ``||u - u*||_2 <= dist_tol`` for a minimizer ``u*`` on the sphere.

    Raises
    ------
    InnerSolverError
        Budget spent with neither descent nor a certificate.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = p.n
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=np.float64)
    nrm = np.linalg.norm(u)
    if nrm > 1.0:
        u /= nrm
    alpha = np.zeros(p.weights.size) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    if alpha.shape != p.weights.shape:
        raise ValueError("warm-start dual has the wrong shape")
    np.clip(alpha, -p.weights, p.weights, out=alpha)
    check_every = max(1, min(int(check_every), int(max_iter)))

    status, iters, u_best, phi, dual = _primal_dual(
        p.heads, p.tails, p.weights, p.v, u, alpha, p.step_size, float(tol),
        float(p.target), float(eps), int(max_iter), check_every, float(dist_tol))

    nrm = np.linalg.norm(u_best)
    if phi <= 0.0 and nrm > 0.0:
        u_best = u_best / nrm
        phi = p.phi(u_best)
    sol = InnerSolution(
        u=u_best, phi=phi, gap=max(phi - dual, 0.0), lower_bound=dual, iterations=int(iters),
        descent_achieved=bool(phi < p.target - eps), certified=status == _NO_DESCENT,
        alpha=alpha)
    if status == _NO_DESCENT:
        sol.descent_achieved = False
    elif not sol.descent_achieved:
        raise InnerSolverError(
            f"no descent below {p.target:.6g} after {iters} iterations "
            f"(best {phi:.6g}, dual bound {dual:.6g})", sol)
    return sol


def pdhg_trajectory(p: InnerProblem, iterations: int, u0=None, alpha0=None):
    """Plain numpy PDHG with the step sizes of :func:`solve_inner`.

    A slow reference for diagnostics. Returns the final ``(u, alpha)`` and
    the residuals ``||u^{t+1} - u^t||_2`` of every iteration.
    """
    step = p.step_size
    u = np.zeros(p.n) if u0 is None else np.array(u0, dtype=np.float64)
    nrm = np.linalg.norm(u)
    if nrm > 1.0:
        u /= nrm
    alpha = np.zeros(p.weights.size) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    ubar = u.copy()
    residuals = np.empty(iterations)
    for t in range(iterations):
        alpha = np.clip(alpha + step * p.apply_b(ubar), -p.weights, p.weights)
        unew = u - step * (p.apply_bt(alpha) - p.v)
        unew /= max(1.0, np.linalg.norm(unew))
        residuals[t] = np.linalg.norm(unew - u)
        ubar = 2.0 * unew - u
        u = unew
    return u, alpha, residuals


@njit(cache=True, nogil=True)
def _prox_dual_fista(heads, tails, w, z, mu, alpha, step, tol, max_iter, dist_tol):
    # minimize (1/2mu) ||B^T a||^2 - <B^T a, z> over |a| <= w; u = z - B^T a / mu
    n = z.size
    m = w.size
    y = alpha.copy()
    prev = alpha.copy()
    bty = np.zeros(n)
    u = np.empty(n)
    t = 1.0
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        bty[:] = 0.0
        for e in range(m):
            bty[heads[e]] += y[e]
            bty[tails[e]] -= y[e]
        for i in range(n):
            u[i] = z[i] - bty[i] / mu
        for e in range(m):
            prev[e] = alpha[e]
            a = y[e] + step * (u[heads[e]] - u[tails[e]])
            if a > w[e]:
                a = w[e]
            elif a < -w[e]:
                a = -w[e]
            alpha[e] = a
        # gradient restart keeps the momentum from overshooting
        restart = 0.0
        for e in range(m):
            restart += (y[e] - alpha[e]) * (alpha[e] - prev[e])
        if restart > 0.0:
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        t = t_next
        for e in range(m):
            y[e] = alpha[e] + beta * (alpha[e] - prev[e])

        if it % 10 == 0 or it == max_iter:
            bty[:] = 0.0
            for e in range(m):
                bty[heads[e]] += alpha[e]
                bty[tails[e]] -= alpha[e]
            dual = 0.0
            for i in range(n):
                u[i] = z[i] - bty[i] / mu
                dual += bty[i] * z[i] - bty[i] * bty[i] / (2.0 * mu)
            primal = 0.0
            for e in range(m):
                primal += w[e] * abs(u[heads[e]] - u[tails[e]])
            for i in range(n):
                primal += 0.5 * mu * (u[i] - z[i]) ** 2
            gap = primal - dual
            # mu-strong convexity: ||u - u*||^2 <= 2 gap / mu
            if gap <= tol * (1.0 + abs(primal)) and (
                    dist_tol <= 0.0 or 2.0 * gap <= mu * dist_tol * dist_tol):
                break
    bty[:] = 0.0
    for e in range(m):
        bty[heads[e]] += alpha[e]
        bty[tails[e]] -= alpha[e]
    for i in range(n):
        u[i] = z[i] - bty[i] / mu
    return u, gap, it


def solve_inner_prox_form(g: Graph, f, v, lam: float, c: float, tol: float = 1e-10,
                          max_iter: int = 1_000_000, dist_tol: float = 0.0) -> np.ndarray:
    """Normalized minimizer of ``TV(u) + lam / (2c) * ||u - (f + c v)||^2``.

    Solved through its dual, a box-constrained least-squares problem, with
    restarted accelerated projected gradient. Returns ``h / ||h||_2``.
    A positive ``dist_tol`` also requires ``||h - h*||_2 <= dist_tol``.
    """
    if not (c > 0 and lam > 0):
        raise ValueError("prox form needs c > 0 and lam > 0")
    f = np.asarray(f, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    mu = lam / c
    z = np.ascontiguousarray(f + c * v)
    heads = np.ascontiguousarray(g.heads)
    tails = np.ascontiguousarray(g.tails)
    w = np.ascontiguousarray(g.weights)
    dmax = max(int(g.unweighted_degrees().max(initial=0)), 1)
    step = mu / (2.0 * dmax)
    alpha = np.zeros(g.m)
    h, _, _ = _prox_dual_fista(heads, tails, w, z, float(mu), alpha, float(step),
                               float(tol), int(max_iter), float(dist_tol))
    nrm = np.linalg.norm(h)
    if nrm == 0.0:
        raise ArithmeticError("prox step returned the zero vector")
    return h / nrm
