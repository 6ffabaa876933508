"""RatioDCA-prox outer loop, optimal thresholding and experiment runs."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import Graph, cut_value, indicator
from .inner import InnerProblem, InnerSolverError, solve_inner, solve_inner_prox_form
from .objective import (L2, L2_SQUARED, ConstraintFunction, DegeneratePointError, RatioObjective,
                        Scaled, TotalVariation, linear_term, ratio_value, subgradients)
from .setfn import BalanceFunction, balance_set_value

__all__ = [
    "SolverConfig",
    "TraceEntry",
    "SolveResult",
    "Improvement",
    "RunRecord",
    "RunReport",
    "optimal_threshold",
    "ratiodca_prox",
    "improve_partition",
    "random_initialization",
    "initialization_pool",
    "multi_init_run",
    "eigen_residual",
    "proximal_ordering_profile",
    "prox_equivalence_trace",
    "CSV_HEADER",
]

MODES = ("standard", "cut-monotone")
CSV_HEADER = ("c", "avg", "top10_avg", "best", "best_set_size")


@dataclass(frozen=True)
class SolverConfig:
    """Outer and inner loop parameters.

    The proximal weight in outer step ``k`` is
    ``max(cR + lambda_k * cS, c_min)``.
    Inner tolerances follow ``max(tol_min, tol0 * rho**k)``, so early inner
    problems are solved loosely. Termination is declared when the inner
    solve cannot get below ``-c p - eps_term * (1 + lambda_k)``.
    """

    cR: float = 0.0
    cS: float = 0.0
    c_min: float = 0.0
    constraint: ConstraintFunction = L2
    mode: str = "standard"
    tol0: float = 1e-2
    rho: float = 0.5
    tol_min: float = 1e-8
    max_outer: int = 100
    max_inner: int = 20_000
    eps_term: float = 1e-8
    seed: int = 0
    check_every: int = 10

    def __post_init__(self):
        if self.cR < 0 or self.cS < 0 or self.c_min < 0:
            raise ValueError("cR, cS and c_min must be nonnegative")
        if not self.eps_term > 0:
            raise ValueError("eps_term must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == "cut-monotone" and (self.cR or self.cS or self.c_min):
            raise ValueError("cut-monotone mode requires a zero proximal weight")
        if self.constraint.kind not in ("l2", "l2-squared"):
            raise ValueError("the inner solver supports only the l2 and l2-squared constraints")

    def prox_weight(self, lam: float) -> float:
        return max(self.cR + lam * self.cS, self.c_min)

    def inner_tol(self, k: int) -> float:
        return max(self.tol_min, self.tol0 * self.rho ** k)


@dataclass
class TraceEntry:
    lam: float
    phi: float
    step: float
    inner_iterations: int
    threshold_ratio: float


@dataclass
class SolveResult:
    f_star: np.ndarray
    lambda_star: float
    best_set: np.ndarray
    best_set_ratio: float
    trace: list[TraceEntry]
    terminated: bool
    certified: bool

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([t.lam for t in self.trace])


# --------------------------------------------------------------------------
# thresholding

def _set_ratio(g: Graph, b: BalanceFunction, mask: np.ndarray) -> float:
    s = balance_set_value(b, mask)
    return cut_value(g, mask) / s if s > 0 else np.inf


def optimal_threshold(g: Graph, b: BalanceFunction, f) -> tuple[np.ndarray, float]:
    """Best upper level set ``{i : f_i > t}`` under ``cut / S_hat``.

    All cuts are obtained in one sweep over the descending order of ``f``;
    ties in the ratio go to the smaller set.

    Returns
    -------
    mask : ndarray of bool
    ratio : float
    """
    f = np.asarray(f, dtype=np.float64)
    n = g.n
    if f.shape != (n,):
        raise ValueError(f"expected a vector of length {n}")
    order = np.argsort(-f, kind="stable")
    fs = f[order]
    valid = np.flatnonzero(fs[:-1] > fs[1:]) + 1  # sizes k of level sets
    if valid.size == 0:
        raise ValueError("f is constant; no threshold separates the vertices")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    lo = np.minimum(pos[g.heads], pos[g.tails])
    hi = np.maximum(pos[g.heads], pos[g.tails])
    # an edge is cut by the top-k set exactly when lo < k <= hi
    diff = np.bincount(lo + 1, weights=g.weights, minlength=n + 2)
    diff -= np.bincount(hi + 1, weights=g.weights, minlength=n + 2)
    cuts = np.cumsum(diff)[valid]
    if b.cardinality_based:
        bal = b.of_size(valid, n).astype(np.float64)
    else:
        bal = np.empty(valid.size)
        for t, k in enumerate(valid):
            mask = np.zeros(n, dtype=bool)
            mask[order[:k]] = True
            bal[t] = balance_set_value(b, mask)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bal > 0, cuts / np.where(bal > 0, bal, 1.0), np.inf)
    if not np.isfinite(ratios).any():
        raise ValueError("every level set has zero balance")
    best = ratios.min()
    close = np.flatnonzero(ratios <= best + 1e-12 * max(best, 1.0))
    k = int(valid[close[0]])  # valid is increasing, so this is the smallest set
    mask = np.zeros(n, dtype=bool)
    mask[order[:k]] = True
    return mask, _set_ratio(g, b, mask)


# --------------------------------------------------------------------------
# outer loop

def _tv_scale(obj: RatioObjective, g: Graph) -> float:
    r1 = obj.r1
    if isinstance(r1, TotalVariation) and r1.graph is g:
        return 1.0
    if isinstance(r1, Scaled) and isinstance(r1.part, TotalVariation) and r1.part.graph is g:
        return float(r1.factor)
    raise TypeError("the inner solver needs R1 to be the total variation of the graph")


def _inner_step(g, obj, cfg, f, lam, c, k, alpha):
    """Solve one inner problem from ``f``. Returns ``(solution, stalled)``."""
    gfun = cfg.constraint
    sg = subgradients(obj, gfun, f)
    v = linear_term(obj, f, lam, c, sg)
    problem = InnerProblem.from_graph(g, v, target=-c * gfun.degree, scale=_tv_scale(obj, g))
    eps = cfg.eps_term * (1.0 + lam)
    try:
        sol = solve_inner(problem, cfg.inner_tol(k), cfg.max_inner, u0=f, alpha0=alpha,
                          eps=eps, check_every=cfg.check_every)
    except InnerSolverError as err:
        return err.solution, problem, True
    return sol, problem, False


def ratiodca_prox(g: Graph, obj: RatioObjective, cfg: SolverConfig, f0) -> SolveResult:
    """Minimize ``F = R / S`` from ``f0`` by RatioDCA-prox.

    Each step takes subgradients at ``f^k``, solves the inner problem
    approximately (any point beating ``Phi(f^k) = -c p`` is accepted) and
    sets ``lambda^{k+1} = F(f^{k+1})``. The loop ends when the inner solve
    proves no such point exists (``certified``), when it cannot find one
    within its budget, or after ``max_outer`` steps.

    In ``cut-monotone`` mode ``lambda^k`` is the ratio of the optimal
    threshold set of ``f^k``, and the normalized indicator of that set is
    taken as the next iterate whenever it is an inner minimizer, which makes
    the loop finite.
    """
    if obj.balance is None:
        raise ValueError("thresholding needs an objective built by cut_objective")
    gfun = cfg.constraint
    b = obj.balance
    f = gfun.normalize(f0)
    lam_f = ratio_value(obj, f)
    mask, thr = optimal_threshold(g, b, f)
    best_mask, best_ratio = mask, thr
    monotone = cfg.mode == "cut-monotone"
    lam = thr if monotone else lam_f
    trace = [TraceEntry(lam, float("nan"), 0.0, 0, thr)]
    at_indicator = False
    certified = terminated = False
    alpha = None

    for k in range(cfg.max_outer):
        c = cfg.prox_weight(lam)
        sol, problem, stalled = _inner_step(g, obj, cfg, f, lam, c, k, alpha)
        alpha = sol.alpha
        eps = cfg.eps_term * (1.0 + lam)
        descent = sol.descent_achieved and not stalled

        if monotone and not descent:
            ind = gfun.normalize(indicator(mask))
            if at_indicator or problem.phi(ind) > sol.phi + eps:
                terminated, certified = True, sol.certified
                break
            f_new, at_indicator = ind, True
        elif not descent:
            terminated, certified = True, sol.certified
            break
        else:
            f_new, at_indicator = sol.u, False

        lam_new = ratio_value(obj, f_new)
        mask_new, thr_new = optimal_threshold(g, b, f_new)
        if monotone:
            if thr_new > lam:
                # cannot happen for exact minimizers; keep the better cut
                terminated = True
                break
            lam_next = thr_new
        else:
            if not lam_new < lam:
                # inexact arithmetic ate the predicted descent
                terminated = True
                break
            lam_next = lam_new
        step = float(np.linalg.norm(f_new - f))
        f, lam, mask = f_new, lam_next, mask_new
        lam_f = lam_new
        if thr_new < best_ratio:
            best_mask, best_ratio = mask_new, thr_new
        trace.append(TraceEntry(lam, float(sol.phi), step, int(sol.iterations), thr_new))

    return SolveResult(f_star=f, lambda_star=lam_f, best_set=best_mask,
                       best_set_ratio=best_ratio, trace=trace,
                       terminated=terminated, certified=certified)


@dataclass
class Improvement:
    best_set: np.ndarray
    ratio: float
    improved: bool
    certified: bool


def improve_partition(g: Graph, obj: RatioObjective, cfg: SolverConfig, a) -> Improvement:
    """Run RatioDCA-prox from the indicator of ``a``.

    The result either has a strictly smaller ratio than ``a`` or is ``a``
    itself, with ``certified`` telling whether the first inner problem
    proved that no descent exists.
    """
    a = np.asarray(a, dtype=bool)
    if not a.any() or a.all():
        raise ValueError("the partition must be a nonempty proper subset")
    b = obj.balance
    if balance_set_value(b, a) == 0:
        raise ValueError("the partition has zero balance")
    start = _set_ratio(g, b, a)
    res = ratiodca_prox(g, obj, cfg, indicator(a))
    if res.best_set_ratio < start:
        return Improvement(res.best_set, res.best_set_ratio, True, res.certified)
    return Improvement(a, start, False, res.certified and len(res.trace) == 1)


# --------------------------------------------------------------------------
# experiments

def random_initialization(obj: RatioObjective, gfun: ConstraintFunction, n: int,
                          rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
    """Uniform ``[-1, 1]`` entries, mean-centred, redrawn while ``S = 0``."""
    for _ in range(max_tries):
        f = rng.uniform(-1.0, 1.0, n)
        f -= f.mean()
        if obj.denominator(f) > 0:
            return gfun.normalize(f)
    raise DegeneratePointError("could not draw an initialization with nonzero denominator")


def initialization_pool(g: Graph, obj: RatioObjective, n_random: int, use_spectral: bool,
                        seed: int, constraint: ConstraintFunction = L2) -> list[tuple[str, np.ndarray]]:
    """Starting vectors shared by every solver in an experiment.

    Random start ``i`` draws from its own stream seeded by ``(seed, i)``.
    """
    pool = []
    if use_spectral:
        from .spectral import second_eigenvector
        pool.append(("spectral", constraint.normalize(second_eigenvector(g))))
    for i in range(n_random):
        rng = np.random.default_rng([seed, i])
        pool.append(("random", random_initialization(obj, constraint, g.n, rng)))
    return pool


@dataclass
class RunRecord:
    index: int
    init: str
    lambda_star: float
    best_ratio: float
    best_set_size: int
    outer_iterations: int
    terminated: bool
    certified: bool
    lambdas: list = field(default_factory=list)


@dataclass
class RunReport:
    records: list[RunRecord]
    best_set: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.best_ratio for r in self.records])

    @property
    def average(self) -> float:
        return float(self.ratios.mean())

    @property
    def top10_average(self) -> float:
        r = np.sort(self.ratios)
        return float(r[:min(10, r.size)].mean())

    @property
    def best(self) -> float:
        return float(self.ratios.min())

    def to_dict(self, traces: bool = True) -> dict:
        records = []
        for r in self.records:
            d = asdict(r)
            if not traces:
                d.pop("lambdas")
            records.append(d)
        return {
            "avg": self.average,
            "top10_avg": self.top10_average,
            "best": self.best,
            "best_set": [int(i) for i in np.flatnonzero(self.best_set)],
            "runs": records,
        }

    def to_json(self, traces: bool = True) -> str:
        return json.dumps(self.to_dict(traces), sort_keys=True, indent=1)

    def csv_row(self, c: float) -> list:
        return [repr(float(c)), repr(self.average), repr(self.top10_average), repr(self.best),
                str(int(self.best_set.sum()))]

    def to_csv(self, c: float) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow(self.csv_row(c))
        return out.getvalue()


def _thread_count(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("BCK_THREADS", "1") or 1)
    return max(1, threads)


def multi_init_run(g: Graph, obj: RatioObjective, cfg: SolverConfig, n_random: int,
                   use_spectral: bool, *, pool=None, threads: int | None = None) -> RunReport:
    """Solve from many starting vectors and aggregate the thresholded cuts.

    ``pool`` overrides the generated initializations (a list of
    ``(kind, vector)``); pass the same pool to compare solvers on equal
    footing. Solves may run on ``threads`` workers (default: the
    ``BCK_THREADS`` environment variable); the report is assembled in run
    order, so it does not depend on the thread count.
    """
    if pool is None:
        if n_random < 1:
            raise ValueError("n_random must be at least 1")
        pool = initialization_pool(g, obj, n_random, use_spectral, cfg.seed, cfg.constraint)

    def run(item):
        index, (kind, f0) = item
        res = ratiodca_prox(g, obj, cfg, f0)
        return res, RunRecord(index, kind, float(res.lambda_star), float(res.best_set_ratio),
                              int(res.best_set.sum()), len(res.trace) - 1, res.terminated,
                              res.certified, [float(x) for x in res.lambdas])

    items = list(enumerate(pool))
    nthreads = _thread_count(threads)
    if nthreads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            outputs = list(ex.map(run, items))
    else:
        outputs = [run(item) for item in items]

    records = [rec for _, rec in outputs]
    best = min(range(len(outputs)), key=lambda i: (records[i].best_ratio, i))
    return RunReport(records, outputs[best][0].best_set)


def eigen_residual(g: Graph, obj: RatioObjective, cfg: SolverConfig, f_star, lambda_star: float,
                   tol: float = 1e-8, max_iter: int = 200_000) -> float:
    """``-min_{||u|| <= 1} Phi^0(u)`` with subgradients taken at ``f_star``.

    ``Phi^0(u) = R1(u) - <u, r2> + lambda* (S2(u) - <u, s1>)`` vanishes at
    ``f_star``, so the residual is zero exactly when ``f_star`` minimizes it,
    i.e. satisfies the nonlinear eigenproblem for the chosen subgradients.
    When no descent is found the value is the dual bound, so it is an upper
    estimate.
    """
    f = cfg.constraint.normalize(f_star)
    sg = subgradients(obj, cfg.constraint, f)
    v = linear_term(obj, f, lambda_star, 0.0, sg)
    problem = InnerProblem.from_graph(g, v, target=0.0, scale=_tv_scale(obj, g))
    try:
        sol = solve_inner(problem, tol, max_iter, u0=f, eps=tol)
    except InnerSolverError as err:
        return max(0.0, -err.solution.lower_bound)
    if sol.descent_achieved:
        return max(0.0, -sol.phi)
    return max(0.0, -sol.lower_bound)


def proximal_ordering_profile(g: Graph, obj: RatioObjective, f, cs, constraint=L2_SQUARED,
                              tol: float = 1e-10, max_iter: int = 1_000_000) -> np.ndarray:
    """``<u_c, g(f)>`` for inner minimizers ``u_c`` over a grid of proximal weights."""
    f = constraint.normalize(f)
    lam = ratio_value(obj, f)
    sg = subgradients(obj, constraint, f)
    out = []
    for c in cs:
        v = linear_term(obj, f, lam, c, sg)
        problem = InnerProblem.from_graph(g, v, scale=_tv_scale(obj, g))
        sol = solve_inner(problem, tol, max_iter, u0=f, check_every=1)
        out.append(float(np.dot(sol.u, sg.g)))
    return np.array(out)


def prox_equivalence_trace(g: Graph, obj: RatioObjective, f0, c: float, steps: int = 5,
                           tol: float = 1e-10, max_iter: int = 1_000_000,
                           dist_tol: float = 1e-8):
    """Run the constrained iteration and the prox recursion side by side.

    The constrained iteration uses ``G = ||.||^2`` and proximal weight
    ``lambda^k / (2c)``; the prox recursion is
    ``f <- normalize(argmin TV(u) + lambda^k/(2c) ||u - (f + c s1)||^2)``.
    Both use the subgradient and ratio of the constrained iterate, as the
    equivalence presumes identical subgradients. Besides the relative gap
    ``tol``, both solves stop only once their gap certifies an iterate
    within ``dist_tol`` of the exact minimizer.

    Returns the list of ``(f_constrained, f_prox)`` pairs for ``k = 1..steps``.
    """
    f = L2_SQUARED.normalize(f0)
    h = f.copy()
    pairs = []
    scale = _tv_scale(obj, g)
    for _ in range(steps):
        lam = ratio_value(obj, f)
        ck = lam / (2.0 * c)
        sg = subgradients(obj, L2_SQUARED, f)
        v = linear_term(obj, f, lam, ck, sg)
        problem = InnerProblem.from_graph(g, v, scale=scale)
        sol = solve_inner(problem, tol, max_iter, u0=f, check_every=1, dist_tol=dist_tol)
        h = solve_inner_prox_form(g, h, sg.s1, lam, c, tol=tol, max_iter=max_iter,
                                  dist_tol=dist_tol)
        f = sol.u
        pairs.append((f.copy(), h.copy()))
    return pairs
