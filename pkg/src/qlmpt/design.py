"""Threshold design by Fisher-information maximization.

The per-sensor objective only depends on the thresholds normalized by the
noise standard deviation, so the optimizers work on ``tau / sigma_w`` and
rescale at the end. The objective is expressed directly as the normalized
Fisher information (quantized FI over clairvoyant FI, homogeneous sensors),
whose reciprocal is the asymptotic relative efficiency (ARE).
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics
from .channel import transition_matrix
from .quantizer import LQ, RQ, QuantizerSpec, build_lqu, build_quantizer

LQU = "lqu"
# search box for normalized thresholds
RQ_BOUNDS = (-6.0, 6.0)
LQ_BOUNDS = (1e-6, 6.0)


@dataclass(frozen=True)
class PsoParams:
    swarm_size: int = 50
    iterations: int = 200
    inertia: float = 0.7298
    cognitive: float = 1.49445
    social: float = 1.49445
    bounds: tuple = None
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1 or self.iterations < 1 or self.restarts < 1:
            raise ValueError("swarm_size, iterations and restarts must be >= 1")
        if self.bounds is not None and not self.bounds[0] < self.bounds[1]:
            raise ValueError(f"empty search interval {self.bounds}")


@dataclass(frozen=True)
class DesignResult:
    spec: QuantizerSpec
    objective: float
    normalized_fi: float
    are: float
    pe: float = 0.0

    def to_dict(self) -> dict:
        d = self.spec.to_dict()
        d.update(objective=self.objective, normalized_fi=self.normalized_fi, are=self.are, pe=self.pe)
        return d


def _batch_objective(kind, q, tn, pe):
    """Normalized FI for a batch of sorted normalized threshold vectors, shape ``(P, 2**q - 1)``."""
    tn = np.atleast_2d(tn)
    lo = -np.inf if kind == RQ else 0.0
    p = tn.shape[0]
    edges = np.hstack([np.full((p, 1), lo), tn, np.full((p, 1), np.inf)])
    phi = numerics.gaussian_ccdf(edges)
    xp = numerics.x_pdf(edges)
    qv = phi[:, :-1] - phi[:, 1:]
    fv = xp[:, :-1] - xp[:, 1:]
    g = transition_matrix(q, pe)
    num = fv @ g.T
    den = qv @ g.T
    ratio = np.zeros_like(num)
    np.divide(num * num, den, out=ratio, where=den > 0)
    s = ratio.sum(axis=1)
    return 0.5 * s if kind == RQ else s


def fi_objective(kind, q, thresholds, pe, sigma_w=1.0):
    """Per-sensor design objective, scaled so that it equals the normalized FI.

    Raises :class:`~qlmpt.quantizer.QuantizerError` for invalid thresholds.
    """
    spec = build_quantizer(kind, q, thresholds)
    return float(_batch_objective(spec.kind, q, np.asarray(spec.thresholds) / sigma_w, pe)[0])


def normalized_fi(kind, q, thresholds, pe, sigma_w=1.0):
    """Quantized over clairvoyant Fisher information at p = 0 (homogeneous network)."""
    return fi_objective(kind, q, thresholds, pe, sigma_w)


def are_of_spec(spec: QuantizerSpec, pe, sigma_w=1.0):
    """ARE of a given quantizer; ``inf`` for a degenerate one."""
    nfi = normalized_fi(spec.kind, spec.q, spec.thresholds, pe, sigma_w)
    return 1.0 / nfi if nfi > 0 else np.inf


def _result(kind, q, tn, pe, sigma_w):
    tn = _strictly_increasing(np.sort(np.asarray(tn, dtype=float)))
    spec = build_quantizer(kind, q, tn * sigma_w)
    obj = float(_batch_objective(kind, q, tn, pe)[0])
    return DesignResult(spec=spec, objective=obj, normalized_fi=obj, are=1.0 / obj if obj > 0 else np.inf, pe=float(pe))


def _strictly_increasing(t):
    t = t.copy()
    for k in range(1, t.size):
        if t[k] <= t[k - 1]:
            t[k] = np.nextafter(t[k - 1], np.inf)
    return t


def grid_search_1d(kind, pe, sigma_w=1.0, grid=None) -> DesignResult:
    """Exhaustive one-bit design over a threshold grid (normalized units if ``grid`` is None)."""
    if grid is None:
        lo, hi = RQ_BOUNDS if kind == RQ else (0.001, LQ_BOUNDS[1])
        grid = np.arange(lo, hi + 1e-12, 0.001) * sigma_w
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty threshold grid")
    if kind == LQ:
        grid = grid[grid > 0]
    vals = _batch_objective(kind, 1, grid[:, None] / sigma_w, pe)
    best = int(np.argmax(vals))
    return _result(kind, 1, [grid[best] / sigma_w], pe, sigma_w)


def fi_sweep_1d(pe, taus, kind=LQ):
    """Normalized FI of a one-bit quantizer over normalized thresholds ``taus``."""
    taus = np.asarray(taus, dtype=float)
    return _batch_objective(kind, 1, taus[:, None], pe)


def _pso_run(kind, q, pe, params, lo, hi, rng):
    dim = 2**q - 1
    span = hi - lo
    x = np.sort(rng.uniform(lo, hi, (params.swarm_size, dim)), axis=1)
    v = rng.uniform(-span, span, x.shape) * 0.1
    f = _batch_objective(kind, q, x, pe)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(f))
    gbest, gbest_f = x[g].copy(), f[g]
    for _ in range(params.iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = params.inertia * v + params.cognitive * r1 * (pbest - x) + params.social * r2 * (gbest - x)
        np.clip(v, -span, span, out=v)
        x = np.sort(np.clip(x + v, lo, hi), axis=1)
        f = _batch_objective(kind, q, x, pe)
        better = f > pbest_f
        pbest[better] = x[better]
        pbest_f[better] = f[better]
        g = int(np.argmax(pbest_f))
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g].copy(), pbest_f[g]
    return gbest, gbest_f


def pso_optimize(kind, q, pe, sigma_w=1.0, params: PsoParams = None) -> DesignResult:
    """Maximize the design objective with a particle swarm.

    Particles live in normalized threshold space; feasibility (increasing
    thresholds) is restored after every move by sorting coordinates. The
    best of ``params.restarts`` independent swarms is returned, ties going
    to the earliest restart.
    """
    params = params or PsoParams()
    lo, hi = params.bounds or (RQ_BOUNDS if kind == RQ else LQ_BOUNDS)
    seeds = np.random.SeedSequence(params.seed).spawn(params.restarts)
    best_x, best_f = None, -np.inf
    for ss in seeds:
        x, f = _pso_run(kind, q, pe, params, lo, hi, np.random.default_rng(ss))
        if f > best_f:
            best_x, best_f = x, f
    return _result(kind, q, best_x, pe, sigma_w)


def random_feasible_best(kind, q, pe, n=1000, seed=0, bounds=None):
    """Best objective among ``n`` sorted-uniform random threshold vectors (a baseline)."""
    lo, hi = bounds or (RQ_BOUNDS if kind == RQ else LQ_BOUNDS)
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(lo, hi, (n, 2**q - 1)), axis=1)
    return float(np.max(_batch_objective(kind, q, x, pe)))


def design(kind, q, pe, sigma_w=1.0, params: PsoParams = None, range_factor=3.0) -> DesignResult:
    """Quantizer for ``kind`` in {"rq", "lq", "lqu"}; one-bit RQ/LQ use the grid oracle."""
    if kind == LQU:
        spec = build_lqu(q, sigma_w, range_factor)
        obj = normalized_fi(LQ, q, spec.thresholds, pe, sigma_w)
        return DesignResult(spec=spec, objective=obj, normalized_fi=obj, are=1.0 / obj if obj > 0 else np.inf, pe=float(pe))
    if q == 1 and params is None:
        return grid_search_1d(kind, pe, sigma_w)
    return pso_optimize(kind, q, pe, sigma_w, params)


def are(kind, q, pe, optimizer="pso", params: PsoParams = None, range_factor=3.0):
    """Asymptotic relative efficiency: clairvoyant-equivalent sensor-count ratio.

    ``optimizer`` is ``"pso"`` or ``"grid"`` (one-bit only); ``kind="lqu"``
    ignores it and uses uniform thresholds with span ``range_factor``.
    """
    if kind == LQU:
        return design(LQU, q, pe, range_factor=range_factor).are
    if optimizer == "grid":
        if q != 1:
            raise ValueError("grid optimizer only supports q = 1")
        return grid_search_1d(kind, pe).are
    if optimizer != "pso":
        raise ValueError(f"unknown optimizer {optimizer!r}")
    return pso_optimize(kind, q, pe, params=params).are


def design_result_dict(res: DesignResult) -> dict:
    d = asdict(res)
    d["spec"] = res.spec.to_dict()
    return d
