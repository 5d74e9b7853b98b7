"""Rounding heights to a cluster, cluster metrics and the density search."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .diffusion import DualSolution, make_problem, solve
from .errors import InfeasibleMassError, NoClusterError, ParameterError
from .graph import Graph, NodeSet, conductance

log = logging.getLogger(__name__)

METRIC_FIELDS = ("precision", "recall", "f1", "jaccard", "conductance",
                 "delta", "p", "eps", "pushes", "touched")


@dataclass(frozen=True, eq=False)
class SweepResult:
    order: np.ndarray
    best_cut: NodeSet
    best_conductance: float
    profile: np.ndarray

    @property
    def best_size(self) -> int:
        return len(self.best_cut)


@dataclass(frozen=True)
class ClusterMetrics:
    precision: float
    recall: float
    f1: float
    conductance: float
    jaccard: float

    def as_dict(self) -> dict:
        return asdict(self)


def _support_order(g: Graph, x) -> np.ndarray:
    if isinstance(x, DualSolution):
        nodes = x.support
        vals = x.x[nodes]
    elif isinstance(x, Mapping):
        items = [(int(v), float(h)) for v, h in x.items() if h > 0]
        nodes = np.array([v for v, _ in items], dtype=np.int64)
        vals = np.array([h for _, h in items], dtype=np.float64)
    else:
        arr = np.asarray(x, dtype=np.float64)
        nodes = np.flatnonzero(arr > 0)
        vals = arr[nodes]
    # decreasing height, ties by ascending id
    return nodes[np.lexsort((nodes, -vals))].astype(np.int64)


def sweep_cut(g: Graph, x) -> SweepResult:
    """Best level cut of the nodes with positive height.

    Prefixes of the nodes sorted by decreasing height (ties by id) are
    scanned with incremental cut and volume updates; the first prefix of
    minimum conductance wins.
    """
    order = _support_order(g, x)
    if order.size == 0:
        raise NoClusterError("heights have empty support; nothing to sweep")
    if order.size == g.n:
        raise NoClusterError("heights are positive on every node; no proper cut exists")
    cond, _, vols = kernels.sweep_profile(g.indptr, g.indices, g.degrees, order,
                                          g.total_volume)
    k = int(np.argmin(cond))
    if 2 * vols[k] > g.total_volume:
        log.warning("best sweep cut holds %d of %d volume", vols[k], g.total_volume)
    best = NodeSet(frozenset(int(v) for v in order[:k + 1]), int(vols[k]))
    return SweepResult(order, best, float(cond[k]), cond)


def naive_sweep_profile(g: Graph, x) -> np.ndarray:
    """Per-prefix conductance recomputed from scratch, for cross-checking."""
    order = _support_order(g, x)
    return np.array([conductance(g, order[:i + 1]) for i in range(order.size)])


def evaluate(g: Graph, found, truth) -> ClusterMetrics:
    found = set(found.members if isinstance(found, NodeSet) else map(int, found))
    truth = set(truth.members if isinstance(truth, NodeSet) else map(int, truth))
    if not found or not truth:
        raise ParameterError("found and truth clusters must both be nonempty")
    hit = len(found & truth)
    precision = hit / len(found)
    recall = hit / len(truth)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    jaccard = hit / len(found | truth)
    phi = conductance(g, found) if len(found) < g.n else math.nan
    return ClusterMetrics(precision, recall, f1, phi, jaccard)


def metrics_record(metrics: ClusterMetrics | None, sweep: SweepResult | None,
                   sol: DualSolution | None) -> dict:
    """Flat record with every field of ``METRIC_FIELDS``; unknown values are NaN."""
    rec = dict.fromkeys(METRIC_FIELDS, math.nan)
    if metrics is not None:
        rec.update(metrics.as_dict())
    elif sweep is not None:
        rec["conductance"] = sweep.best_conductance
    if sol is not None:
        prob = sol.problem
        rec.update(delta=prob.delta, p=prob.p, eps=prob.eps, pushes=sol.pushes,
                   touched=int(len(sol.touched)))
    return rec


def run_pipeline(g: Graph, seeds, delta: float, p: float, eps: float | None = None,
                 rng_seed=None, **kwargs):
    """Diffuse from ``seeds`` and sweep; returns ``(SweepResult, DualSolution)``."""
    opts = {} if eps is None else {"eps": eps}
    line_search = kwargs.pop("line_search", True)
    prob = make_problem(g, seeds, delta, p, **opts, **kwargs)
    sol = solve(prob, seed=rng_seed, line_search=line_search)
    return sweep_cut(g, sol), sol


def default_delta_grid(baseline: float = 2.0) -> list[float]:
    return [baseline * k for k in (1, 2, 4, 8, 16)]


def delta_search(g: Graph, seeds, p: float, eps: float | None = None,
                 delta_grid: Sequence[float] | None = None, rng_seed=None, **kwargs):
    """Run the pipeline for each density in ``delta_grid``; keep the lowest conductance.

    Infeasible densities are skipped with a warning. Ties go to the smaller
    density. Returns ``(SweepResult, delta)``.
    """
    grid = sorted(default_delta_grid() if delta_grid is None else delta_grid)
    best = None
    for delta in grid:
        try:
            sweep, _ = run_pipeline(g, seeds, delta, p, eps, rng_seed, **kwargs)
        except InfeasibleMassError as exc:
            warnings.warn(f"skipping delta={delta}: {exc}", stacklevel=2)
            continue
        if best is None or sweep.best_conductance < best[0].best_conductance:
            best = (sweep, delta)
    if best is None:
        raise InfeasibleMassError("delta: every grid value exceeds the graph volume")
    return best
