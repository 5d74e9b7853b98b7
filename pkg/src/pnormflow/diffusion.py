"""p-norm flow diffusion: problem setup, coordinate solvers and flow recovery.

The solvers minimise the smoothed dual

    F_mu(x) = 1/q * sum_{(u,v) in E} ((x(u) - x(v))**2 + mu**2)**(q/2)
              - x . (source - deg)

over ``x >= 0``, where ``q = p / (p - 1)``. At ``q = 2`` the smoothing is
dropped and the update reduces to a push of excess mass.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .errors import (
    BudgetExceededError,
    InfeasibleMassError,
    LineSearchError,
    ParameterError,
    StaleSolutionError,
    UnsupportedExponentError,
)
from .graph import Graph, NodeSet

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-3


@dataclass(frozen=True, eq=False)
class DiffusionProblem:
    graph: Graph
    seeds: NodeSet
    delta: float
    p: float
    q: float
    mu: float
    eps: float
    term_tol: float
    budget: int
    source: dict = field(repr=False)

    @property
    def total_mass(self) -> float:
        return float(sum(self.source.values()))

    @property
    def scale(self) -> float:
        return max(1.0, self.delta)

    def source_array(self) -> np.ndarray:
        src = np.zeros(self.graph.n)
        for v, mass in self.source.items():
            src[v] = mass
        return src


def make_problem(g: Graph, seeds, delta: float, p: float, eps: float = DEFAULT_EPS,
                 mu: float | None = None, term_tol: float | None = None,
                 budget: int | None = None) -> DiffusionProblem:
    """Set up the diffusion started from ``seeds`` with density ``delta``.

    Each seed ``v`` starts with ``delta * deg(v)`` mass; every node can
    settle ``deg(v)``. The smoothing defaults to ``(eps / |mass|)**(1/q)`` and
    the gradient tolerance to ``1e-6 * min(max(1, delta), max_degree)``.
    """
    if not isinstance(seeds, NodeSet):
        seeds = NodeSet.of(g, seeds)
    if len(seeds) == 0:
        raise ParameterError("seeds: at least one seed node is required")
    if not math.isfinite(p) or p < 2:
        raise UnsupportedExponentError(f"p: exponent {p} unsupported, need 2 <= p < inf")
    if not delta > 0:
        raise ParameterError(f"delta: must be positive, got {delta}")
    if not eps > 0:
        raise ParameterError(f"eps: must be positive, got {eps}")
    total = delta * seeds.volume
    if total > g.total_volume:
        raise InfeasibleMassError(
            f"delta: source mass {total:g} exceeds graph volume {g.total_volume}"
        )
    q = 2.0 if p == 2 else p / (p - 1.0)
    if q == 2.0:
        mu = 0.0
    elif mu is None:
        mu = (eps / total) ** (1.0 / q)
    elif not mu > 0:
        raise ParameterError(f"mu: smoothing must be positive for p > 2, got {mu}")
    if term_tol is None:
        # capped by the largest sink so leftover excess stays small next to it
        term_tol = 1e-6 * min(max(1.0, delta), g.max_degree)
    if budget is None:
        budget = int(math.ceil(1e4 * total))
    source = {v: delta * g.degree(v) for v in sorted(seeds.members)}
    return DiffusionProblem(g, seeds, float(delta), float(p), q, float(mu), float(eps),
                            float(term_tol), int(budget), source)


@dataclass(eq=False)
class DualSolution:
    """Heights ``x`` plus the solver bookkeeping.

    ``x`` and ``grad`` are dense arrays over all nodes; only the entries at
    ``touched`` were ever written, so ``grad`` elsewhere is implicitly
    ``deg``.
    """

    problem: DiffusionProblem
    x: np.ndarray
    grad: np.ndarray
    touched: np.ndarray
    epochs: int = 0
    pushes: int = 0
    converged: bool = False
    checks: int = 0
    violations: int = 0

    @property
    def support(self) -> np.ndarray:
        t = self.touched
        return np.sort(t[self.x[t] > 0])

    def heights(self) -> dict:
        return {int(v): float(self.x[v]) for v in self.support}

    def gradient_at(self, v: int) -> float:
        return float(self.grad[v]) if v in set(self.touched.tolist()) else float(
            self.problem.graph.degrees[v] - self.problem.source.get(v, 0.0))

    def gradients(self) -> dict:
        """Partial derivatives on the touched nodes."""
        return {int(v): float(self.grad[v]) for v in self.touched}

    def excess(self) -> dict:
        return {int(v): max(0.0, -float(self.grad[v])) for v in self.touched}

    def mass(self) -> dict:
        """Mass held at each touched node; every other node holds none."""
        deg = self.problem.graph.degrees
        return {int(v): float(deg[v] - self.grad[v]) for v in self.touched}

    def support_volume(self) -> int:
        return int(self.problem.graph.degrees[self.support].sum())

    def objective(self) -> float:
        g, prob = self.problem.graph, self.problem
        t = self.touched
        return float(kernels.local_objective(
            g.indptr, g.indices, g.degrees, prob.source_array(), self.x,
            t, len(t), g.m, prob.mu, prob.q))


@dataclass(frozen=True, eq=False)
class FlowAssignment:
    """Flows on every edge with a raised endpoint, oriented ``u < v``.

    A positive ``values[k]`` moves mass from ``edges[k, 0]`` to
    ``edges[k, 1]``. All other edges carry no flow.
    """

    problem: DiffusionProblem
    edges: np.ndarray
    values: np.ndarray

    def flow(self, u: int, v: int) -> float:
        a, b, sign = (u, v, 1.0) if u < v else (v, u, -1.0)
        hit = np.flatnonzero((self.edges[:, 0] == a) & (self.edges[:, 1] == b))
        return sign * float(self.values[hit[0]]) if hit.size else 0.0

    def as_dict(self) -> dict:
        return {(int(u), int(v)): float(f) for (u, v), f in zip(self.edges, self.values)}

    def mass(self) -> np.ndarray:
        """Dense ``B^T f + source``."""
        m = self.problem.source_array()
        np.add.at(m, self.edges[:, 0], -self.values)
        np.add.at(m, self.edges[:, 1], self.values)
        return m

    def feasibility_residual(self) -> float:
        return float(np.max(self.mass() - self.problem.graph.degrees))

    def cost(self) -> float:
        """``1/p * ||f||_p**p``."""
        p = self.problem.p
        return float(np.sum(np.abs(self.values) ** p) / p)


# gradient and objective, dense reference forms -----------------------------

def _dense(prob: DiffusionProblem, x) -> np.ndarray:
    if isinstance(x, DualSolution):
        return x.x
    if isinstance(x, Mapping):
        arr = np.zeros(prob.graph.n)
        for v, h in x.items():
            arr[int(v)] = h
        return arr
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (prob.graph.n,):
        raise ParameterError(f"x: expected {prob.graph.n} heights, got shape {arr.shape}")
    return arr


def flow_value(y, mu: float, q: float):
    """Flow over an edge whose tail sits ``y`` above its head."""
    y = np.asarray(y, dtype=np.float64)
    if q == 2.0:
        return y
    return (y * y + mu * mu) ** (q / 2 - 1) * y


def gradient(prob: DiffusionProblem, x, v: int) -> float:
    """``d F_mu / d x(v)``, equal to ``deg(v) - mass(v)``."""
    g = prob.graph
    xd = _dense(prob, x)
    return float(kernels.node_gradient(g.indptr, g.indices, xd, prob.source_array(),
                                       g.degrees, int(v), prob.mu, prob.q))


def full_gradient(prob: DiffusionProblem, x, mu: float | None = None) -> np.ndarray:
    g = prob.graph
    mu = prob.mu if mu is None else mu
    xd = _dense(prob, x)
    e = g.edges()
    f = flow_value(xd[e[:, 0]] - xd[e[:, 1]], mu, prob.q)
    out = g.degrees - prob.source_array()
    np.add.at(out, e[:, 0], f)
    np.add.at(out, e[:, 1], -f)
    return out


def objective(prob: DiffusionProblem, x, mu: float | None = None) -> float:
    """Smoothed dual objective over every edge; ``mu=0`` gives the unsmoothed one."""
    g = prob.graph
    mu = prob.mu if mu is None else mu
    xd = _dense(prob, x)
    e = g.edges()
    y = xd[e[:, 0]] - xd[e[:, 1]]
    q = prob.q
    quad = np.sum((y * y + mu * mu) ** (q / 2)) / q
    return float(quad - xd @ (prob.source_array() - g.degrees))


# solvers --------------------------------------------------------------------

def _init_state(prob: DiffusionProblem):
    g = prob.graph
    n = g.n
    x = np.zeros(n)
    grad = np.zeros(n)
    touched = np.zeros(n, dtype=np.bool_)
    tlist = np.empty(n, dtype=np.int64)
    nt = 0
    for v in sorted(prob.seeds.members):
        touched[v] = True
        grad[v] = g.degrees[v] - prob.source[v]
        tlist[nt] = v
        nt += 1
    return x, grad, touched, tlist, nt


_RANDOM_BATCH = 1 << 16


def _run(prob: DiffusionProblem, rng, line_search: bool, trace: Callable | None,
         check: bool):
    g = prob.graph
    src = prob.source_array()
    x, grad, touched, tlist, nt = _init_state(prob)
    tol = prob.term_tol
    total = prob.total_mass
    shuffle = rng is not None
    rbuf = rng.random(_RANDOM_BATCH) if shuffle else np.empty(0)
    rpos = 0
    pushes = checks = violations = epochs = 0
    refreshed = False
    # tracing needs control back after every epoch
    per_call = 1 if trace is not None else 1 << 62
    last_traced = -1

    def emit():
        t = tlist[:nt]
        trace({"epoch": epochs, "active": int((grad[t] < -tol).sum()),
               "max_excess": float(max(0.0, -grad[t].min())),
               "objective": float(kernels.local_objective(
                   g.indptr, g.indices, g.degrees, src, x, tlist, nt, g.m,
                   prob.mu, prob.q))})

    while True:
        if trace is not None and epochs != last_traced:
            emit()
            last_traced = epochs
        nt, done, ep, rpos, status, c, bad, refreshed = kernels.run_epochs(
            g.indptr, g.indices, g.degrees, src, x, grad, touched, tlist, nt,
            prob.mu, prob.q, tol, line_search, shuffle, rbuf, rpos,
            prob.budget - pushes, per_call, check, total, refreshed)
        pushes += done
        epochs += ep
        checks += c
        violations += bad
        if status == kernels.NEED_RANDOM:
            need = max(_RANDOM_BATCH, 2 * nt)
            rbuf = np.concatenate([rbuf[rpos:], rng.random(need)])
            rpos = 0
            continue
        if status == kernels.EPOCH_LIMIT:
            continue
        if status == kernels.BRACKET_FAILURE:
            raise LineSearchError("line search failed to bracket a root; partial "
                                  "gradient is not monotone")
        if status == kernels.LOCALITY_VIOLATION:
            vol = kernels.support_volume(g.degrees, x, tlist, nt)
            raise AssertionError(f"support volume {vol} exceeds source mass {total:g}")
        break
    if trace is not None and epochs != last_traced:
        emit()
    converged = status == kernels.CONVERGED
    return DualSolution(prob, x, grad, tlist[:nt].copy(), epochs, pushes, converged,
                        checks, violations)


def solve_q2(prob: DiffusionProblem, trace: Callable | None = None,
             check: bool = False) -> DualSolution:
    """Push excess mass until every node holds at most its degree (``p = 2``).

    Each pass pushes every node whose excess exceeds ``term_tol``, in the
    order the nodes were first reached. Raises :class:`BudgetExceededError`
    carrying the partial solution when the push budget runs out.
    """
    if prob.q != 2.0:
        raise UnsupportedExponentError(f"p: solve_q2 needs p = 2, got {prob.p}")
    sol = _run(prob, None, True, trace, check)
    if not sol.converged:
        raise BudgetExceededError(
            f"budget: {prob.budget} pushes exhausted before convergence", sol)
    return sol


def solve_general(prob: DiffusionProblem, seed=None, line_search: bool = True,
                  trace: Callable | None = None, check: bool = False) -> DualSolution:
    """Randomised coordinate descent for ``p > 2``.

    Every epoch collects the nodes with partial gradient below ``-term_tol``
    and visits them once in a random order. A visit either minimises along
    the coordinate (Newton safeguarded by a bracket, the default) or takes
    the fixed step
    ``mu**(2-q) / deg``. When the push budget runs out the partial solution
    is returned with ``converged=False``.
    """
    if prob.q == 2.0:
        raise UnsupportedExponentError("p: solve_general needs p > 2; use solve_q2")
    rng = np.random.default_rng(seed)
    sol = _run(prob, rng, line_search, trace, check)
    if not sol.converged:
        log.warning("push budget of %d exhausted after %d epochs", prob.budget, sol.epochs)
    return sol


def solve(prob: DiffusionProblem, seed=None, line_search: bool = True,
          trace: Callable | None = None, check: bool = False) -> DualSolution:
    """Dispatch to :func:`solve_q2` or :func:`solve_general`."""
    if prob.q == 2.0:
        return solve_q2(prob, trace=trace, check=check)
    return solve_general(prob, seed=seed, line_search=line_search, trace=trace, check=check)


def recover_flow(prob: DiffusionProblem, sol: DualSolution) -> FlowAssignment:
    """Edge flows induced by the heights of a converged solution."""
    if not sol.converged:
        raise StaleSolutionError("solution did not converge; flows would be infeasible")
    g = prob.graph
    supp = sol.support
    if supp.size == 0:
        return FlowAssignment(prob, np.empty((0, 2), dtype=np.int64), np.empty(0))
    owner = np.repeat(supp, g.degrees[supp])
    other = np.concatenate([g.neighbors(v) for v in supp])
    e = np.unique(np.stack([np.minimum(owner, other), np.maximum(owner, other)], axis=1),
                  axis=0)
    f = flow_value(sol.x[e[:, 0]] - sol.x[e[:, 1]], prob.mu, prob.q)
    return FlowAssignment(prob, e, f)


# independent dense reference --------------------------------------------------

def oracle_solve(prob: DiffusionProblem, tol: float = 1e-9, max_iter: int = 200_000,
                 mu: float | None = None) -> DualSolution:
    """Dense projected gradient reference solver for small graphs.

    Spectral projected gradient: Barzilai-Borwein trial steps with a
    nonmonotone Armijo backtrack along the projected direction, stopping
    once ``||x - max(0, x - grad)||_inf <= tol``.
    """
    g = prob.graph
    mu = prob.mu if mu is None else mu
    n = g.n
    e = g.edges()
    b = np.zeros((len(e), n))
    b[np.arange(len(e)), e[:, 0]] = 1.0
    b[np.arange(len(e)), e[:, 1]] = -1.0
    lin = prob.source_array() - g.degrees
    q = prob.q

    def fun(x):
        y = b @ x
        return np.sum((y * y + mu * mu) ** (q / 2)) / q - x @ lin

    def jac(x):
        y = b @ x
        return b.T @ ((y * y + mu * mu) ** (q / 2 - 1) * y) - lin

    x = np.maximum(0.0, -jac(np.zeros(n))) / g.degrees
    fx, gx = fun(x), jac(x)
    history = [fx]
    step = 1.0 / (2 * g.max_degree * (mu ** (q - 2) if q < 2 else 1.0))
    converged = False
    for _ in range(max_iter):
        res = np.max(np.abs(x - np.maximum(0.0, x - gx)))
        if res <= tol:
            converged = True
            break
        d = np.maximum(0.0, x - step * gx) - x
        slope = gx @ d
        fref = max(history[-10:])
        lam = 1.0
        while True:
            xn = x + lam * d
            fn = fun(xn)
            if fn <= fref + 1e-4 * lam * slope or lam < 1e-20:
                break
            lam *= 0.5
        gn = jac(xn)
        s, yv = xn - x, gn - gx
        sy = s @ yv
        step = (s @ s) / sy if sy > 0 else step * 2.0
        step = min(max(step, 1e-12), 1e12)
        x, fx, gx = xn, fn, gn
        history.append(fx)
    x = np.maximum(x, 0.0)
    x[x < tol] = 0.0
    return DualSolution(prob, x, full_gradient(prob, x, mu), np.arange(n),
                        epochs=0, pushes=0, converged=converged)
