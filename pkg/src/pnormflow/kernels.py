"""Hot loops of the coordinate solver.

All state lives in flat arrays sized to the graph:

``x``       heights, zero outside the touched set
``grad``    partial derivatives of the smoothed dual objective; only valid
            where ``touched`` is set (an untouched node has ``grad = deg``)
``touched`` membership flags, ``tlist[:nt]`` lists the same nodes in the
            order they were first touched

Only entries reachable from nodes that receive mass are ever read or
written, so the work per push is ``O(deg)``.
"""
import math

import numpy as np

from ._accel import njit


@njit(cache=True, nogil=True)
def flow_term(y, mu, q):
    """Flow along an edge whose tail is ``y`` above its head."""
    if q == 2.0:
        return y
    return (y * y + mu * mu) ** (0.5 * q - 1.0) * y


@njit(cache=True, nogil=True)
def node_gradient(indptr, indices, x, src, deg, v, mu, q):
    xv = x[v]
    s = 0.0
    for k in range(indptr[v], indptr[v + 1]):
        s += flow_term(xv - x[indices[k]], mu, q)
    return s - src[v] + deg[v]


@njit(cache=True, nogil=True)
def shifted_gradient(indptr, indices, x, src, deg, v, t, mu, q):
    """Partial derivative at ``v`` after raising ``x[v]`` by ``t``."""
    xv = x[v] + t
    s = 0.0
    for k in range(indptr[v], indptr[v + 1]):
        s += flow_term(xv - x[indices[k]], mu, q)
    return s - src[v] + deg[v]


@njit(cache=True, nogil=True)
def _touch(u, grad, deg, src, touched, tlist, nt):
    if not touched[u]:
        touched[u] = True
        grad[u] = deg[u] - src[u]
        tlist[nt] = u
        nt += 1
    return nt


@njit(cache=True, nogil=True)
def flow_slope(y, mu, q):
    """Derivative of :func:`flow_term` in ``y``."""
    if q == 2.0:
        return 1.0
    s = y * y + mu * mu
    return s ** (0.5 * q - 2.0) * ((q - 1.0) * y * y + mu * mu)


@njit(cache=True, nogil=True)
def shifted_gradient_slope(indptr, indices, x, src, deg, v, t, mu, q):
    """Partial gradient at ``v`` after raising ``x[v]`` by ``t``, and its slope in ``t``."""
    xv = x[v] + t
    s = 0.0
    ds = 0.0
    for k in range(indptr[v], indptr[v + 1]):
        y = xv - x[indices[k]]
        s += flow_term(y, mu, q)
        ds += flow_slope(y, mu, q)
    return s - src[v] + deg[v], ds


@njit(cache=True, nogil=True)
def line_search_step(indptr, indices, x, src, deg, v, g0, mu, q, rtol, gtol):
    """Coordinate minimisation step along ``e_v``, approached from below.

    The partial gradient ``h(t) = grad_v(x + t e_v)`` is increasing in ``t``.
    A root is bracketed by doubling from the fixed coordinate step, then
    located by Newton steps that fall back to bisection whenever they leave
    the bracket. Iteration stops once ``-gtol <= h(lo) <= 0`` or the bracket
    is narrower than ``rtol * (x[v] + hi)``. The lower end is returned so the
    gradient at ``v`` stays nonpositive. Returns ``(t, h(t))``; ``t < 0``
    signals a bracket failure.
    """
    d = deg[v]
    if q == 2.0:
        lo = -g0 / d
        return lo, shifted_gradient(indptr, indices, x, src, deg, v, lo, mu, q)
    lo = 0.0
    glo = g0
    hi = -g0 / d * mu ** (2.0 - q)
    if not hi > 0.0:
        return -1.0, g0
    ghi, dhi = shifted_gradient_slope(indptr, indices, x, src, deg, v, hi, mu, q)
    doublings = 0
    while ghi < 0.0:
        if doublings == 2100:
            return -1.0, g0
        lo = hi
        glo = ghi
        # Newton from the current point overshoots on the concave branch,
        # which is what a bracket needs; never grow by less than doubling
        step = -ghi / dhi if dhi > 0.0 else hi
        hi = hi + max(step, hi)
        ghi, dhi = shifted_gradient_slope(indptr, indices, x, src, deg, v, hi, mu, q)
        doublings += 1
    if ghi == 0.0:
        return hi, ghi
    base = x[v]
    t = hi
    gt = ghi
    dt = dhi
    for _ in range(200):
        if glo >= -gtol or hi - lo <= rtol * (base + hi):
            break
        cand = t - gt / dt if dt > 0.0 else 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        t = cand
        gt, dt = shifted_gradient_slope(indptr, indices, x, src, deg, v, t, mu, q)
        if gt < 0.0:
            lo = t
            glo = gt
        elif gt > 0.0:
            hi = t
        else:
            return t, gt
    return lo, glo


@njit(cache=True, nogil=True)
def coordinate_pass(indptr, indices, deg, src, x, grad, touched, tlist, nt,
                    order, count, mu, q, tol, line_search, rtol, budget, check, checktol):
    """Apply one coordinate step to each of ``order[:count]`` still below ``-tol``.

    Returns ``(pushes, nt, status, n_checks, n_violations)``. ``status`` is 0
    on a finished pass, 1 when ``budget`` pushes ran out and 2 when the line
    search failed to bracket. With ``check`` set, every update is audited
    for nondecreasing heights and nonpositive partial gradients on the
    support of ``x``.
    """
    pushes = 0
    n_checks = 0
    n_viol = 0
    fixed = mu ** (2.0 - q)
    for idx in range(count):
        v = order[idx]
        g0 = grad[v]
        if not g0 < -tol:
            continue
        if pushes >= budget:
            return pushes, nt, 1, n_checks, n_viol
        if line_search or q == 2.0:
            t, gnew = line_search_step(indptr, indices, x, src, deg, v, g0, mu, q, rtol,
                                       1e-3 * tol)
            if t < 0.0:
                return pushes, nt, 2, n_checks, n_viol
        else:
            t = -fixed * g0 / deg[v]
            gnew = shifted_gradient(indptr, indices, x, src, deg, v, t, mu, q)
        if q == 2.0:
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                nt = _touch(u, grad, deg, src, touched, tlist, nt)
                grad[u] -= t
            x[v] += t
            grad[v] = 0.0
        else:
            xold = x[v]
            xnew = xold + t
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                nt = _touch(u, grad, deg, src, touched, tlist, nt)
                xu = x[u]
                grad[u] += flow_term(xu - xnew, mu, q) - flow_term(xu - xold, mu, q)
            x[v] = xnew
            grad[v] = gnew
        pushes += 1
        if check:
            n_checks += 1
            if t < 0.0:
                n_viol += 1
            if x[v] > 0.0 and grad[v] > checktol:
                n_viol += 1
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                if x[u] > 0.0 and grad[u] > checktol:
                    n_viol += 1
    return pushes, nt, 0, n_checks, n_viol


# run_epochs status codes
CONVERGED = 0
BUDGET = 1
BRACKET_FAILURE = 2
LOCALITY_VIOLATION = 3
NEED_RANDOM = 4
EPOCH_LIMIT = 5


@njit(cache=True, nogil=True)
def run_epochs(indptr, indices, deg, src, x, grad, touched, tlist, nt, mu, q, tol,
               line_search, shuffle, rbuf, rpos, budget, max_epochs, check, total_mass,
               refreshed):
    """Epoch loop of the coordinate solver.

    Each epoch gathers the touched nodes with partial gradient below
    ``-tol`` and visits them once, in first-touched order or, with
    ``shuffle``, in a Fisher-Yates permutation driven by the uniforms in
    ``rbuf[rpos:]``. When no node is active the gradients are recomputed
    exactly once; the solve has converged if the set is still empty.

    Returns ``(nt, pushes, epochs, rpos, status, checks, violations,
    refreshed)``; ``status`` is one of the module-level codes. The caller
    refills ``rbuf`` on ``NEED_RANDOM`` and resumes with the returned
    ``refreshed`` flag.
    """
    pushes = 0
    epochs = 0
    checks = 0
    viol = 0
    order = np.empty(tlist.shape[0], dtype=np.int64)
    while True:
        count = 0
        for i in range(nt):
            v = tlist[i]
            if grad[v] < -tol:
                order[count] = v
                count += 1
        if count == 0:
            if refreshed:
                return nt, pushes, epochs, rpos, CONVERGED, checks, viol, refreshed
            refresh_gradients(indptr, indices, deg, src, x, grad, tlist, nt, mu, q)
            refreshed = True
            continue
        if epochs >= max_epochs:
            return nt, pushes, epochs, rpos, EPOCH_LIMIT, checks, viol, refreshed
        if pushes >= budget:
            return nt, pushes, epochs, rpos, BUDGET, checks, viol, refreshed
        if shuffle:
            if rbuf.shape[0] - rpos < count - 1:
                return nt, pushes, epochs, rpos, NEED_RANDOM, checks, viol, refreshed
            for i in range(count - 1, 0, -1):
                j = int(rbuf[rpos] * (i + 1))
                rpos += 1
                tmp = order[i]
                order[i] = order[j]
                order[j] = tmp
        refreshed = False
        done, nt, status, c, bad = coordinate_pass(
            indptr, indices, deg, src, x, grad, touched, tlist, nt, order, count,
            mu, q, tol, line_search, 1e-12, budget - pushes, check, tol)
        pushes += done
        checks += c
        viol += bad
        epochs += 1
        if status == 2:
            return nt, pushes, epochs, rpos, BRACKET_FAILURE, checks, viol, refreshed
        if support_volume(deg, x, tlist, nt) > total_mass:
            return nt, pushes, epochs, rpos, LOCALITY_VIOLATION, checks, viol, refreshed
        if status == 1:
            return nt, pushes, epochs, rpos, BUDGET, checks, viol, refreshed


@njit(cache=True, nogil=True)
def refresh_gradients(indptr, indices, deg, src, x, grad, tlist, nt, mu, q):
    """Recompute ``grad`` from scratch on the touched nodes."""
    for i in range(nt):
        v = tlist[i]
        grad[v] = node_gradient(indptr, indices, x, src, deg, v, mu, q)


@njit(cache=True, nogil=True)
def support_volume(deg, x, tlist, nt):
    vol = 0
    for i in range(nt):
        v = tlist[i]
        if x[v] > 0.0:
            vol += deg[v]
    return vol


@njit(cache=True, nogil=True)
def local_objective(indptr, indices, deg, src, x, tlist, nt, m, mu, q):
    """Smoothed dual objective, summing only edges with a raised endpoint.

    Each of the remaining edges has zero height difference and contributes
    the constant ``mu**q / q``.
    """
    lin = 0.0
    quad = 0.0
    counted = 0
    for i in range(nt):
        v = tlist[i]
        xv = x[v]
        lin += xv * (src[v] - deg[v])
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            xu = x[u]
            # each edge once: from its higher endpoint, ties to the lower id
            if xv > xu or (xv == xu and xv > 0.0 and v < u):
                y = xv - xu
                if q == 2.0:
                    quad += y * y
                else:
                    quad += (y * y + mu * mu) ** (0.5 * q)
                counted += 1
    if q != 2.0:
        quad += (m - counted) * mu ** q
    return quad / q - lin


@njit(cache=True, nogil=True)
def sweep_profile(indptr, indices, deg, order, total_volume):
    """Cut size, volume and conductance of every prefix of ``order``."""
    n = order.shape[0]
    inside = np.zeros(deg.shape[0], dtype=np.bool_)
    cond = np.empty(n, dtype=np.float64)
    cuts = np.empty(n, dtype=np.int64)
    vols = np.empty(n, dtype=np.int64)
    cut = 0
    vol = 0
    for i in range(n):
        v = order[i]
        inner = 0
        for k in range(indptr[v], indptr[v + 1]):
            if inside[indices[k]]:
                inner += 1
        inside[v] = True
        vol += deg[v]
        cut += deg[v] - 2 * inner
        denom = min(vol, total_volume - vol)
        cuts[i] = cut
        vols[i] = vol
        cond[i] = cut / denom if denom > 0 else math.inf
    return cond, cuts, vols
