"""Compiled dual search for the single-cell problem.

Mirrors the numpy reference functions in :mod:`aircomp.celldual` (``inner_nu``,
``inner_q``, ``lagrangian``, ``dual_subgradient`` and the primal recovery) with
scalar loops, so that the thousands of dual evaluations made by the
coordination protocol do not pay numpy's per-call overhead.
"""
import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True)
def evaluate(h, leak, pb, noise, caps, lam, total_devices, powers, grad):
    """Dual value and primal MSE at ``lam``; fills ``powers`` and the supergradient ``grad``."""
    k_dev, n_caps = leak.shape
    w = h * h
    for k in range(k_dev):
        for j in range(n_caps):
            w[k] += lam[j] * leak[k, j]
    slack = noise
    for j in range(n_caps):
        slack -= lam[j] * caps[j]
    c0 = slack if slack > 1e-12 * noise else 0.0
    b = pb * w * w / (h * h)
    order = np.argsort(b, kind="mergesort")

    # candidates nu_i (i devices at full power) and their objective values
    tail = 0.0
    for k in range(k_dev):
        tail += h[k] * h[k] / w[k]
    best_value = np.inf
    best_nu = 0.0
    best_i = 0
    if c0 > 0:
        nu0 = 1.0 / b[order[0]]
        value0 = c0 * nu0 - tail
    else:
        nu0 = 1.0 / b[order[0]]
        for j in range(n_caps):
            if caps[j] > 0:
                leaked = 0.0
                for k in range(k_dev):
                    leaked += h[k] * h[k] / (w[k] * w[k]) * leak[k, j]
                if leaked > 0 and leaked / caps[j] > nu0:
                    nu0 = leaked / caps[j]
        value0 = 0.0
        for k in range(k_dev):
            q = min(np.sqrt(pb[k] * nu0), h[k] / w[k])
            value0 += w[k] * q * q - 2.0 * h[k] * q
    area = c0
    amplitude = 0.0
    for i in range(1, k_dev + 1):
        d = order[i - 1]
        area += w[d] * pb[d]
        amplitude += h[d] * np.sqrt(pb[d])
        tail -= h[d] * h[d] / w[d]
        upper = 1.0 / b[d]
        lower = 1.0 / b[order[i]] if i < k_dev else 0.0
        nu = (amplitude / area) ** 2
        nu = min(max(nu, lower), upper)
        value = area * nu - 2.0 * amplitude * np.sqrt(nu) - tail
        if value < best_value:
            best_value, best_nu, best_i = value, nu, i
    if value0 < best_value or (c0 == 0 and value0 - best_value <= 64 * _EPS * (abs(best_value) + k_dev)):
        best_nu, best_i = nu0, 0
    nu = best_nu

    dual = total_devices + nu * slack
    for j in range(n_caps):
        grad[j] = -caps[j] * nu
    for k in range(k_dev):
        q = min(np.sqrt(pb[k] * nu), h[k] / w[k])
        dual += w[k] * q * q - 2.0 * h[k] * q
        for j in range(n_caps):
            grad[j] += q * q * leak[k, j]
        powers[k] = min(q * q / nu, pb[k]) if nu > 0 else 0.0

    # uniform shrink onto the IT levels, then the optimal-eta MSE
    shrink = 1.0
    for j in range(n_caps):
        caused = 0.0
        for k in range(k_dev):
            caused += powers[k] * leak[k, j]
        if caused > caps[j]:
            shrink = min(shrink, caps[j] / caused)
    amplitude = 0.0
    received = noise
    for k in range(k_dev):
        powers[k] *= shrink
        amplitude += np.sqrt(powers[k]) * h[k]
        received += powers[k] * h[k] * h[k]
    primal = total_devices - amplitude * amplitude / received if amplitude > 0 else float(total_devices)
    return dual, primal


@njit(cache=True)
def _visit(h, leak, pb, noise, caps, lam, total, state, best_lam, best_powers, powers, grad):
    dual, primal = evaluate(h, leak, pb, noise, caps, lam, total, powers, grad)
    if dual > state[0]:
        state[0] = dual
        best_lam[:] = lam
    if primal < state[1]:
        state[1] = primal
        best_powers[:] = powers


@njit(cache=True)
def search_1d(h, leak, pb, noise, caps, total, tol, max_iters, state, best_lam, best_powers):
    """Bisection on the single multiplier; ``state`` holds (best dual, best primal)."""
    powers = np.empty(len(h))
    grad = np.empty(1)
    lam = np.zeros(1)
    upper = noise / caps[0]
    _visit(h, leak, pb, noise, caps, lam, total, state, best_lam, best_powers, powers, grad)
    if grad[0] <= 0 or state[1] - state[0] <= tol:
        return 1
    lo, hi = 0.0, upper
    lam[0] = hi
    _visit(h, leak, pb, noise, caps, lam, total, state, best_lam, best_powers, powers, grad)
    it = 2
    while it < max_iters and state[1] - state[0] > tol and hi - lo > 4 * _EPS * upper:
        lam[0] = 0.5 * (lo + hi)
        _visit(h, leak, pb, noise, caps, lam, total, state, best_lam, best_powers, powers, grad)
        if grad[0] > 0:
            lo = lam[0]
        else:
            hi = lam[0]
        it += 1
    return it


@njit(cache=True)
def _deep_cut(centre, factor, cut, offset):
    """Shrink ``{c + B u : |u| <= 1}`` to the part with ``cut @ z <= cut @ c - offset``.

    Returns 0 after an in-place update, 1 if the cut was shallow enough to ignore,
    and -1 if it leaves nothing measurable.
    """
    n = len(centre)
    projected = np.zeros(n)
    for a in range(n):
        for b in range(n):
            projected[a] += factor[b, a] * cut[b]
    norm = np.sqrt(np.sum(projected * projected))
    if not (norm > 0) or not np.isfinite(norm):
        return -1
    depth = offset / norm
    if depth >= 1.0:
        return -1
    if depth <= -1.0 / n:
        return 1
    unit = projected / norm
    moved = np.zeros(n)
    for a in range(n):
        for b in range(n):
            moved[a] += factor[a, b] * unit[b]
    centre -= (1.0 + n * depth) / (n + 1) * moved
    shrink = 2.0 * (1.0 + n * depth) / ((n + 1) * (1.0 + depth))
    scale = np.sqrt(n * n * (1.0 - depth * depth) / (n * n - 1.0))
    rank_one = np.sqrt(1.0 - shrink) - 1.0
    for a in range(n):
        for b in range(n):
            factor[a, b] = scale * (factor[a, b] + rank_one * moved[a] * unit[b])
    return 0


@njit(cache=True)
def search_ellipsoid(h, leak, pb, noise, caps, total, tol, max_iters, state, best_lam, best_powers):
    """Ellipsoid method over ``z = lam / lam_max``, the simplex ``{z >= 0, sum z <= 1}``.

    The ellipsoid is kept in factored form so it stays positive definite, and every
    iteration evaluates at the centre pulled back into the simplex, so points on the
    face ``sum z = 1`` (where the optimum often lies) are visited exactly.
    """
    n = len(caps)
    upper = noise / caps
    centre = np.full(n, 0.5 / n)
    factor = np.eye(n) * np.sqrt(n)
    powers = np.empty(len(h))
    grad = np.empty(n)
    _visit(h, leak, pb, noise, caps, np.zeros(n), total, state, best_lam, best_powers, powers, grad)
    it = 1
    while it < max_iters and state[1] - state[0] > tol:
        status = 1
        worst = np.argmin(centre)
        if centre[worst] < 0:
            cut = np.zeros(n)
            cut[worst] = -1.0
            status = _deep_cut(centre, factor, cut, -centre[worst])
        elif centre.sum() > 1.0:
            status = _deep_cut(centre, factor, np.ones(n), centre.sum() - 1.0)
        if status < 0:
            break
        point = np.maximum(centre, 0.0)
        if point.sum() > 1.0:
            point /= point.sum()
        _visit(h, leak, pb, noise, caps, point * upper, total, state, best_lam, best_powers, powers, grad)
        it += 1
        cut = -grad * upper
        if _deep_cut(centre, factor, cut, np.sum(cut * (centre - point))) < 0:
            break
        if np.sqrt(np.sum(factor * factor)) < 1e-15:
            break
    return it
