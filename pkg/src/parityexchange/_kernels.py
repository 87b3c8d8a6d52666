"""Compiled inner loops.  All state vectors are complex128 arrays over an
active list of basis indices ``states``; ``pos[b]`` maps a basis index back to
its slot (or -1 when it lies outside the active set)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_terms(diag, x_sites, x_scale, edge_a, edge_b, edge_coef, ex_scale, psi, out, states, pos):
    for k in range(states.shape[0]):
        b = states[k]
        acc = diag[k] * psi[k]
        if x_scale != 0.0:
            for i in x_sites:
                acc += x_scale * psi[pos[b ^ (1 << i)]]
        if ex_scale != 0.0:
            for e in range(edge_a.shape[0]):
                a = edge_a[e]
                c = edge_b[e]
                if ((b >> a) & 1) != ((b >> c) & 1):
                    acc += ex_scale * edge_coef[e] * psi[pos[b ^ ((1 << a) | (1 << c))]]
        out[k] = acc


@njit(cache=True)
def _deriv(t, t_final, gamma, h_init, h_prob, init_min, prob_min,
           x_sites, edge_a, edge_b, edge_coef, psi, out, states, pos):
    s = t / t_final
    a_w = (1.0 - s) * (1.0 - s)
    drive_w = gamma * s * (1.0 - s)
    # scalar shift only changes the global phase; it keeps |E| dt small near the low-energy band
    shift = a_w * init_min + s * prob_min
    for k in range(states.shape[0]):
        b = states[k]
        acc = (a_w * h_init[k] + s * h_prob[k] - shift) * psi[k]
        if drive_w != 0.0:
            off = 0.0j
            for i in x_sites:
                off += psi[pos[b ^ (1 << i)]]
            for e in range(edge_a.shape[0]):
                a = edge_a[e]
                c = edge_b[e]
                if ((b >> a) & 1) != ((b >> c) & 1):
                    off += edge_coef[e] * psi[pos[b ^ ((1 << a) | (1 << c))]]
            acc += drive_w * off
        out[k] = -1j * acc


@njit(cache=True)
def rk4_segment(psi, t0, n_steps, h, t_final, gamma, h_init, h_prob,
                x_sites, edge_a, edge_b, edge_coef, states, pos):
    """Advance ``psi`` in place by ``n_steps`` classical RK4 steps of size ``h``."""
    n = psi.shape[0]
    init_min = h_init.min()
    prob_min = h_prob.min()
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    t = t0
    for _ in range(n_steps):
        _deriv(t, t_final, gamma, h_init, h_prob, init_min, prob_min,
               x_sites, edge_a, edge_b, edge_coef, psi, k1, states, pos)
        for k in range(n):
            tmp[k] = psi[k] + 0.5 * h * k1[k]
        _deriv(t + 0.5 * h, t_final, gamma, h_init, h_prob, init_min, prob_min,
               x_sites, edge_a, edge_b, edge_coef, tmp, k2, states, pos)
        for k in range(n):
            tmp[k] = psi[k] + 0.5 * h * k2[k]
        _deriv(t + 0.5 * h, t_final, gamma, h_init, h_prob, init_min, prob_min,
               x_sites, edge_a, edge_b, edge_coef, tmp, k3, states, pos)
        for k in range(n):
            tmp[k] = psi[k] + h * k3[k]
        _deriv(t + h, t_final, gamma, h_init, h_prob, init_min, prob_min,
               x_sites, edge_a, edge_b, edge_coef, tmp, k4, states, pos)
        for k in range(n):
            psi[k] += (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
        t += h
    return t


# ---------------------------------------------------------------------------
# digital protocol
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rotate_x(psi, site, angle):
    c = np.cos(angle)
    s = -1j * np.sin(angle)
    m = 1 << site
    for b in range(psi.shape[0]):
        if b & m == 0:
            u = psi[b]
            v = psi[b | m]
            psi[b] = c * u + s * v
            psi[b | m] = s * u + c * v


@njit(cache=True)
def _rotate_exchange(psi, a, c_site, angle):
    c = np.cos(angle)
    s = -1j * np.sin(angle)
    ma = 1 << a
    mc = 1 << c_site
    for b in range(psi.shape[0]):
        # visit each (bit a, bit c) = (0, 1) state once with its (1, 0) partner
        if (b & ma) == 0 and (b & mc) != 0:
            p = b ^ (ma | mc)
            u = psi[b]
            v = psi[p]
            psi[b] = c * u + s * v
            psi[p] = s * u + c * v


@njit(cache=True)
def qaoa_state_into(params, p, init, h_final, h_c, drive_sites, edge_a, edge_b, out):
    n_edges = edge_a.shape[0]
    per_layer = 3 + n_edges
    for b in range(init.shape[0]):
        out[b] = init[b]
    for j in range(p):
        base = j * per_layer
        alpha = params[base]
        beta = params[base + 1]
        gamma = params[base + 2]
        for b in range(out.shape[0]):
            out[b] *= np.exp(-1j * (alpha * h_final[b] + beta * h_c[b]))
        for i in drive_sites:
            _rotate_x(out, i, gamma)
        for e in range(n_edges):
            _rotate_exchange(out, edge_a[e], edge_b[e], params[base + 3 + e])


@njit(cache=True)
def hill_descent(params, choices, deltas, p, init, h_final, h_c, drive_sites,
                 edge_a, edge_b, cost_diag, target_idx, observable):
    """Random single-parameter hill descent, one row of ``params`` per restart.

    Returns cost, target probability and observable traces of the accepted
    state, each with ``iters + 1`` entries per restart.
    """
    n_restarts, iters = choices.shape
    dim = init.shape[0]
    psi = np.empty(dim, np.complex128)
    cost_trace = np.empty((n_restarts, iters + 1))
    p_trace = np.empty((n_restarts, iters + 1))
    obs_trace = np.empty((n_restarts, iters + 1))
    for r in range(n_restarts):
        cur = params[r].copy()
        qaoa_state_into(cur, p, init, h_final, h_c, drive_sites, edge_a, edge_b, psi)
        cost = 0.0
        obs = 0.0
        for b in range(dim):
            w = psi[b].real ** 2 + psi[b].imag ** 2
            cost += w * cost_diag[b]
            obs += w * observable[b]
        pt = 0.0
        for t in target_idx:
            pt += psi[t].real ** 2 + psi[t].imag ** 2
        cost_trace[r, 0] = cost
        p_trace[r, 0] = pt
        obs_trace[r, 0] = obs
        for it in range(iters):
            k = choices[r, it]
            old = cur[k]
            cur[k] = old + deltas[r, it]
            qaoa_state_into(cur, p, init, h_final, h_c, drive_sites, edge_a, edge_b, psi)
            new = 0.0
            for b in range(dim):
                new += (psi[b].real ** 2 + psi[b].imag ** 2) * cost_diag[b]
            if new < cost:
                cost = new
                obs = 0.0
                for b in range(dim):
                    obs += (psi[b].real ** 2 + psi[b].imag ** 2) * observable[b]
                pt = 0.0
                for t in target_idx:
                    pt += psi[t].real ** 2 + psi[t].imag ** 2
            else:
                cur[k] = old
            cost_trace[r, it + 1] = cost
            p_trace[r, it + 1] = pt
            obs_trace[r, it + 1] = obs
        params[r] = cur
    return cost_trace, p_trace, obs_trace
