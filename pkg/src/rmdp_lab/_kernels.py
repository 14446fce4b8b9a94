"""Compiled inner loops for the tabular fixed-point solvers.

Every explorer backup in this package has the form

    Q(s, a) = bonus(s, a)
              + sum_s' W(s, a, s') [R(s, a, s') + gamma V(s')]
              + opt(s, a) * max_s' [R(s, a, s') + gamma V(s')]

except MBIE, whose inner maximisation over an L1 ball has its own kernel.  Sweeps are synchronous (Jacobi) so the result does
not depend on state ordering.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def mixture_backup(weights, opt, bonus, reward, gamma, v, q):
    n_s, n_a, _ = weights.shape
    for s in range(n_s):
        for a in range(n_a):
            acc = bonus[s, a]
            best = -np.inf
            for s2 in range(n_s):
                u = reward[s, a, s2] + gamma * v[s2]
                acc += weights[s, a, s2] * u
                if u > best:
                    best = u
            if opt[s, a] != 0.0:
                acc += opt[s, a] * best
            q[s, a] = acc


@njit(cache=True)
def mixture_fixed_point(weights, opt, bonus, reward, gamma, thresh, max_iter):
    n_s, n_a, _ = weights.shape
    v = np.zeros(n_s)
    v_new = np.zeros(n_s)
    q = np.zeros((n_s, n_a))
    for it in range(max_iter):
        mixture_backup(weights, opt, bonus, reward, gamma, v, q)
        diff = 0.0
        for s in range(n_s):
            m = q[s, 0]
            for a in range(1, n_a):
                if q[s, a] > m:
                    m = q[s, a]
            v_new[s] = m
            d = abs(m - v[s])
            if d > diff:
                diff = d
        v, v_new = v_new, v
        if diff <= thresh:
            return v, q, it + 1
    return v, q, max_iter


@njit(cache=True)
def policy_fixed_point(transition, reward, policy, gamma, thresh, max_iter):
    n_s = transition.shape[0]
    v = np.zeros(n_s)
    v_new = np.zeros(n_s)
    for it in range(max_iter):
        diff = 0.0
        for s in range(n_s):
            a = policy[s]
            acc = 0.0
            for s2 in range(n_s):
                acc += transition[s, a, s2] * (reward[s, a, s2] + gamma * v[s2])
            v_new[s] = acc
            d = abs(acc - v[s])
            if d > diff:
                diff = d
        v, v_new = v_new, v
        if diff <= thresh:
            return v, it + 1
    return v, max_iter


@njit(cache=True)
def l1_optimistic(p_hat, values, radius, out):
    """Greedy mass shift: move up to radius/2 onto the best successor,
    taking it from the worst successors first.  Ties resolve to the
    lowest index on both ends."""
    n = p_hat.shape[0]
    for i in range(n):
        out[i] = p_hat[i]
    best = 0
    for i in range(1, n):
        if values[i] > values[best]:
            best = i
    r = radius
    if r > 2.0:
        r = 2.0
    add = r / 2.0
    room = 1.0 - p_hat[best]
    if add > room:
        add = room
    if add <= 0.0:
        return
    out[best] += add
    left = add
    while left > 0.0:
        # worst remaining successor, lowest index among equal values
        worst = -1
        for i in range(n):
            if i == best or out[i] <= 0.0:
                continue
            if worst < 0 or values[i] < values[worst]:
                worst = i
        if worst < 0:
            break
        take = out[worst]
        if take > left:
            take = left
        out[worst] -= take
        left -= take


@njit(cache=True)
def l1_fixed_point(p_hat, radius, reward, gamma, thresh, max_iter):
    n_s, n_a, _ = p_hat.shape
    v = np.zeros(n_s)
    v_new = np.zeros(n_s)
    q = np.zeros((n_s, n_a))
    u = np.zeros(n_s)
    p_tilde = np.zeros(n_s)
    for it in range(max_iter):
        for s in range(n_s):
            for a in range(n_a):
                for s2 in range(n_s):
                    u[s2] = reward[s, a, s2] + gamma * v[s2]
                l1_optimistic(p_hat[s, a], u, radius[s, a], p_tilde)
                acc = 0.0
                for s2 in range(n_s):
                    acc += p_tilde[s2] * u[s2]
                q[s, a] = acc
        diff = 0.0
        for s in range(n_s):
            m = q[s, 0]
            for a in range(1, n_a):
                if q[s, a] > m:
                    m = q[s, a]
            v_new[s] = m
            d = abs(m - v[s])
            if d > diff:
                diff = d
        v, v_new = v_new, v
        if diff <= thresh:
            return v, q, it + 1
    return v, q, max_iter


@njit(cache=True)
def counts_fixed_point(counts, extra, bonus, reward, gamma, thresh, max_iter):
    """Fixed point of

        Q(s,a) = bonus + (sum_s' c(s,a,s') u(s') + e(s,a) max_s' u(s')) / (c(s,a) + e(s,a))

    with ``u = R + gamma V``.  ``e = inf`` or ``c + e = 0`` gives the fully
    optimistic backup ``bonus + max u``.
    """
    n_s, n_a, _ = counts.shape
    total = np.zeros((n_s, n_a))
    for s in range(n_s):
        for a in range(n_a):
            acc = 0.0
            for s2 in range(n_s):
                acc += counts[s, a, s2]
            total[s, a] = acc
    v = np.zeros(n_s)
    v_new = np.zeros(n_s)
    q = np.zeros((n_s, n_a))
    for it in range(max_iter):
        for s in range(n_s):
            for a in range(n_a):
                e = extra[s, a]
                denom = total[s, a] + e
                acc = 0.0
                best = -np.inf
                for s2 in range(n_s):
                    u = reward[s, a, s2] + gamma * v[s2]
                    acc += counts[s, a, s2] * u
                    if u > best:
                        best = u
                if np.isinf(e) or denom == 0.0:
                    q[s, a] = bonus[s, a] + best
                else:
                    q[s, a] = bonus[s, a] + (acc + e * best) / denom
        diff = 0.0
        for s in range(n_s):
            m = q[s, 0]
            for a in range(1, n_a):
                if q[s, a] > m:
                    m = q[s, a]
            v_new[s] = m
            d = abs(m - v[s])
            if d > diff:
                diff = d
        v, v_new = v_new, v
        if diff <= thresh:
            return v, q, it + 1
    return v, q, max_iter
