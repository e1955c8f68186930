"""Pure-numpy kernels. Reference path; numba mirrors these signatures."""

import numpy as np


def pair_sqdists(x):
    n = x.shape[0]
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    pos = 0
    for i in range(n - 1):
        d = x[i + 1:] - x[i]
        m = n - 1 - i
        out[pos:pos + m] = np.sum(d * d, axis=1)
        pos += m
    return out


def _tempered_rows(logits, lam, u, mask=None):
    """Row-wise tempered draw. ``mask`` marks entries already taken."""
    if mask is not None:
        logits = np.where(mask, -np.inf, logits)
    if lam == 0.0:
        return np.argmax(logits, axis=1)
    top = np.max(logits, axis=1, keepdims=True)
    with np.errstate(over="ignore"):
        w = np.exp((logits - top) / lam)
    cum = np.cumsum(w, axis=1)
    thr = u * cum[:, -1]
    idx = np.sum(cum <= thr[:, None], axis=1)
    # u*total can round up to total; fall back to the last admissible entry
    over = idx >= logits.shape[1]
    if np.any(over):
        last = logits.shape[1] - 1 - np.argmax((w[over] > 0)[:, ::-1], axis=1)
        idx[over] = last
    return idx


def tempered_index(logits, lam, u):
    return int(_tempered_rows(logits[None, :], lam, np.array([u]))[0])


def query_logits(beliefs, base, weights, docs, penalty):
    # accumulate fact by fact, in the same order as the compiled kernel, so
    # both backends round identically
    b = beliefs.astype(bool)
    m, nf = b.shape
    acc = np.repeat(base[None, :].astype(np.float64), m, axis=0)
    covered = np.ones(acc.shape, dtype=bool)
    for f in range(nf):
        acc += np.where(b[:, f:f + 1], weights[None, :, f], 0.0)
        covered &= b[:, f:f + 1] | (docs[None, :, f] == 0)
    return np.where(covered, acc + penalty, acc)


def query_stage(beliefs, base, weights, docs, penalty, lam, u, n_ens, k):
    """Ensemble query choice. Each of ``n_ens`` proposals is ``k`` queries drawn
    without replacement; among queries common to all proposals the one with the
    smallest summed draw position wins (ties: earlier in proposal 1). An empty
    intersection falls back to proposal 1's first draw."""
    m = beliefs.shape[0]
    q = base.shape[0]
    logits = query_logits(beliefs, base, weights, docs, penalty)
    rows = np.arange(m)
    first = np.empty((m, k), dtype=np.int64)
    inter = np.ones((m, q), dtype=bool)
    rank = np.zeros((m, q), dtype=np.int64)
    for e in range(n_ens):
        taken = np.zeros((m, q), dtype=bool)
        for j in range(k):
            idx = _tempered_rows(logits, lam, u[:, e * k + j], taken)
            taken[rows, idx] = True
            rank[rows, idx] += j
            if e == 0:
                first[:, j] = idx
        inter &= taken
    action = first[:, 0].copy()
    if n_ens > 1:
        pos1 = np.full((m, q), k, dtype=np.int64)
        pos1[rows[:, None], first] = np.arange(k)
        big = np.iinfo(np.int64).max
        score = np.where(inter, rank * (k + 1) + pos1, big)
        best = np.argmin(score, axis=1)
        hit = inter.any(axis=1)
        action[hit] = best[hit]
    return action


def _include(logits, lam, u):
    if lam == 0.0:
        return np.broadcast_to(logits >= 0.0, u.shape)
    with np.errstate(over="ignore"):
        z = logits / lam
    p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                 np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return u < p[None, :]


def summary_stage(actions, docs, logits, lam, u):
    keep = _include(logits, lam, u)
    return (docs[actions].astype(bool) & keep).astype(np.uint8)


def update_stage(beliefs, summaries, logits, lam, u):
    b = beliefs.astype(bool)
    fresh = summaries.astype(bool) & ~b & _include(logits, lam, u)
    return (b | fresh).astype(np.uint8)
