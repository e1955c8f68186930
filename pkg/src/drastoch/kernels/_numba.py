"""Numba-compiled kernels with the same contracts as ``_numpy``."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def pair_sqdists(x):
    n, d = x.shape
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    pos = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                diff = x[j, c] - x[i, c]
                acc += diff * diff
            out[pos] = acc
            pos += 1
    return out


@numba.njit(cache=True)
def _tempered_one(logits, lam, u, taken):
    n = logits.shape[0]
    if lam == 0.0:
        best = -1
        for i in range(n):
            if taken[i]:
                continue
            if best < 0 or logits[i] > logits[best]:
                best = i
        return best
    top = -np.inf
    for i in range(n):
        if not taken[i] and logits[i] > top:
            top = logits[i]
    w = np.zeros(n)
    total = 0.0
    for i in range(n):
        if not taken[i]:
            w[i] = math.exp((logits[i] - top) / lam)
    cum = np.empty(n)
    for i in range(n):
        total += w[i]
        cum[i] = total
    thr = u * total
    for i in range(n):
        if thr < cum[i]:
            return i
    for i in range(n - 1, -1, -1):
        if w[i] > 0.0:
            return i
    return n - 1


def tempered_index(logits, lam, u):
    taken = np.zeros(logits.shape[0], dtype=np.bool_)
    return int(_tempered_one(np.asarray(logits, dtype=np.float64), float(lam), float(u), taken))


@numba.njit(cache=True)
def query_logits(beliefs, base, weights, docs, penalty):
    m, nf = beliefs.shape
    q = base.shape[0]
    out = np.empty((m, q))
    for r in range(m):
        for a in range(q):
            acc = base[a]
            covered = True
            for f in range(nf):
                if beliefs[r, f]:
                    acc += weights[a, f]
                elif docs[a, f]:
                    covered = False
            if covered:
                acc += penalty
            out[r, a] = acc
    return out


@numba.njit(cache=True)
def query_stage(beliefs, base, weights, docs, penalty, lam, u, n_ens, k):
    m = beliefs.shape[0]
    q = base.shape[0]
    logits = query_logits(beliefs, base, weights, docs, penalty)
    action = np.empty(m, dtype=np.int64)
    first = np.empty(k, dtype=np.int64)
    taken = np.zeros(q, dtype=np.bool_)
    inter = np.zeros(q, dtype=np.bool_)
    rank = np.zeros(q, dtype=np.int64)
    for r in range(m):
        for a in range(q):
            inter[a] = True
            rank[a] = 0
        for e in range(n_ens):
            for a in range(q):
                taken[a] = False
            for j in range(k):
                idx = _tempered_one(logits[r], lam, u[r, e * k + j], taken)
                taken[idx] = True
                rank[idx] += j
                if e == 0:
                    first[j] = idx
            for a in range(q):
                inter[a] = inter[a] and taken[a]
        action[r] = first[0]
        if n_ens > 1:
            best = -1
            best_score = 0
            for j in range(k):
                a = first[j]
                if inter[a]:
                    score = rank[a] * (k + 1) + j
                    if best < 0 or score < best_score:
                        best = a
                        best_score = score
            if best >= 0:
                action[r] = best
    return action


@numba.njit(cache=True)
def _prob(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _keep_table(logits, lam):
    """Per-fact keep probability; greedy decoding keeps non-negative logits."""
    nf = logits.shape[0]
    p = np.empty(nf)
    for f in range(nf):
        if lam == 0.0:
            p[f] = 2.0 if logits[f] >= 0.0 else -1.0
        else:
            p[f] = _prob(logits[f] / lam)
    return p


@numba.njit(cache=True)
def summary_stage(actions, docs, logits, lam, u):
    m = actions.shape[0]
    nf = docs.shape[1]
    p = _keep_table(logits, lam)
    out = np.zeros((m, nf), dtype=np.uint8)
    for r in range(m):
        a = actions[r]
        for f in range(nf):
            if docs[a, f] and u[r, f] < p[f]:
                out[r, f] = 1
    return out


@numba.njit(cache=True)
def update_stage(beliefs, summaries, logits, lam, u):
    m, nf = beliefs.shape
    p = _keep_table(logits, lam)
    out = np.empty((m, nf), dtype=np.uint8)
    for r in range(m):
        for f in range(nf):
            if beliefs[r, f] or (summaries[r, f] and u[r, f] < p[f]):
                out[r, f] = 1
            else:
                out[r, f] = 0
    return out
