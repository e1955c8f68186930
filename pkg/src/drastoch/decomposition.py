"""Split the belief-state variance of one simulator step into a part carried
over from earlier steps and the parts injected by each stage of the step.

Step ``t`` maps the belief before the step, b, to the belief after it, X.
With TV meaning the trace of the covariance:

    TV(X) = TV_b(E[X | b]) + E_b[dQ + dS + dU]

    dQ = TV_a(E[X | b, a])
    dS = E_a[TV_h(E[X | b, a, h])]
    dU = E_{a,h}[TV(X | b, a, h)]

``decompose_exact`` enumerates every outcome; ``decompose_mc`` estimates the
same terms by nested sampling with the pairwise U-statistic.
"""

import enum
import itertools
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import StateSpaceTooLarge
from .metrics import tv_estimate, tv_groups, tv_leave_one_out
from .sim import (
    Module,
    keep_probability,
    metrics_row,
    simulate_ensemble,
    softmax_probs,
)

OUTCOME_LIMIT = 10 ** 6


class Method(str, enum.Enum):
    EXACT = "exact_enumeration"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class DecompositionReport:
    step: int
    tv_total: float
    tv_propagated: float
    tv_intrinsic: float
    delta_query: float
    delta_sum: float
    delta_update: float
    method: Method
    samples: int = None
    residual: float = 0.0
    std_errors: dict = None

    def to_dict(self):
        d = asdict(self)
        d["method"] = self.method.value
        return d


def _check_step(world, t):
    if not 1 <= t <= world.horizon:
        raise ValueError(f"step {t} outside 1..{world.horizon}")


def _bernoulli_subsets(facts, probs):
    """All (kept subset, probability) pairs for independent keep draws."""
    options = []
    for f, p in zip(facts, probs):
        opts = []
        if p > 0.0:
            opts.append(((f,), p))
        if p < 1.0:
            opts.append(((), 1.0 - p))
        options.append(opts)
    for combo in itertools.product(*options):
        kept = tuple(f for part, _ in combo for f in part)
        prob = 1.0
        for _, p in combo:
            prob *= p
        yield kept, prob


class _Enumerator:
    def __init__(self, world, cfg, limit):
        self.world = world
        self.cfg = cfg
        self.limit = limit
        self.count = 0
        self.base, self.w, self.s_logits, self.u_logits = cfg.arrays(world)
        self.docs = world.doc_matrix()

    def _tick(self, n):
        self.count += n
        if self.count > self.limit:
            raise StateSpaceTooLarge(self.count, self.limit)

    def tree(self, b, t):
        """Nested outcome tree for one step from belief ``b``:
        [(p_a, [(p_h, [(p_x, x), ...]), ...]), ...]."""
        lam_q = self.cfg.lam(Module.QUERY, t)
        lam_s = self.cfg.lam(Module.SUM, t)
        lam_u = self.cfg.lam(Module.UPDATE, t)
        logits = kernels.query_logits(
            b[None, :], self.base, self.w, self.docs, float(self.cfg.coverage_penalty)
        )[0]
        p_query = softmax_probs(logits, lam_q)
        out = []
        for a in np.flatnonzero(p_query > 0.0):
            facts = [int(f) for f in np.flatnonzero(self.docs[a])]
            ps = [keep_probability(self.s_logits[f], lam_s) for f in facts]
            branches = []
            for h, p_h in _bernoulli_subsets(facts, ps):
                fresh = [f for f in h if not b[f]]
                pu = [keep_probability(self.u_logits[f], lam_u) for f in fresh]
                leaves = []
                for kept, p_x in _bernoulli_subsets(fresh, pu):
                    x = b.copy()
                    x[list(kept)] = 1
                    leaves.append((p_x, x))
                self._tick(len(leaves))
                branches.append((p_h, leaves))
            out.append((float(p_query[a]), branches))
        return out

    def belief_distribution(self, t):
        """Exact law of the belief before step ``t`` as {bytes: (prob, array)}."""
        n = self.world.n_findings
        dist = {bytes(n): (1.0, np.zeros(n, dtype=np.uint8))}
        for s in range(1, t):
            nxt = {}
            for p_b, b in dist.values():
                for p_a, branches in self.tree(b, s):
                    for p_h, leaves in branches:
                        for p_x, x in leaves:
                            key = x.tobytes()
                            prev = nxt.get(key)
                            p = p_b * p_a * p_h * p_x
                            nxt[key] = (p, x) if prev is None else (prev[0] + p, x)
            dist = nxt
        return dist


def _sq(v):
    return float(np.dot(v, v))


def decompose_exact(world, cfg, t, limit=OUTCOME_LIMIT):
    """Exact decomposition at step ``t`` by full enumeration."""
    _check_step(world, t)
    en = _Enumerator(world, cfg, limit)
    dist = en.belief_distribution(t)

    # first pass: conditional means at every level
    states = []
    for p_b, b in dist.values():
        tree = en.tree(b, t)
        m_b = np.zeros(world.n_findings)
        per_a = []
        for p_a, branches in tree:
            m_a = np.zeros(world.n_findings)
            per_h = []
            for p_h, leaves in branches:
                m_h = np.zeros(world.n_findings)
                for p_x, x in leaves:
                    m_h += p_x * x
                per_h.append((p_h, m_h, leaves))
                m_a += p_h * m_h
            per_a.append((p_a, m_a, per_h))
            m_b += p_a * m_a
        states.append((p_b, m_b, per_a))
    mu = np.zeros(world.n_findings)
    for p_b, m_b, _ in states:
        mu += p_b * m_b

    total = prop = dq = ds = du = 0.0
    for p_b, m_b, per_a in states:
        prop += p_b * _sq(m_b - mu)
        for p_a, m_a, per_h in per_a:
            dq += p_b * p_a * _sq(m_a - m_b)
            for p_h, m_h, leaves in per_h:
                ds += p_b * p_a * p_h * _sq(m_h - m_a)
                for p_x, x in leaves:
                    w = p_b * p_a * p_h * p_x
                    du += w * _sq(x - m_h)
                    total += w * _sq(x - mu)
    intrinsic = dq + ds + du
    return DecompositionReport(
        step=t,
        tv_total=total,
        tv_propagated=prop,
        tv_intrinsic=intrinsic,
        delta_query=dq,
        delta_sum=ds,
        delta_update=du,
        method=Method.EXACT,
        residual=abs(total - (prop + intrinsic)),
    )


def _stage_arrays(world, cfg):
    base, w, s_logits, u_logits = cfg.arrays(world)
    return base, w, s_logits, u_logits, world.doc_matrix()


def _sample_beliefs(world, cfg, t, n, rng):
    """Beliefs before step ``t`` for ``n`` independent runs."""
    base, w, s_logits, u_logits, docs = _stage_arrays(world, cfg)
    k = min(cfg.proposal_size, world.n_queries)
    nf = world.n_findings
    b = np.zeros((n, nf), dtype=np.uint8)
    for s in range(1, t):
        a = kernels.query_stage(b, base, w, docs, float(cfg.coverage_penalty),
                                cfg.lam(Module.QUERY, s), rng.random((n, k)), 1, k)
        h = kernels.summary_stage(a, docs, s_logits, cfg.lam(Module.SUM, s), rng.random((n, nf)))
        b = kernels.update_stage(b, h, u_logits, cfg.lam(Module.UPDATE, s), rng.random((n, nf)))
    return b


def _jackknife(loo):
    n = loo.shape[0]
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def decompose_mc(world, cfg, t, n_outer, n_inner, seed=0):
    """Nested Monte Carlo estimate of the step-``t`` decomposition.

    For each of ``n_outer`` sampled prior beliefs, ``n_inner`` inner draws each
    pick a query, two summaries of it, two updates of the first summary and
    one of the second. Pairs sharing (a, h) give the update term, pairs
    sharing only a give the query-conditional variance, and the spread across
    inner draws gives the per-belief total. Standard errors are delete-one
    jackknife over outer samples.
    """
    _check_step(world, t)
    if n_outer < 3 or n_inner < 2:
        raise ValueError("need n_outer >= 3 and n_inner >= 2")
    rng = np.random.default_rng(seed)
    base, w, s_logits, u_logits, docs = _stage_arrays(world, cfg)
    k = min(cfg.proposal_size, world.n_queries)
    nf = world.n_findings
    outer = _sample_beliefs(world, cfg, t, n_outer, rng)
    b = np.repeat(outer, n_inner, axis=0)
    m = b.shape[0]

    lam_s = cfg.lam(Module.SUM, t)
    lam_u = cfg.lam(Module.UPDATE, t)
    a = kernels.query_stage(b, base, w, docs, float(cfg.coverage_penalty),
                            cfg.lam(Module.QUERY, t), rng.random((m, k)), 1, k)
    h1 = kernels.summary_stage(a, docs, s_logits, lam_s, rng.random((m, nf)))
    h2 = kernels.summary_stage(a, docs, s_logits, lam_s, rng.random((m, nf)))
    y11 = kernels.update_stage(b, h1, u_logits, lam_u, rng.random((m, nf))).astype(np.float64)
    y12 = kernels.update_stage(b, h1, u_logits, lam_u, rng.random((m, nf))).astype(np.float64)
    y21 = kernels.update_stage(b, h2, u_logits, lam_u, rng.random((m, nf))).astype(np.float64)

    du_i = tv_groups(np.stack([y11, y12], axis=1)).reshape(n_outer, n_inner).mean(axis=1)
    va_i = tv_groups(np.stack([y11, y21], axis=1)).reshape(n_outer, n_inner).mean(axis=1)
    leaves = y11.reshape(n_outer, n_inner, nf)
    tvb_i = tv_groups(leaves)
    means = leaves.mean(axis=1)
    first = leaves[:, 0, :]

    dq_i = tvb_i - va_i
    ds_i = va_i - du_i
    total = tv_estimate(first, normalize=False)
    prop = tv_estimate(means, normalize=False) - tvb_i.mean() / n_inner
    dq, ds, du = dq_i.mean(), ds_i.mean(), du_i.mean()
    intrinsic = dq + ds + du

    n = n_outer

    def loo_mean(v):
        return (v.sum() - v) / (n - 1)

    loo_prop = tv_leave_one_out(means) - loo_mean(tvb_i) / n_inner
    ses = {
        "tv_total": _jackknife(tv_leave_one_out(first)),
        "tv_propagated": _jackknife(loo_prop),
        "tv_intrinsic": _jackknife(loo_mean(tvb_i)),
        "delta_query": _jackknife(loo_mean(dq_i)),
        "delta_sum": _jackknife(loo_mean(ds_i)),
        "delta_update": _jackknife(loo_mean(du_i)),
    }
    return DecompositionReport(
        step=t,
        tv_total=float(total),
        tv_propagated=float(prop),
        tv_intrinsic=float(intrinsic),
        delta_query=float(dq),
        delta_sum=float(ds),
        delta_update=float(du),
        method=Method.MONTE_CARLO,
        samples=n_outer * n_inner,
        residual=float(abs(total - (prop + intrinsic))),
        std_errors=ses,
    )


def propagation_curve(world, cfg_template, module, lam, n_runs=10, base_seed=None):
    """Final-output TV when ``module`` alone runs at ``lam`` at one injection step.

    Returns ``[(step, {"answer": .., "finding": .., "citation": ..}), ...]`` for
    steps 1..horizon; all other stages are greedy.
    """
    module = Module(module)
    out = []
    for s in range(1, world.horizon + 1):
        cfg = cfg_template.cell(module, s, lam, world.horizon)
        row = metrics_row(world, simulate_ensemble(world, cfg, n_runs, base_seed))
        out.append((s, {lvl: row[f"tv_{lvl}"] for lvl in ("answer", "finding", "citation")}))
    return out
