"""Synthetic information-acquisition MDP with temperature-controlled policies.

A run starts from an all-zero belief over ``n_findings`` candidate facts and
takes ``horizon`` steps. Each step draws a query (softmax over belief-aware
logits), retrieves that query's fixed document, keeps each document fact in
the summary with a tempered Bernoulli draw, and sets belief bits for
summarized facts with another tempered Bernoulli draw. Bits are never
cleared.

Randomness: every run owns one ``numpy`` generator seeded with
``base_seed ^ run_index`` and consumes a fixed block of uniforms per step,
laid out as

    [query proposals: max_proposals * proposal_size | summary: N | update: N]

Slots are consumed whether or not the stage is stochastic, so switching one
stage's temperature (or the ensemble size) never shifts the others' draws.
"""

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import EmptyActionSet
from .metrics import tv_result


class Module(str, enum.Enum):
    QUERY = "query"
    SUM = "sum"
    UPDATE = "update"


COMBINED = "combined"


@dataclass(frozen=True)
class WorldSpec:
    n_findings: int
    documents: tuple
    answer_weights: tuple
    horizon: int = 3
    gold_answer: int = None
    name: str = "world"

    def __post_init__(self):
        for q, doc in enumerate(self.documents):
            if any(not 0 <= f < self.n_findings for f in doc):
                raise ValueError(f"document {q} references a fact outside 0..{self.n_findings - 1}")
        if any(len(row) != self.n_findings for row in self.answer_weights):
            raise ValueError("answer_weights rows must have n_findings entries")

    @property
    def n_queries(self):
        return len(self.documents)

    @property
    def n_answers(self):
        return len(self.answer_weights)

    def doc_matrix(self):
        m = np.zeros((self.n_queries, self.n_findings), dtype=np.uint8)
        for q, doc in enumerate(self.documents):
            m[q, list(doc)] = 1
        return m

    def answers(self, beliefs):
        """Answer label per belief row: argmax of weighted support, lowest index on ties."""
        w = np.asarray(self.answer_weights, dtype=np.float64)
        return np.argmax(np.atleast_2d(beliefs).astype(np.float64) @ w.T, axis=1)

    def to_dict(self):
        return {
            "n_findings": self.n_findings,
            "documents": [list(d) for d in self.documents],
            "answer_weights": [list(r) for r in self.answer_weights],
            "horizon": self.horizon,
            "gold_answer": self.gold_answer,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n_findings=int(d["n_findings"]),
            documents=tuple(tuple(int(f) for f in doc) for doc in d["documents"]),
            answer_weights=tuple(tuple(float(x) for x in r) for r in d["answer_weights"]),
            horizon=int(d.get("horizon", 3)),
            gold_answer=d.get("gold_answer"),
            name=d.get("name", "world"),
        )


@dataclass(frozen=True)
class PolicyConfig:
    """Logits, temperature schedule and seed for the three policies.

    ``temperatures`` maps each module to one value per step (step 1 first).
    ``belief_weights[q][f]`` is added to query ``q``'s logit when fact ``f``
    is believed; ``coverage_penalty`` is added when every fact of the query's
    document is already believed.
    """

    query_logits: tuple
    summary_logits: tuple
    update_logits: tuple
    belief_weights: tuple = None
    coverage_penalty: float = -2.0
    temperatures: dict = field(default_factory=dict)
    proposal_size: int = 5
    max_proposals: int = 4
    seed: int = 0

    def __post_init__(self):
        for m, lams in self.temperatures.items():
            Module(m)
            if any(l < 0 for l in lams):
                raise ValueError(f"negative temperature for {m}")

    def lam(self, module, step):
        lams = self.temperatures.get(Module(module).value, ())
        return float(lams[step - 1]) if step - 1 < len(lams) else 0.0

    def schedule(self, horizon):
        return {m.value: [self.lam(m, s) for s in range(1, horizon + 1)] for m in Module}

    def with_temperatures(self, temperatures):
        return replace(self, temperatures={Module(k).value: list(v) for k, v in temperatures.items()})

    def cell(self, module, step, lam, horizon):
        """Only ``module`` at ``step`` (or every step for ``"combined"``) gets ``lam``."""
        lams = [0.0] * horizon
        if step == COMBINED:
            lams = [float(lam)] * horizon
        else:
            lams[int(step) - 1] = float(lam)
        return self.with_temperatures({Module(module).value: lams})

    def uniform_slots(self, n_findings):
        return self.max_proposals * self.proposal_size + 2 * n_findings

    def arrays(self, world):
        q, n = world.n_queries, world.n_findings
        w = np.zeros((q, n)) if self.belief_weights is None else np.asarray(self.belief_weights, float)
        return (
            np.asarray(self.query_logits, dtype=np.float64),
            np.ascontiguousarray(w, dtype=np.float64),
            np.asarray(self.summary_logits, dtype=np.float64),
            np.asarray(self.update_logits, dtype=np.float64),
        )

    def to_dict(self):
        return {
            "query_logits": list(self.query_logits),
            "summary_logits": list(self.summary_logits),
            "update_logits": list(self.update_logits),
            "belief_weights": None if self.belief_weights is None else [list(r) for r in self.belief_weights],
            "coverage_penalty": self.coverage_penalty,
            "temperatures": {k: list(v) for k, v in sorted(self.temperatures.items())},
            "proposal_size": self.proposal_size,
            "max_proposals": self.max_proposals,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        bw = d.get("belief_weights")
        return cls(
            query_logits=tuple(float(x) for x in d["query_logits"]),
            summary_logits=tuple(float(x) for x in d["summary_logits"]),
            update_logits=tuple(float(x) for x in d["update_logits"]),
            belief_weights=None if bw is None else tuple(tuple(float(x) for x in r) for r in bw),
            coverage_penalty=float(d.get("coverage_penalty", -2.0)),
            temperatures={Module(k).value: [float(x) for x in v] for k, v in d.get("temperatures", {}).items()},
            proposal_size=int(d.get("proposal_size", 5)),
            max_proposals=int(d.get("max_proposals", 4)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    beliefs: tuple
    actions: tuple
    observations: tuple
    summaries: tuple
    citations: tuple
    answer: int
    seed: int

    def to_dict(self):
        return {
            "seed": self.seed,
            "beliefs": ["".join(map(str, b)) for b in self.beliefs],
            "actions": list(self.actions),
            "observations": list(self.observations),
            "summaries": [list(s) for s in self.summaries],
            "citations": list(self.citations),
            "answer": self.answer,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class StepOutcome:
    action: int
    observation: int
    summary: tuple
    next_belief: np.ndarray


def tempered_sample(logits, lam, rng):
    """Index drawn from softmax(logits / lam); ``lam == 0`` is argmax with
    the lowest index winning ties. Always consumes one uniform from ``rng``."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise EmptyActionSet("no actions to sample from")
    if lam < 0:
        raise ValueError("temperature must be non-negative")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return kernels.tempered_index(logits, float(lam), rng.random())


def softmax_probs(logits, lam):
    logits = np.asarray(logits, dtype=np.float64)
    if lam == 0:
        p = np.zeros_like(logits)
        p[int(np.argmax(logits))] = 1.0
        return p
    z = (logits - logits.max()) / lam
    e = np.exp(z)
    return e / e.sum()


def keep_probability(logit, lam):
    """Probability a tempered include/exclude draw with logits [logit, 0] picks include."""
    if lam == 0:
        return 1.0 if logit >= 0 else 0.0
    z = logit / lam
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def query_logits(world, cfg, beliefs):
    base, w, _, _ = cfg.arrays(world)
    b = np.atleast_2d(np.asarray(beliefs, dtype=np.uint8))
    return kernels.query_logits(b, base, w, world.doc_matrix(), float(cfg.coverage_penalty))


def draw_uniforms(world, cfg, seeds):
    """Per-run uniform blocks of shape (runs, horizon, slots)."""
    slots = cfg.uniform_slots(world.n_findings)
    return np.stack([
        np.random.default_rng(int(s)).random((world.horizon, slots)) for s in seeds
    ])


def run_seeds(base_seed, n_runs):
    return [int(base_seed) ^ i for i in range(n_runs)]


def _stage_slices(cfg, n):
    qs = cfg.max_proposals * cfg.proposal_size
    return slice(0, qs), slice(qs, qs + n), slice(qs + n, qs + 2 * n)


def advance(world, cfg, beliefs, step, u, n_ens=1, gamma=1.0, arrays=None, docs=None):
    """One batched transition at ``step`` (1-based). ``u`` is (rows, slots)."""
    base, w, s_logits, u_logits = arrays or cfg.arrays(world)
    docs = world.doc_matrix() if docs is None else docs
    q_sl, s_sl, u_sl = _stage_slices(cfg, world.n_findings)
    if n_ens > cfg.max_proposals:
        raise ValueError(f"ensemble size {n_ens} exceeds max_proposals={cfg.max_proposals}")
    k = min(cfg.proposal_size, world.n_queries)
    actions = kernels.query_stage(
        beliefs, base, w, docs, float(cfg.coverage_penalty), cfg.lam(Module.QUERY, step),
        np.ascontiguousarray(u[:, q_sl]), int(n_ens), int(k),
    )
    summaries = kernels.summary_stage(
        actions, docs, s_logits, gamma * cfg.lam(Module.SUM, step), np.ascontiguousarray(u[:, s_sl])
    )
    nxt = kernels.update_stage(
        beliefs, summaries, u_logits, gamma * cfg.lam(Module.UPDATE, step), np.ascontiguousarray(u[:, u_sl])
    )
    return actions, summaries, nxt


@dataclass
class SimBatch:
    beliefs: np.ndarray     # (runs, horizon + 1, N)
    actions: np.ndarray     # (runs, horizon)
    summaries: np.ndarray   # (runs, horizon, N)
    answers: np.ndarray     # (runs,)
    seeds: list

    def finding_vectors(self):
        return self.beliefs[:, -1, :].astype(np.float64)

    def citation_vectors(self, n_queries):
        out = np.zeros((self.actions.shape[0], n_queries))
        np.put_along_axis(out, self.actions, 1.0, axis=1)
        return out

    def answer_vectors(self, n_answers):
        out = np.zeros((self.answers.shape[0], n_answers))
        out[np.arange(self.answers.shape[0]), self.answers] = 1.0
        return out


def simulate(world, cfg, uniforms, ensemble_sizes=None, gamma=1.0, seeds=None):
    """Simulate ``uniforms.shape[0]`` runs from the zero belief."""
    m = uniforms.shape[0]
    t_max = world.horizon
    n = world.n_findings
    arrays = cfg.arrays(world)
    docs = world.doc_matrix()
    beliefs = np.zeros((m, t_max + 1, n), dtype=np.uint8)
    actions = np.zeros((m, t_max), dtype=np.int64)
    summaries = np.zeros((m, t_max, n), dtype=np.uint8)
    for s in range(1, t_max + 1):
        n_ens = 1 if ensemble_sizes is None else int(ensemble_sizes[s - 1])
        a, h, b = advance(
            world, cfg, np.ascontiguousarray(beliefs[:, s - 1]), s,
            uniforms[:, s - 1], n_ens, gamma, arrays, docs,
        )
        actions[:, s - 1] = a
        summaries[:, s - 1] = h
        beliefs[:, s] = b
    return SimBatch(beliefs, actions, summaries, world.answers(beliefs[:, -1]), list(seeds or []))


def simulate_ensemble(world, cfg, n_runs, base_seed=None, ensemble_sizes=None, gamma=1.0):
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    base_seed = cfg.seed if base_seed is None else base_seed
    seeds = run_seeds(base_seed, n_runs)
    return simulate(world, cfg, draw_uniforms(world, cfg, seeds), ensemble_sizes, gamma, seeds)


def to_records(world, batch):
    out = []
    for i in range(batch.actions.shape[0]):
        acts = tuple(int(a) for a in batch.actions[i])
        out.append(TrajectoryRecord(
            beliefs=tuple(tuple(int(x) for x in b) for b in batch.beliefs[i]),
            actions=acts,
            observations=acts,
            summaries=tuple(tuple(int(f) for f in np.flatnonzero(h)) for h in batch.summaries[i]),
            citations=tuple(sorted(set(acts))),
            answer=int(batch.answers[i]),
            seed=batch.seeds[i] if batch.seeds else None,
        ))
    return out


def run_ensemble(world, cfg, n_runs, base_seed=None):
    """``n_runs`` independent trajectories; run i is seeded with ``base_seed ^ i``."""
    return to_records(world, simulate_ensemble(world, cfg, n_runs, base_seed))


def step(world, belief, t, cfg, rng, n_ens=1, gamma=1.0):
    """Single-run transition at step ``t`` (1-based), drawing one uniform block from ``rng``."""
    if not 1 <= t <= world.horizon:
        raise ValueError(f"step {t} outside 1..{world.horizon}")
    u = rng.random((1, cfg.uniform_slots(world.n_findings)))
    b = np.asarray(belief, dtype=np.uint8)[None, :]
    a, h, nxt = advance(world, cfg, b, t, u, n_ens, gamma)
    return StepOutcome(int(a[0]), int(a[0]), tuple(int(f) for f in np.flatnonzero(h[0])), nxt[0])


LEVEL_COLUMNS = ("answer", "finding", "citation")


def batch_metrics(world, batch):
    """TV results per output level plus accuracy against ``world.gold_answer``."""
    ans = tv_result(batch.answer_vectors(world.n_answers))
    fin = tv_result(batch.finding_vectors())
    cit = tv_result(batch.citation_vectors(world.n_queries))
    acc = None
    if world.gold_answer is not None:
        acc = float(np.mean(batch.answers == world.gold_answer))
    return {"answer": ans, "finding": fin, "citation": cit, "accuracy": acc}


def metrics_row(world, batch):
    m = batch_metrics(world, batch)
    return {
        "tv_answer": m["answer"].tv,
        "tv_finding": m["finding"].tv,
        "tv_citation": m["citation"].tv,
        "support_tv_finding": m["finding"].support_tv,
        "support_tv_citation": m["citation"].support_tv,
        "mean_findings": m["finding"].mean_support,
        "mean_citations": m["citation"].mean_support,
        "accuracy": m["accuracy"],
    }


def ablation_grid(world, base_cfg, modules=tuple(Module), steps=(1, 2, 3, COMBINED),
                  lambdas=(0.5, 1.0), n_runs=10, base_seed=None):
    """One metrics row per (lambda, step, module) cell, in Table-1 order."""
    rows = []
    for lam in lambdas:
        for st in steps:
            for mod in modules:
                cfg = base_cfg.cell(mod, st, lam, world.horizon)
                batch = simulate_ensemble(world, cfg, n_runs, base_seed)
                row = {"lambda": float(lam), "step": str(st), "module": Module(mod).value}
                row.update(metrics_row(world, batch))
                rows.append(row)
    return rows


def reference_world():
    """32 facts in 8 disjoint 4-fact documents. Answer label of document j is
    j % 3, so the chain 0 -> 3 -> 6 agrees on label 0 (the gold answer)."""
    n, q = 32, 8
    docs = tuple(tuple(range(4 * j, 4 * j + 4)) for j in range(q))
    weights = [[0.0] * n for _ in range(3)]
    for j in range(q):
        for f in docs[j]:
            weights[j % 3][f] = 1.0 + (q - j) / 100.0
    return WorldSpec(n, docs, tuple(tuple(r) for r in weights), horizon=3, gold_answer=0,
                     name="reference")


# fact i of document j leads to document j + LEAD_STEPS[i] with a graded bonus
LEAD_STEPS = (3, 4, 5, 6)
LEAD_BONUS = (4.0, 2.0, 0.0, -2.0)


def reference_policy(seed=0):
    """Document 0 is the preferred opening query; afterwards the strongest
    surviving lead decides, so which facts were kept steers the trajectory."""
    n, q = 32, 8
    bonus = [[0.0] * n for _ in range(q)]
    for j in range(q):
        for i, (step, w) in enumerate(zip(LEAD_STEPS, LEAD_BONUS)):
            bonus[(j + step) % q][4 * j + i] = w
    return PolicyConfig(
        query_logits=(0.9,) + tuple(-0.25 * j for j in range(1, q)),
        summary_logits=(1.2,) * n,
        update_logits=(1.2,) * n,
        belief_weights=tuple(tuple(r) for r in bonus),
        seed=seed,
    )


def tiny_world(horizon=2):
    return WorldSpec(
        4,
        ((0, 1), (1, 2, 3)),
        ((1.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 1.0)),
        horizon=horizon,
        gold_answer=0,
        name="tiny",
    )


def tiny_policy(lam=0.7, horizon=2, seed=0):
    return PolicyConfig(
        query_logits=(0.5, 0.0),
        summary_logits=(0.8, 0.3, 1.0, 0.5),
        update_logits=(1.2, 0.6, 0.9, 0.4),
        belief_weights=((0.0, 0.0, 0.0, 0.0), (1.5, 0.0, 0.0, 0.0)),
        temperatures={m.value: [lam] * horizon for m in Module},
        seed=seed,
    )
