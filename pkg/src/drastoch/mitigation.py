"""Variance mitigations: schema-constrained stage outputs and consensus
query intersection with a shrinking ensemble."""

import json
import re
from dataclasses import dataclass

import numpy as np

from . import sim
from .canonical import normalize_text
from .errors import JudgeFormatError, NoProposals, SchemaViolation
from .schema import REASONING_SCHEMA, _repair

DEFAULT_GAMMA = 0.5
_TAG = re.compile(r"^\s*<([A-Za-z_][\w-]*)>(.*)</\1>\s*$", re.DOTALL)


def _loads(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return json.loads(_repair(text))


def validate_structured(raw, schema=REASONING_SCHEMA):
    """Parse ``raw`` and check it against the closed ``schema``.

    Accepts a bare JSON payload, one wrapped in a single ``<tag>...</tag>``,
    and payloads that were emitted as an escaped string body (literal ``\\n``
    and ``\\"``). Unparseable text raises ``SchemaViolation`` at path ``$``.
    """
    text = raw
    m = _TAG.match(text)
    if m:
        text = m.group(2)
    try:
        value = _loads(text)
    except json.JSONDecodeError:
        try:
            value = _loads(json.loads('"' + text.strip() + '"'))
        except json.JSONDecodeError as exc:
            raise SchemaViolation("$", f"not valid JSON: {exc.msg}") from None
    return schema.validate(value)


def validate_or_none(raw, schema=REASONING_SCHEMA):
    try:
        return validate_structured(raw, schema)
    except (SchemaViolation, JudgeFormatError):
        return None


def _key(q):
    return normalize_text(q)


def intersect_queries(query_sets):
    """Queries present in every proposal, compared after casefolding and
    whitespace collapsing. An empty intersection returns the first proposal.
    Returned keys are normalized."""
    sets = [list(s) for s in query_sets]
    if not sets:
        raise NoProposals("no query proposals")
    keyed = [{_key(q) for q in s} for s in sets]
    common = set.intersection(*keyed)
    return common if common else keyed[0]


@dataclass(frozen=True)
class EnsembleSchedule:
    """``decay`` optionally maps step -> N; otherwise N(t) = max(1, n0 - (t - 1))."""

    n0: int = 3
    decay: dict = None

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError("n0 must be at least 1")
        if self.decay:
            steps = sorted(self.decay)
            sizes = [self.decay[s] for s in steps]
            if any(n < 1 for n in sizes):
                raise ValueError("ensemble sizes must be at least 1")
            if any(b > a for a, b in zip(sizes, sizes[1:])):
                raise ValueError("ensemble sizes must be non-increasing")

    def sizes(self, horizon):
        return [ensemble_size(t, self) for t in range(1, horizon + 1)]


def ensemble_size(t, schedule=None):
    if t < 1:
        raise ValueError("steps start at 1")
    schedule = schedule or EnsembleSchedule()
    if schedule.decay:
        if t in schedule.decay:
            return int(schedule.decay[t])
        before = [s for s in schedule.decay if s < t]
        return int(schedule.decay[max(before)]) if before else schedule.n0
    return max(1, schedule.n0 - (t - 1))


@dataclass(frozen=True)
class Mitigation:
    """Which mitigations are on. ``gamma`` scales the Sum/Update temperatures
    when ``structured`` is set."""

    structured: bool = True
    ensemble: bool = True
    gamma: float = DEFAULT_GAMMA
    schedule: EnsembleSchedule = EnsembleSchedule()

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")

    def sizes(self, horizon):
        return self.schedule.sizes(horizon) if self.ensemble else [1] * horizon

    def effective_gamma(self):
        return self.gamma if self.structured else 1.0


OFF = Mitigation(structured=False, ensemble=False, gamma=1.0, schedule=EnsembleSchedule(1))


def _check_capacity(cfg, sizes):
    if max(sizes) > cfg.max_proposals:
        raise ValueError(f"ensemble size {max(sizes)} exceeds max_proposals={cfg.max_proposals}")


def mitigated_step(world, belief, t, cfg, schedule=None, rng=None, structured=True,
                   gamma=DEFAULT_GAMMA):
    """One simulator step with an ensemble of ``ensemble_size(t, schedule)``
    query proposals; ``structured`` scales the Sum/Update temperatures by ``gamma``."""
    schedule = schedule or EnsembleSchedule()
    n_ens = ensemble_size(t, schedule)
    _check_capacity(cfg, [n_ens])
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return sim.step(world, belief, t, cfg, rng, n_ens, gamma if structured else 1.0)


def simulate_mitigated(world, cfg, n_runs, base_seed=None, mitigation=None):
    """Ensemble of ``n_runs`` mitigated runs, seeded exactly like the baseline."""
    mitigation = mitigation or Mitigation()
    sizes = mitigation.sizes(world.horizon)
    _check_capacity(cfg, sizes)
    return sim.simulate_ensemble(world, cfg, n_runs, base_seed, sizes, mitigation.effective_gamma())


def compare(world, cfg, n_runs, base_seed=None, mitigation=None):
    """Baseline and mitigated metrics on common random numbers."""
    mitigation = mitigation or Mitigation()
    base_seed = cfg.seed if base_seed is None else base_seed
    seeds = sim.run_seeds(base_seed, n_runs)
    u = sim.draw_uniforms(world, cfg, seeds)
    sizes = mitigation.sizes(world.horizon)
    _check_capacity(cfg, sizes)
    base = sim.metrics_row(world, sim.simulate(world, cfg, u, seeds=seeds))
    mit = sim.metrics_row(world, sim.simulate(world, cfg, u, sizes, mitigation.effective_gamma(), seeds))
    return base, mit


def average_tv(row):
    return (row["tv_answer"] + row["tv_finding"] + row["tv_citation"]) / 3.0
