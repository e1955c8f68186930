"""Total-variance estimators over per-run output vectors.

Every estimator here is the pairwise U-statistic

    TV = 1 / (2 n (n - 1)) * sum_i sum_j ||x_i - x_j||^2

or one of its algebraic rewrites (discordance for one-hot answers, mean
cosine complement for unit vectors). Pair distances are reduced with
``math.fsum``, which is exactly rounded, so results do not depend on run
order.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InsufficientRuns, UnknownItem


class Level(str, enum.Enum):
    ANSWER = "answer"
    FINDING = "finding"
    CITATION = "citation"


@dataclass(frozen=True)
class OutputVector:
    level: Level
    entries: np.ndarray

    @property
    def dimension(self):
        return int(self.entries.shape[0])

    @property
    def support(self):
        return int(np.count_nonzero(self.entries))

    @property
    def empty(self):
        return self.support == 0

    @classmethod
    def one_hot(cls, index, dimension):
        e = np.zeros(dimension)
        e[index] = 1.0
        return cls(Level.ANSWER, e)

    @classmethod
    def from_set(cls, items, dimension, level=Level.FINDING):
        e = np.zeros(dimension)
        e[list(items)] = 1.0
        return cls(Level(level), e)


@dataclass(frozen=True)
class TvResult:
    tv: float
    support_tv: float
    n_runs: int
    mean_support: float


def _as_matrix(vs):
    """Stack run vectors into an (n, d) float64 matrix."""
    if isinstance(vs, np.ndarray):
        x = np.asarray(vs, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array of runs, got shape {x.shape}")
    else:
        rows = [v.entries if isinstance(v, OutputVector) else np.asarray(v, dtype=np.float64)
                for v in vs]
        levels = {v.level for v in vs if isinstance(v, OutputVector)}
        if len(levels) > 1:
            raise DimensionMismatch(f"mixed levels {sorted(l.value for l in levels)}")
        dims = {r.shape for r in rows}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed dimensions {sorted(d[0] if d else 0 for d in dims)}")
        x = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    if x.shape[0] < 2:
        raise InsufficientRuns(f"need at least 2 runs, got {x.shape[0]}")
    return x


def normalize_rows(x):
    """Divide each row by its l2 norm; zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    # scale by the largest entry first so tiny rows do not underflow to zero
    peak = np.max(np.abs(x), axis=-1, keepdims=True) if x.shape[-1] else np.zeros(x.shape[:-1] + (1,))
    live = peak > 0
    y = x / np.where(live, peak, 1.0)
    norms = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
    return np.where(live, y / np.where(live, norms, 1.0), 0.0)


def l2_normalize(v):
    if isinstance(v, OutputVector):
        return OutputVector(v.level, normalize_rows(v.entries[None, :])[0])
    return normalize_rows(np.asarray(v, dtype=np.float64)[None, :])[0]


def tv_estimate(vs, normalize=True):
    """Pairwise U-statistic estimate of the trace of the covariance.

    With ``normalize`` each run is first scaled to unit l2 norm, which puts
    the result in [0, 1].
    """
    x = _as_matrix(vs)
    if normalize:
        x = normalize_rows(x)
    n = x.shape[0]
    d = kernels.pair_sqdists(np.ascontiguousarray(x))
    # unordered pairs counted once, hence 2S / (2n(n-1))
    return math.fsum(d) / (n * (n - 1))


def support_sizes(vs):
    return np.count_nonzero(_as_matrix(vs), axis=1)


def tv_support_size(vs):
    s = support_sizes(vs).astype(np.float64)
    n = s.shape[0]
    d = kernels.pair_sqdists(s[:, None])
    return math.fsum(d) / (n * (n - 1))


def tv_result(vs, normalize=True):
    x = _as_matrix(vs)
    s = np.count_nonzero(x, axis=1)
    return TvResult(
        tv=tv_estimate(x, normalize=normalize),
        support_tv=tv_support_size(x),
        n_runs=int(x.shape[0]),
        mean_support=math.fsum(s) / s.shape[0],
    )


def answer_discordance(labels):
    """Share of ordered run pairs whose canonical answers differ."""
    labels = list(labels)
    n = len(labels)
    if n < 2:
        raise InsufficientRuns(f"need at least 2 runs, got {n}")
    counts = {}
    for y in labels:
        counts[y] = counts.get(y, 0) + 1
    concordant = sum(c * (c - 1) for c in counts.values())
    return (n * (n - 1) - concordant) / (n * (n - 1))


def mean_pairwise_cosine(vs):
    """Mean dot product of l2-normalized runs over ordered pairs i != j.

    ``tv_estimate == 1 - mean_pairwise_cosine`` holds when no run is the
    zero vector.
    """
    x = normalize_rows(_as_matrix(vs))
    n = x.shape[0]
    dots = []
    for i in range(n - 1):
        dots.append(np.sum(x[i + 1:] * x[i], axis=1))
    return 2.0 * math.fsum(np.concatenate(dots)) / (n * (n - 1))


def semantic_vectorize(run_items, global_items, sim):
    """Soft membership vector: entry k is the best similarity of global item k
    to anything the run produced."""
    global_items = list(global_items)
    known = set(global_items)
    run_items = list(run_items)
    for f in run_items:
        if f not in known:
            raise UnknownItem(f)
    out = np.zeros(len(global_items))
    if not run_items:
        return OutputVector(Level.FINDING, out)
    for k, g in enumerate(global_items):
        out[k] = max(sim(g, f) for f in run_items)
    return OutputVector(Level.FINDING, out)


def tv_groups(x):
    """Per-group TV for an array of shape (groups, n, d).

    Same statistic as ``tv_estimate(normalize=False)`` on each group, computed
    through the centered sum of squares so batched Monte Carlo can call it on
    many small groups at once.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionMismatch(f"expected (groups, n, d), got {x.shape}")
    n = x.shape[1]
    if n < 2:
        raise InsufficientRuns(f"need at least 2 runs per group, got {n}")
    centered = x - x.mean(axis=1, keepdims=True)
    return np.sum(centered * centered, axis=(1, 2)) / (n - 1)


def tv_jackknife_se(x):
    """Delete-one jackknife standard error of the unnormalized TV estimate."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise InsufficientRuns("jackknife needs at least 3 runs")
    loo = tv_leave_one_out(x)
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def tv_leave_one_out(x):
    """Unnormalized TV of ``x`` with each row removed in turn."""
    n = x.shape[0]
    s = x.sum(axis=0)
    q = np.sum(x * x)
    sl = s[None, :] - x
    ql = q - np.sum(x * x, axis=1)
    m = n - 1
    return (ql - np.sum(sl * sl, axis=1) / m) / (m - 1)
