"""Cross-run canonicalization of answers, findings and citation URLs."""

import enum
import logging
import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit, urlunsplit

import numpy as np

from .errors import MalformedUrl
from .metrics import Level, OutputVector

log = logging.getLogger(__name__)

_DEFAULT_PORTS = {"http": 80, "https": 443}
_TRACKING = frozenset({"gclid", "fbclid"})


def _is_tracking(name):
    return name.startswith("utm_") or name in _TRACKING


def normalize_url(raw):
    """Canonical key for a citation URL.

    Rules, in order: trim whitespace; lowercase scheme and host; drop the
    fragment; drop :80 on http and :443 on https; drop trailing slashes on the
    path; drop utm_*, gclid and fbclid query parameters and sort the rest by
    name. Raises ``MalformedUrl`` when there is no scheme or host, or the
    authority does not parse.
    """
    text = raw.strip()
    try:
        parts = urlsplit(text)
        port = parts.port
        host = parts.hostname
    except ValueError as exc:
        raise MalformedUrl(raw) from exc
    if not parts.scheme or not host:
        raise MalformedUrl(raw)
    scheme = parts.scheme.lower()
    host = host.lower()
    if ":" in host:
        host = f"[{host}]"
    netloc = host
    if port is not None and _DEFAULT_PORTS.get(scheme) != port:
        netloc = f"{host}:{port}"
    userinfo = parts.netloc.rpartition("@")[0] if "@" in parts.netloc else ""
    if userinfo:
        netloc = f"{userinfo}@{netloc}"
    path = parts.path.rstrip("/")
    params = [p for p in parts.query.split("&") if p]
    params = [p for p in params if not _is_tracking(p.split("=", 1)[0])]
    params.sort(key=lambda p: p.split("=", 1)[0])
    return urlunsplit((scheme, netloc, path, "&".join(params), ""))


def url_key(raw):
    """``normalize_url`` that degrades to the raw string on malformed input."""
    try:
        return normalize_url(raw)
    except MalformedUrl:
        log.warning("malformed URL kept verbatim: %r", raw)
        return raw


class OracleKind(str, enum.Enum):
    EXACT = "exact"
    NORMALIZED = "normalized"
    JUDGE = "judge"


_WS = re.compile(r"\s+")


def normalize_text(text):
    return _WS.sub(" ", text).strip().casefold()


class EquivalenceOracle:
    """Decides whether two texts name the same canonical item.

    Exact and normalized oracles expose ``key`` so clustering can use a dict
    instead of pairwise calls. The judge-backed oracle asks the judge once per
    unordered pair and caches the verdict for the lifetime of the oracle.
    """

    def __init__(self, kind=OracleKind.EXACT, judge=None):
        self.kind = OracleKind(kind)
        if self.kind is OracleKind.JUDGE and judge is None:
            raise ValueError("judge-backed oracle needs a judge")
        self.judge = judge
        self._cache = {}

    @classmethod
    def exact(cls):
        return cls(OracleKind.EXACT)

    @classmethod
    def normalized(cls):
        return cls(OracleKind.NORMALIZED)

    @classmethod
    def judge_backed(cls, judge):
        return cls(OracleKind.JUDGE, judge)

    def key(self, text):
        if self.kind is OracleKind.EXACT:
            return text
        if self.kind is OracleKind.NORMALIZED:
            return normalize_text(text)
        return None

    def equivalent(self, a, b):
        if a == b:
            return True
        if self.kind is not OracleKind.JUDGE:
            return self.key(a) == self.key(b)
        pair = (a, b) if a <= b else (b, a)
        if pair not in self._cache:
            from .extraction.pipeline import judge_equivalent

            self._cache[pair] = judge_equivalent(pair[0], pair[1], self.judge)
        return self._cache[pair]


@dataclass(frozen=True)
class CanonicalItem:
    id: int
    text: str


@dataclass(frozen=True)
class CanonicalSpace:
    level: Level
    canon_items: tuple
    assignments: tuple
    empty_id: int = None
    raw_items: tuple = field(default=(), compare=False)

    @property
    def k(self):
        return len(self.canon_items)

    @property
    def n_runs(self):
        return len(self.assignments)


class _Clusterer:
    def __init__(self, oracle):
        self.oracle = oracle
        self.items = []
        self._by_key = {}
        self.reserved = None

    def assign(self, text):
        key = self.oracle.key(text)
        if key is not None:
            cid = self._by_key.get(key)
            if cid is None:
                cid = self._new(text)
                self._by_key[key] = cid
            return cid
        for item in self.items:
            if item.id == self.reserved:
                continue
            if self.oracle.equivalent(item.text, text):
                return item.id
        return self._new(text)

    def _new(self, text):
        item = CanonicalItem(len(self.items), text)
        self.items.append(item)
        return item.id


def cluster_findings(per_run_findings, oracle, level=Level.FINDING):
    """Greedy first-match clustering in (run, position) order.

    Each finding is compared to existing representatives in creation order and
    joins the first one the oracle accepts. ``OracleUnavailable`` from the
    judge propagates, so no partial space is ever returned.
    """
    if len(per_run_findings) < 1:
        raise ValueError("need at least one run")
    c = _Clusterer(oracle)
    assignments = []
    for run in per_run_findings:
        assignments.append(frozenset(c.assign(t) for t in run))
    raw = tuple(tuple(r) for r in per_run_findings)
    return CanonicalSpace(Level(level), tuple(c.items), tuple(assignments), raw_items=raw)


def cluster_citations(per_run_urls):
    keys = [[url_key(u) for u in run] for run in per_run_urls]
    return cluster_findings(keys, EquivalenceOracle.exact(), level=Level.CITATION)


def answer_space(answers, oracle):
    """Canonical answer space; every empty answer shares one reserved id."""
    if len(answers) < 1:
        raise ValueError("need at least one answer")
    c = _Clusterer(oracle)
    empty_id = None
    ids = []
    for text in answers:
        if not text.strip():
            if empty_id is None:
                empty_id = c.reserved = c._new("")
            ids.append(empty_id)
        else:
            ids.append(c.assign(text))
    return CanonicalSpace(
        Level.ANSWER,
        tuple(c.items),
        tuple(frozenset([i]) for i in ids),
        empty_id=empty_id,
        raw_items=tuple((a,) for a in answers),
    )


def canonicalize_answers(answers, oracle):
    space = answer_space(answers, oracle)
    return [next(iter(a)) for a in space.assignments]


def build_vectors(space):
    out = []
    for members in space.assignments:
        e = np.zeros(space.k)
        e[sorted(members)] = 1.0
        out.append(OutputVector(space.level, e))
    return out
