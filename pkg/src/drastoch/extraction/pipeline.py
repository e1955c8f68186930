"""Report -> RunArtifact extraction."""

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from ..canonical import normalize_text
from ..errors import JudgeFormatError
from ..schema import ANSWER_SCHEMA, ATOMIC_FACTS_SCHEMA, CLAIMS_SCHEMA, parse_structured
from . import prompts

_URL = re.compile(r"https?://[^\s<>\"'\)\]\}]+")


@dataclass(frozen=True)
class Claim:
    claim: str
    context: str
    source: str


@dataclass
class RunArtifact:
    run_id: str
    question_id: str = ""
    answer: str = ""
    supporting_context: str = ""
    claims: list = field(default_factory=list)
    findings: list = field(default_factory=list)
    finding_claim: list = field(default_factory=list)
    citations: list = field(default_factory=list)
    accuracy: bool = None

    def to_dict(self):
        d = asdict(self)
        d["claims"] = [asdict(c) for c in self.claims]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["claims"] = [Claim(**c) for c in d.get("claims", [])]
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class ReportRecord:
    question_id: str
    run_id: str
    question: str
    report: str
    gold_answer: str = None


def load_reports(path):
    """Read one report record per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            d = json.loads(line)
            try:
                out.append(ReportRecord(
                    str(d["question_id"]), str(d["run_id"]), d["question"], d["report"],
                    d.get("gold_answer"),
                ))
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc.args[0]}") from None
    return out


def extract_claims(question, report, judge):
    if not report.strip():
        raise ValueError("empty report")
    raw = judge.complete(prompts.claims_prompt(question, report))
    return [Claim(**c) for c in parse_structured(raw, CLAIMS_SCHEMA)]


def decompose_atomic(claim, judge):
    if not claim.strip():
        raise ValueError("empty claim")
    return parse_structured(judge.complete(prompts.atomic_prompt(claim)), ATOMIC_FACTS_SCHEMA)


def extract_answer(question, report, judge):
    if not question.strip():
        raise ValueError("empty question")
    rec = parse_structured(judge.complete(prompts.answer_prompt(question, report)), ANSWER_SCHEMA)
    return rec["answer"].strip(), rec["supporting_context"]


def _yes_no(raw):
    word = raw.strip().strip(".!\"'`*").split()
    if word:
        w = word[0].lower().strip(".,:;!")
        if w == "yes":
            return True
        if w == "no":
            return False
    raise JudgeFormatError("expected yes/no", raw, 0)


def judge_equivalent(a, b, judge, kind="finding"):
    return _yes_no(judge.complete(prompts.equivalence_prompt(a, b, kind)))


def grade_accuracy(extracted, gold, judge):
    """Exact (casefolded) matches skip the judge entirely."""
    if not gold.strip():
        raise ValueError("empty gold answer")
    if normalize_text(extracted) == normalize_text(gold):
        return True
    if not extracted.strip():
        return False
    return judge_equivalent(extracted, gold, judge, kind="answer")


def harvest_urls(report):
    return [u.rstrip(".,;:!?") for u in _URL.findall(report)]


def extract_run(record, judge, pool=None):
    """Full extraction for one report. Claim decomposition fans out over
    ``pool`` when given; results keep claim order."""
    claims = extract_claims(record.question, record.report, judge)
    texts = [c.claim for c in claims]
    if pool is not None:
        per_claim = list(pool.map(lambda t: decompose_atomic(t, judge), texts))
    else:
        per_claim = [decompose_atomic(t, judge) for t in texts]
    findings, origin = [], []
    for i, facts in enumerate(per_claim):
        findings.extend(facts)
        origin.extend([i] * len(facts))
    answer, ctx = extract_answer(record.question, record.report, judge)
    seen = set()
    citations = []
    for u in [c.source for c in claims if c.source.strip()] + harvest_urls(record.report):
        if u not in seen:
            seen.add(u)
            citations.append(u)
    acc = None
    if record.gold_answer is not None and record.gold_answer.strip():
        acc = grade_accuracy(answer, record.gold_answer, judge)
    return RunArtifact(
        run_id=record.run_id,
        question_id=record.question_id,
        answer=answer,
        supporting_context=ctx,
        claims=claims,
        findings=findings,
        finding_claim=origin,
        citations=citations,
        accuracy=acc,
    )


def extract_runs(records, judge, max_in_flight=None):
    """Extract many reports with bounded parallelism; output follows input order."""
    workers = max_in_flight or getattr(judge, "max_in_flight", 4)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return [extract_run(r, judge) for r in records] if workers <= 1 else list(
            pool.map(lambda r: extract_run(r, judge), records)
        )
