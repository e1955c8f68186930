"""Judge transports: an HTTP chat-completion client and an offline mock."""

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field

import httpx

from ..canonical import normalize_text
from ..errors import OracleUnavailable
from . import prompts

log = logging.getLogger(__name__)

TOKEN_ENV = "DRASTOCH_JUDGE_TOKEN"
ENDPOINT_ENV = "DRASTOCH_JUDGE_ENDPOINT"


@dataclass
class JudgeTransport:
    """Chat-completion client that always requests greedy decoding.

    Requests are pure functions of the prompt, so retrying is safe.
    """

    endpoint: str
    model_name: str
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    token: str = None
    transport: httpx.BaseTransport = field(default=None, repr=False)
    deterministic = False
    temperature = 0.0

    def __post_init__(self):
        if self.token is None:
            self.token = os.environ.get(TOKEN_ENV)
        self._client = httpx.Client(timeout=self.timeout, transport=self.transport)

    @classmethod
    def from_env(cls, model_name, **kw):
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise OracleUnavailable(f"{ENDPOINT_ENV} is not set")
        return cls(endpoint, model_name, **kw)

    def request_body(self, prompt):
        return {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "top_p": 1.0,
            "n": 1,
        }

    def complete(self, prompt):
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        body = self.request_body(prompt)
        last = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._client.post(self.endpoint, json=body, headers=headers)
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                else:
                    resp.raise_for_status()
                    return resp.json()["choices"][0]["message"]["content"]
            except httpx.HTTPStatusError as exc:
                raise OracleUnavailable(f"judge rejected request: {exc}") from exc
            except (httpx.TransportError, KeyError, IndexError, ValueError) as exc:
                last = repr(exc)
            if attempt < self.max_retries:
                time.sleep(min(0.5 * 2 ** attempt, 8.0))
        raise OracleUnavailable(f"judge unavailable after {self.max_retries + 1} attempts: {last}")


_REF_LINE = re.compile(r"^\s*\[(\d+)\]\s*:?\s*(https?://\S+)\s*$")
_REF_HEAD = re.compile(r"^\s*#*\s*(references|sources|bibliography)\s*:?\s*$", re.I)
_ANSWER_LINE = re.compile(r"^\s*(?:\*\*)?answer(?:\*\*)?\s*:\s*(.*?)\s*$", re.I | re.M)
_MARKERS = re.compile(r"\s*((?:\[\d+\])+)\s*([.!?]?)\s*$")
_SENT = re.compile(r"(?<=[.!?])\s+")
_SPLIT = re.compile(r",\s+and\s+|;\s+|\s+and\s+")


class MockJudge:
    """Deterministic rule-based stand-in for the LLM judge.

    It recognizes each prompt by its template and answers with simple text
    rules: sentences become claims, ``[n]`` markers map to ``[n] URL``
    reference lines, claims split on "and"/semicolons, ``Answer:`` lines give
    the answer, and equivalence is casefolded string equality. ``responses``
    maps an exact prompt to a canned reply and takes precedence.
    """

    deterministic = True
    temperature = 0.0
    max_in_flight = 4

    def __init__(self, responses=None):
        self.responses = dict(responses or {})

    def complete(self, prompt):
        if prompt in self.responses:
            return self.responses[prompt]
        if prompt.startswith(prompts.template("claim_extraction")):
            _, report = _split_inputs(prompt)
            return json.dumps(mock_claims(report), ensure_ascii=False)
        if prompt.startswith(prompts.template("answer_extraction")):
            question, report = _split_inputs(prompt)
            m = _ANSWER_LINE.search(report)
            ans = m.group(1) if m else ""
            ctx = m.group(0).strip() if m else ""
            return json.dumps({"question": question, "answer": ans, "supporting_context": ctx},
                              ensure_ascii=False)
        if prompt.startswith(prompts.template("atomic_decomposition")):
            claim = json.loads(prompt.rsplit(prompts.CLAIM_HEADER, 1)[1].rsplit("\nOutput:", 1)[0])
            return json.dumps(mock_atomic(claim), ensure_ascii=False)
        for name in ("answer_equivalence", "finding_equivalence"):
            if prompt.startswith(prompts.template(name)):
                rest = prompt[len(prompts.template(name)):]
                a_part, b_part = rest[len(prompts.PAIR_HEADER):].split("\nB: ", 1)
                a, b = json.loads(a_part), json.loads(b_part)
                return "yes" if normalize_text(a) == normalize_text(b) else "no"
        return "[]"


def _split_inputs(prompt):
    rest = prompt.split(prompts.QUESTION_HEADER, 1)[1]
    question, report = rest.split(prompts.REPORT_HEADER, 1)
    return question, report[:-1] if report.endswith("\n") else report


def mock_claims(report):
    refs = {}
    body = []
    in_refs = False
    for line in report.splitlines():
        m = _REF_LINE.match(line)
        if m:
            refs[m.group(1)] = m.group(2)
            continue
        if _REF_HEAD.match(line):
            in_refs = True
            continue
        if in_refs or _ANSWER_LINE.match(line) or line.lstrip().startswith("#"):
            continue
        body.append(line.strip())
    claims = []
    for sent in _SENT.split(" ".join(x for x in body if x)):
        sent = sent.strip()
        if not sent:
            continue
        source = ""
        text = sent
        m = _MARKERS.search(sent)
        if m:
            first = re.findall(r"\d+", m.group(1))[0]
            source = refs.get(first, "")
            text = sent[:m.start()] + (m.group(2) or "")
        claims.append({"claim": text.strip(), "context": sent, "source": source})
    return claims


def mock_atomic(claim):
    core = claim.strip().rstrip(".")
    parts = [p.strip() for p in _SPLIT.split(core) if p.strip()]
    return [p + "." for p in parts] or [claim]
