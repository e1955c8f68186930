"""Versioned prompt templates.

The claim, atomic-fact and answer templates are stored byte-for-byte as
published; the two equivalence templates are our own. Changing any template
file requires a new version suffix so run metadata keeps pointing at the text
that produced it.
"""

import hashlib
import json
from importlib import resources

TEMPLATES = {
    "claim_extraction": "v1",
    "atomic_decomposition": "v1",
    "answer_extraction": "v1",
    "answer_equivalence": "v1",
    "finding_equivalence": "v1",
}

QUESTION_HEADER = "\n## Research Question\n"
REPORT_HEADER = "\n\n## Report\n"
CLAIM_HEADER = "\nInput: "
PAIR_HEADER = "\nA: "


def template(name):
    version = TEMPLATES[name]
    return resources.files(__package__).joinpath("prompts", f"{name}.{version}.txt").read_text(
        encoding="utf-8"
    )


def template_versions():
    """``{name: "v1:<sha256 prefix>"}`` for run metadata."""
    out = {}
    for name, version in TEMPLATES.items():
        digest = hashlib.sha256(template(name).encode("utf-8")).hexdigest()[:12]
        out[name] = f"{version}:{digest}"
    return out


def claims_prompt(question, report):
    return template("claim_extraction") + QUESTION_HEADER + question + REPORT_HEADER + report + "\n"


def answer_prompt(question, report):
    return template("answer_extraction") + QUESTION_HEADER + question + REPORT_HEADER + report + "\n"


def atomic_prompt(claim):
    return template("atomic_decomposition") + CLAIM_HEADER + json.dumps(claim, ensure_ascii=False) + "\nOutput:"


def equivalence_prompt(a, b, kind="answer"):
    name = "answer_equivalence" if kind == "answer" else "finding_equivalence"
    return (
        template(name)
        + PAIR_HEADER + json.dumps(a, ensure_ascii=False)
        + "\nB: " + json.dumps(b, ensure_ascii=False) + "\n"
    )
