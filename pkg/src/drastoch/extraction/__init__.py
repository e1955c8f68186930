from .judge import JudgeTransport, MockJudge
from .pipeline import (
    Claim,
    ReportRecord,
    RunArtifact,
    decompose_atomic,
    extract_answer,
    extract_claims,
    extract_run,
    extract_runs,
    grade_accuracy,
    judge_equivalent,
    load_reports,
)
from ..schema import parse_structured as parse_structured_response

__all__ = [
    "Claim",
    "JudgeTransport",
    "MockJudge",
    "ReportRecord",
    "RunArtifact",
    "decompose_atomic",
    "extract_answer",
    "extract_claims",
    "extract_run",
    "extract_runs",
    "grade_accuracy",
    "judge_equivalent",
    "load_reports",
    "parse_structured_response",
]
