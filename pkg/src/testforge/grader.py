"""Per-test output comparison, suite grades and batch grading."""
from __future__ import annotations

import csv
import enum
import io
import json
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

from . import runner
from .errors import CompileError, LengthMismatch, TestforgeError
from .model import GradeRecord, Problem, Submission, TestSuite

PASS, FAIL, NO_COMPILE = 1, 0, -1


class Policy(str, enum.Enum):
    EXACT = "exact"
    TRIM_TRAILING = "trim_trailing"


def _trim(text: str) -> str:
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def compare_output(actual: Optional[str], expected: Optional[str], policy: Policy = Policy.TRIM_TRAILING) -> bool:
    if actual is None or expected is None:
        return False
    if Policy(policy) is Policy.EXACT:
        return actual == expected
    return _trim(actual) == _trim(expected)


def grade_solution(outputs: Union[list, CompileError], suite: TestSuite, policy: Policy = Policy.TRIM_TRAILING,
                   submission_id: str = "") -> GradeRecord:
    """Suite grade: 1 when every test passes, 0 otherwise, -1 for a compile error."""
    if isinstance(outputs, CompileError):
        return GradeRecord(submission_id, suite.kind, NO_COMPILE, [], outputs.diagnostics, [])
    if len(outputs) != len(suite.tests):
        raise LengthMismatch(f"{len(outputs)} outputs for {len(suite.tests)} tests")
    per_test = [compare_output(o, t.expected_output, policy) for o, t in zip(outputs, suite.tests)]
    return GradeRecord(submission_id, suite.kind, PASS if all(per_test) else FAIL, per_test, None, list(outputs))


def _grade_one(sub: Submission, suite, problem, limits, toolchain, policy, work_root):
    workdir = tempfile.mkdtemp(prefix=f"tf-{sub.id}-", dir=work_root)
    try:
        try:
            outputs = runner.run_suite(sub.code, suite, problem, limits, toolchain, workdir=workdir)
        except CompileError as exc:
            outputs = exc
        return grade_solution(outputs, suite, policy, sub.id)
    except TestforgeError as exc:
        # recorded against this submission only
        return GradeRecord(sub.id, suite.kind, FAIL, [False] * len(suite.tests),
                           f"{type(exc).__name__}: {exc}", [None] * len(suite.tests))
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def grade_batch(submissions: list[Submission], suite: TestSuite, problem: Problem, limits=None,
                policy: Policy = Policy.TRIM_TRAILING, workers: int = 1, toolchain=None,
                work_root=None) -> list[GradeRecord]:
    """Grade every submission; results come back in submission order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    limits = limits or runner.Limits()
    if not submissions:
        return []

    def job(sub):
        return _grade_one(sub, suite, problem, limits, toolchain, policy, work_root)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, submissions))


CSV_HEADER = ["submission_id", "suite_kind", "grade", "failed_tests"]


def export_grades_csv(records: list[GradeRecord]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.submission_id, r.suite_kind.value, r.grade,
                         " ".join(str(i + 1) for i in r.failed_tests)])
    return buf.getvalue()


def export_grades_json(records: list[GradeRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2) + "\n"
