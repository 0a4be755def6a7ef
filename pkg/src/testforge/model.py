"""Core data model and its JSON-friendly (de)serialization.

Program output is kept as ``str`` decoded with ``surrogateescape`` so that
arbitrary bytes survive comparison and JSON round-trips unchanged.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional


def decode_output(data: bytes) -> str:
    return data.decode("utf-8", errors="surrogateescape")


def encode_output(text: str) -> bytes:
    return text.encode("utf-8", errors="surrogateescape")


def display_text(text: Optional[str]) -> str:
    """Lossy, printable form of captured output."""
    if text is None:
        return "<no output>"
    return encode_output(text).decode("utf-8", errors="replace")


class ProblemKind(str, enum.Enum):
    FULL_PROGRAM = "full_program"
    FUNCTION = "function_implementation"


class TestOrigin(str, enum.Enum):
    __test__ = False

    EDGE_CASE = "edge_case"
    RANDOM = "random"
    INSTRUCTOR = "instructor"


class SuiteKind(str, enum.Enum):
    INSTRUCTOR = "instructor"
    LLM = "llm"


@dataclass
class InstructorTest:
    payload: str
    expected_output: str = ""

    def to_dict(self):
        return {"payload": self.payload, "expected_output": self.expected_output}

    @classmethod
    def from_dict(cls, d):
        return cls(payload=d["payload"], expected_output=d.get("expected_output", ""))


@dataclass
class Problem:
    id: str
    kind: ProblemKind
    statement_text: str
    reference_solution: str
    extra_code: Optional[str] = None
    instructor_tests: list[InstructorTest] = field(default_factory=list)
    excluded: bool = False
    exclusion_reason: Optional[str] = None
    name: str = ""

    def to_dict(self):
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind.value,
            "statement_text": self.statement_text,
            "reference_solution": self.reference_solution,
            "extra_code": self.extra_code,
            "instructor_tests": [t.to_dict() for t in self.instructor_tests],
            "excluded": self.excluded,
            "exclusion_reason": self.exclusion_reason,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=d["id"],
            name=d.get("name", ""),
            kind=ProblemKind(d["kind"]),
            statement_text=d["statement_text"],
            reference_solution=d["reference_solution"],
            extra_code=d.get("extra_code"),
            instructor_tests=[InstructorTest.from_dict(t) for t in d.get("instructor_tests", [])],
            excluded=d.get("excluded", False),
            exclusion_reason=d.get("exclusion_reason"),
        )


@dataclass
class Submission:
    id: str
    student_id: str
    submitted_at: datetime
    code: str
    recorded_correct: int

    def to_dict(self):
        return {
            "id": self.id,
            "student_id": self.student_id,
            "submitted_at": self.submitted_at.isoformat(),
            "code": self.code,
            "recorded_correct": self.recorded_correct,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=d["id"],
            student_id=d["student_id"],
            submitted_at=datetime.fromisoformat(d["submitted_at"]),
            code=d["code"],
            recorded_correct=d["recorded_correct"],
        )


@dataclass
class Test:
    __test__ = False

    index: int
    payload: str
    origin: TestOrigin
    expected_output: Optional[str] = None
    rejected: bool = False
    reject_reason: Optional[str] = None
    # exported expected output, kept for audit only
    original_expected: Optional[str] = None

    def to_dict(self):
        return {
            "index": self.index,
            "payload": self.payload,
            "origin": self.origin.value,
            "expected_output": self.expected_output,
            "rejected": self.rejected,
            "reject_reason": self.reject_reason,
            "original_expected": self.original_expected,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            index=d["index"],
            payload=d["payload"],
            origin=TestOrigin(d["origin"]),
            expected_output=d.get("expected_output"),
            rejected=d.get("rejected", False),
            reject_reason=d.get("reject_reason"),
            original_expected=d.get("original_expected"),
        )


@dataclass
class TestSuite:
    """Ordered tests for one problem.

    ``tests`` holds the final (gradeable) tests; tests that crashed the
    reference solution are moved to ``rejected`` so they stay visible.
    """

    __test__ = False

    problem_id: str
    kind: SuiteKind
    tests: list[Test] = field(default_factory=list)
    rejected: list[Test] = field(default_factory=list)
    seed: Optional[int] = None
    separator: str = ""
    per_test_seeds: bool = False

    @property
    def is_final(self):
        return all(t.expected_output is not None and not t.rejected for t in self.tests)

    def test_seed(self, position):
        if self.seed is None:
            return None
        if self.per_test_seeds:
            # stable per test, derived from the suite seed
            return (self.seed + 7919 * (self.tests[position].index + 1)) % 2**31
        return self.seed

    def to_dict(self):
        return {
            "problem_id": self.problem_id,
            "kind": self.kind.value,
            "seed": self.seed,
            "separator": self.separator,
            "per_test_seeds": self.per_test_seeds,
            "tests": [t.to_dict() for t in self.tests],
            "rejected": [t.to_dict() for t in self.rejected],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            problem_id=d["problem_id"],
            kind=SuiteKind(d["kind"]),
            seed=d.get("seed"),
            separator=d.get("separator", ""),
            per_test_seeds=d.get("per_test_seeds", False),
            tests=[Test.from_dict(t) for t in d.get("tests", [])],
            rejected=[Test.from_dict(t) for t in d.get("rejected", [])],
        )


@dataclass
class GradeRecord:
    submission_id: str
    suite_kind: SuiteKind
    grade: int
    per_test: list[bool] = field(default_factory=list)
    diagnostics: Optional[str] = None
    outputs: list[Optional[str]] = field(default_factory=list)

    @property
    def failed_tests(self):
        return [i for i, ok in enumerate(self.per_test) if not ok]

    def to_dict(self):
        return {
            "submission_id": self.submission_id,
            "suite_kind": self.suite_kind.value,
            "grade": self.grade,
            "per_test": self.per_test,
            "diagnostics": self.diagnostics,
            "outputs": self.outputs,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            submission_id=d["submission_id"],
            suite_kind=SuiteKind(d["suite_kind"]),
            grade=d["grade"],
            per_test=list(d.get("per_test", [])),
            diagnostics=d.get("diagnostics"),
            outputs=list(d.get("outputs", [])),
        )


@dataclass
class TokenUsage:
    prompt: int = 0
    completion: int = 0

    @property
    def total(self):
        return self.prompt + self.completion

    def __add__(self, other):
        return TokenUsage(self.prompt + other.prompt, self.completion + other.completion)

    def to_dict(self):
        return {"prompt": self.prompt, "completion": self.completion, "total": self.total}

    @classmethod
    def from_dict(cls, d):
        usage = cls(d.get("prompt", 0), d.get("completion", 0))
        if "total" in d and d["total"] != usage.total:
            raise ValueError("token usage total does not equal prompt + completion")
        return usage


@dataclass
class DetailedStatement:
    scenario: str
    inputs: str
    outputs: str
    example: str
    limits: str

    SECTIONS = ("Scenario", "Inputs", "Outputs", "Example", "Limits")

    def to_dict(self):
        return {s: getattr(self, s.lower()) for s in self.SECTIONS}

    @classmethod
    def from_dict(cls, d):
        return cls(**{s.lower(): d[s] for s in cls.SECTIONS})


class ArtifactKind(str, enum.Enum):
    GENERATOR_SCRIPT = "generator_script"
    TEST_SCRIPT = "test_script"


@dataclass
class GenerationArtifact:
    kind: ArtifactKind
    source_text: str
    token_usage: TokenUsage = field(default_factory=TokenUsage)
    detailed: Optional[DetailedStatement] = None

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "source_text": self.source_text,
            "token_usage": self.token_usage.to_dict(),
            "detailed": self.detailed.to_dict() if self.detailed else None,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=ArtifactKind(d["kind"]),
            source_text=d["source_text"],
            token_usage=TokenUsage.from_dict(d.get("token_usage", {})),
            detailed=DetailedStatement.from_dict(d["detailed"]) if d.get("detailed") else None,
        )
