"""Differential evaluation of LLM suites against instructor suites.

Every compiling submission falls in one quadrant of (LLM grade, instructor
grade). Agreeing grades decide validity directly; disagreements need a
human annotation before they count towards the confusion matrices.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from .errors import InvalidGrade, NotReviewable, UndefinedMetric, UnresolvedMismatches


class Quadrant(str, enum.Enum):
    BOTH_VALID = "both_valid"
    BOTH_INVALID = "both_invalid"
    LLM_VALID_INSTR_INVALID = "llm_valid_instr_invalid"
    LLM_INVALID_INSTR_VALID = "llm_invalid_instr_valid"
    EXCLUDED_NO_COMPILE = "excluded_no_compile"


MISMATCHES = (Quadrant.LLM_VALID_INSTR_INVALID, Quadrant.LLM_INVALID_INSTR_VALID)


class Validity(str, enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    NEEDS_REVIEW = "needs_review"


class Cause(str, enum.Enum):
    LLM_MISMATCH = "llm_mismatch"
    INSTRUCTOR_MISMATCH = "instructor_mismatch"
    OTHER_MISMATCH = "other_mismatch"


class Subject(str, enum.Enum):
    LLM = "llm"
    INSTRUCTOR = "instructor"


def _check(*grades):
    for g in grades:
        if g not in (1, 0, -1) or isinstance(g, bool):
            raise InvalidGrade(f"grade {g!r} is not one of 1, 0, -1")


def quadrant(llm_grade: int, instructor_grade: int) -> Quadrant:
    _check(llm_grade, instructor_grade)
    if llm_grade == -1 or instructor_grade == -1:
        return Quadrant.EXCLUDED_NO_COMPILE
    return {
        (1, 1): Quadrant.BOTH_VALID,
        (0, 0): Quadrant.BOTH_INVALID,
        (1, 0): Quadrant.LLM_VALID_INSTR_INVALID,
        (0, 1): Quadrant.LLM_INVALID_INSTR_VALID,
    }[(llm_grade, instructor_grade)]


def decide_validity(llm_grade: int, instructor_grade: int) -> Validity:
    _check(llm_grade, instructor_grade)
    if -1 in (llm_grade, instructor_grade):
        raise InvalidGrade("validity is undefined for solutions that do not compile")
    if llm_grade == instructor_grade:
        return Validity.VALID if llm_grade == 1 else Validity.INVALID
    return Validity.NEEDS_REVIEW


@dataclass(frozen=True)
class Annotation:
    problem_id: str
    submission_id: str
    cause: Cause
    resolved_validity: Validity
    note: str = ""
    timestamp: str = ""
    annotator: str = ""

    def to_dict(self):
        return {
            "problem_id": self.problem_id,
            "submission_id": self.submission_id,
            "cause": self.cause.value,
            "resolved_validity": self.resolved_validity.value,
            "note": self.note,
            "timestamp": self.timestamp,
            "annotator": self.annotator,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["problem_id"], d["submission_id"], Cause(d["cause"]), Validity(d["resolved_validity"]),
                   d.get("note", ""), d.get("timestamp", ""), d.get("annotator", ""))


@dataclass(frozen=True)
class QuadrantRecord:
    problem_id: str
    submission_id: str
    llm_grade: int
    instructor_grade: int
    quadrant: Quadrant
    validity: Optional[Validity]
    annotation: Optional[Annotation] = None

    @property
    def key(self):
        return (self.problem_id, self.submission_id)

    @property
    def included(self):
        """Counts towards matrices: compiles and is not an Other mismatch."""
        if self.quadrant is Quadrant.EXCLUDED_NO_COMPILE:
            return False
        return not (self.annotation and self.annotation.cause is Cause.OTHER_MISMATCH)

    def to_dict(self):
        return {
            "problem_id": self.problem_id,
            "submission_id": self.submission_id,
            "llm_grade": self.llm_grade,
            "instructor_grade": self.instructor_grade,
            "quadrant": self.quadrant.value,
            "validity": self.validity.value if self.validity else None,
            "annotation": self.annotation.to_dict() if self.annotation else None,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["problem_id"], d["submission_id"], d["llm_grade"], d["instructor_grade"],
                   Quadrant(d["quadrant"]), Validity(d["validity"]) if d.get("validity") else None,
                   Annotation.from_dict(d["annotation"]) if d.get("annotation") else None)


def make_record(problem_id: str, submission_id: str, llm_grade: int, instructor_grade: int) -> QuadrantRecord:
    q = quadrant(llm_grade, instructor_grade)
    validity = None if q is Quadrant.EXCLUDED_NO_COMPILE else decide_validity(llm_grade, instructor_grade)
    return QuadrantRecord(problem_id, submission_id, llm_grade, instructor_grade, q, validity)


def annotate(record: QuadrantRecord, cause: Cause, resolved_validity: Validity, note: str = "",
             annotator: str = "", ledger: Optional["AnnotationLedger"] = None,
             timestamp: Optional[str] = None) -> QuadrantRecord:
    if record.quadrant not in MISMATCHES:
        raise NotReviewable(f"{record.problem_id}/{record.submission_id} is {record.quadrant.value}, not a mismatch")
    resolved_validity = Validity(resolved_validity)
    if resolved_validity is Validity.NEEDS_REVIEW:
        raise ValueError("an annotation must resolve validity to valid or invalid")
    ann = Annotation(record.problem_id, record.submission_id, Cause(cause), resolved_validity, note,
                     timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"), annotator)
    if ledger is not None:
        ledger.append(ann)
    return replace(record, annotation=ann, validity=resolved_validity)


class AnnotationLedger:
    """Append-only JSON-lines file of annotations; the latest entry per record wins."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, annotation: Annotation):
        line = json.dumps(annotation.to_dict(), sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def entries(self) -> list[Annotation]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(Annotation.from_dict(json.loads(line)))
        return out


def apply_annotations(records: Iterable[QuadrantRecord], annotations: Iterable[Annotation]) -> list[QuadrantRecord]:
    latest = {}
    for ann in annotations:
        latest[(ann.problem_id, ann.submission_id)] = ann
    out = []
    for r in records:
        ann = latest.get(r.key)
        if ann is not None and r.quadrant in MISMATCHES:
            r = replace(r, annotation=ann, validity=ann.resolved_validity)
        out.append(r)
    return out


# -- confusion matrices and metrics ---------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self):
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "n": self.n}


def unresolved(records: Iterable[QuadrantRecord]) -> list[QuadrantRecord]:
    return [r for r in records if r.validity is Validity.NEEDS_REVIEW]


def confusion_matrix(records: Iterable[QuadrantRecord], subject: Subject, allow_partial: bool = False) -> ConfusionMatrix:
    """Suite grade (rows) against actual validity (columns).

    Non-compiling solutions and Other mismatches are left out. Unreviewed
    mismatches raise UnresolvedMismatches unless ``allow_partial`` is set,
    in which case they are skipped.
    """
    records = list(records)
    pending = unresolved(records)
    if pending and not allow_partial:
        raise UnresolvedMismatches(len(pending))
    counts = Counter()
    for r in records:
        if not r.included or r.validity is Validity.NEEDS_REVIEW:
            continue
        grade = r.llm_grade if Subject(subject) is Subject.LLM else r.instructor_grade
        counts[(grade == 1, r.validity is Validity.VALID)] += 1
    return ConfusionMatrix(tp=counts[(True, True)], fp=counts[(True, False)],
                           fn=counts[(False, True)], tn=counts[(False, False)])


def truncate_percent(value: Fraction, places: int = 1) -> str:
    """Percentage cut (not rounded) to ``places`` decimals."""
    scale = 10 ** places
    cut = math.floor(Fraction(value) * 100 * scale)
    if not places:
        return str(cut)
    sign = "-" if cut < 0 else ""
    whole, frac = divmod(abs(cut), scale)
    return f"{sign}{whole}.{frac:0{places}d}"


def round_percent(value: Fraction, places: int = 2) -> str:
    """Percentage rounded half-up to ``places`` decimals."""
    v = Fraction(value) * 100
    d = Decimal(v.numerator) / Decimal(v.denominator)
    return str(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


METRIC_NAMES = ("accuracy", "precision", "recall", "false_positive_rate")
METRIC_LABELS = {
    "accuracy": ("Accuracy", "(TP + TN) / n"),
    "precision": ("Precision", "TP / (TP + FP)"),
    "recall": ("Recall", "TP / (TP + FN)"),
    "false_positive_rate": ("False Positive Rate", "FP / (FP + TN)"),
}


@dataclass(frozen=True)
class Metrics:
    accuracy: Optional[Fraction]
    precision: Optional[Fraction]
    recall: Optional[Fraction]
    false_positive_rate: Optional[Fraction]

    def display(self, name: str) -> str:
        value = getattr(self, name)
        return "n/a" if value is None else truncate_percent(value)

    def to_dict(self):
        out = {}
        for name in METRIC_NAMES:
            value = getattr(self, name)
            out[name] = None if value is None else {
                "fraction": f"{value.numerator}/{value.denominator}",
                "value": float(value),
                "display": truncate_percent(value),
            }
        return out


def metrics(matrix: ConfusionMatrix, strict: bool = True) -> Metrics:
    """Accuracy, precision, recall and false positive rate as exact fractions.

    A zero denominator raises UndefinedMetric, or yields None when
    ``strict`` is false.
    """
    m = matrix
    parts = {
        "accuracy": (m.tp + m.tn, m.n),
        "precision": (m.tp, m.tp + m.fp),
        "recall": (m.tp, m.tp + m.fn),
        "false_positive_rate": (m.fp, m.fp + m.tn),
    }
    values = {}
    for name, (num, den) in parts.items():
        if den == 0:
            if strict:
                raise UndefinedMetric(name)
            values[name] = None
        else:
            values[name] = Fraction(num, den)
    return Metrics(**values)


# -- per-problem tables -----------------------------------------------------------

@dataclass(frozen=True)
class ProblemRow:
    problem_id: str
    n: int
    matches: int
    llm_mismatches: int
    instructor_mismatches: int

    @property
    def match_fraction(self):
        return Fraction(self.matches, self.n)

    def percentages(self):
        return (round_percent(Fraction(self.matches, self.n)),
                round_percent(Fraction(self.llm_mismatches, self.n)),
                round_percent(Fraction(self.instructor_mismatches, self.n)))

    def to_dict(self):
        m, l, i = self.percentages()
        return {"problem_id": self.problem_id, "n": self.n, "matches": self.matches,
                "llm_mismatches": self.llm_mismatches, "instructor_mismatches": self.instructor_mismatches,
                "pct_matches": m, "pct_llm_mismatches": l, "pct_instructor_mismatches": i}


def per_problem_report(records: Iterable[QuadrantRecord], problem_ids: Iterable[str] = (),
                       warnings: Optional[list] = None) -> list[ProblemRow]:
    """Match / mismatch shares per problem over compiling, non-Other records.

    Rows are sorted by match share (descending), ties by size (descending).
    Problems listed in ``problem_ids`` without any such record are omitted
    with a warning.
    """
    records = list(records)
    pending = unresolved(records)
    if pending:
        raise UnresolvedMismatches(len(pending))
    groups = defaultdict(list)
    for r in records:
        groups[r.problem_id].append(r)
    rows = []
    for pid in list(dict.fromkeys(list(problem_ids) + list(groups))):
        rs = [r for r in groups.get(pid, []) if r.included]
        if not rs:
            if warnings is not None:
                warnings.append(f"{pid}: no compiling records; row omitted")
            continue
        causes = Counter(r.annotation.cause for r in rs if r.annotation)
        rows.append(ProblemRow(
            pid, len(rs), sum(r.quadrant not in MISMATCHES for r in rs),
            causes[Cause.LLM_MISMATCH], causes[Cause.INSTRUCTOR_MISMATCH],
        ))
    rows.sort(key=lambda row: (-row.match_fraction, -row.n))
    return rows


MISMATCH_COLUMNS = [(c, q) for c in Cause for q in MISMATCHES]


def mismatch_table(records: Iterable[QuadrantRecord]) -> dict[str, dict]:
    """Per problem: number of compiling solutions and mismatch counts by cause and direction."""
    table = {}
    for r in records:
        row = table.setdefault(r.problem_id, {"n": 0, "unresolved": 0,
                                              **{f"{c.value}:{q.value}": 0 for c, q in MISMATCH_COLUMNS}})
        if r.quadrant is Quadrant.EXCLUDED_NO_COMPILE:
            continue
        row["n"] += 1
        if r.quadrant in MISMATCHES:
            if r.annotation:
                row[f"{r.annotation.cause.value}:{r.quadrant.value}"] += 1
            else:
                row["unresolved"] += 1
    return table


# -- evaluation document -----------------------------------------------------------

@dataclass
class Evaluation:
    records: list[QuadrantRecord] = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, Evaluation) and self.records == other.records

    @classmethod
    def from_grades(cls, problem_id: str, llm: dict, instructor: dict, annotations=()):
        """``llm`` and ``instructor`` map submission id to suite grade."""
        missing = set(llm) ^ set(instructor)
        if missing:
            raise ValueError(f"{problem_id}: submissions graded by only one suite: {sorted(missing)[:5]}")
        recs = [make_record(problem_id, sid, llm[sid], instructor[sid]) for sid in llm]
        return cls(apply_annotations(recs, annotations))

    def merged(self, other: "Evaluation") -> "Evaluation":
        return Evaluation(self.records + other.records)

    def quadrant_counts(self) -> dict[str, int]:
        c = Counter(r.quadrant for r in self.records)
        return {q.value: c[q] for q in Quadrant}

    def needs_review(self) -> list[QuadrantRecord]:
        return unresolved(self.records)

    def other_mismatches(self) -> int:
        return sum(1 for r in self.records if r.annotation and r.annotation.cause is Cause.OTHER_MISMATCH)

    def to_dict(self):
        doc = {
            "format": "testforge-evaluation",
            "format_version": 1,
            "records": [r.to_dict() for r in self.records],
            "quadrant_counts": self.quadrant_counts(),
            "needs_review": len(self.needs_review()),
            "other_mismatches": self.other_mismatches(),
            "mismatch_table": mismatch_table(self.records),
        }
        if not self.needs_review():
            for subject in Subject:
                cm = confusion_matrix(self.records, subject)
                doc.setdefault("confusion_matrices", {})[subject.value] = cm.to_dict()
                doc.setdefault("metrics", {})[subject.value] = metrics(cm, strict=False).to_dict()
            doc["per_problem"] = [row.to_dict() for row in per_problem_report(self.records)]
        return doc

    @classmethod
    def from_dict(cls, d):
        return cls([QuadrantRecord.from_dict(r) for r in d.get("records", [])])


def _md_table(header, rows):
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(out)


PER_PROBLEM_HEADER = ["problem_id", "n", "pct_matches", "pct_llm_mismatches", "pct_instructor_mismatches"]


def _render_markdown(ev: Evaluation) -> str:
    parts = ["# Evaluation report", ""]
    counts = ev.quadrant_counts()
    parts += ["## Grade quadrants", "", _md_table(
        ["Quadrant", "Solutions"], [(q, n) for q, n in counts.items()]), ""]

    table = mismatch_table(ev.records)
    header = ["Problem", "# of Solutions", "LLM Mismatch (LLM: V / Instructor: X)",
              "LLM Mismatch (LLM: X / Instructor: V)", "Instructor Mismatch (LLM: V / Instructor: X)",
              "Instructor Mismatch (LLM: X / Instructor: V)", "Other Mismatch (LLM: V / Instructor: X)",
              "Other Mismatch (LLM: X / Instructor: V)", "Unreviewed"]
    rows = [[pid, row["n"], *(row[f"{c.value}:{q.value}"] for c, q in MISMATCH_COLUMNS), row["unresolved"]]
            for pid, row in table.items()]
    parts += ["## Mismatches", "", _md_table(header, rows), ""]

    pending = ev.needs_review()
    if pending:
        parts += [f"{len(pending)} mismatch(es) still need review; confusion matrices, metrics and the "
                  "per-problem table are produced once every mismatch is annotated.", ""]
        return "\n".join(parts)

    matrices = {s: confusion_matrix(ev.records, s) for s in Subject}
    titles = {Subject.LLM: "LLM Test Suite", Subject.INSTRUCTOR: "Instructor Test Suite"}
    for s, cm in matrices.items():
        parts += [f"## Confusion matrix: {titles[s]} (n = {cm.n:,})", "",
                  _md_table([f"{titles[s]} Grade", "Actual Valid", "Actual Invalid"],
                            [["Valid", f"{cm.tp:,}", f"{cm.fp:,}"], ["Invalid", f"{cm.fn:,}", f"{cm.tn:,}"]]), ""]

    ms = {s: metrics(cm, strict=False) for s, cm in matrices.items()}
    rows = []
    for name in METRIC_NAMES:
        label, formula = METRIC_LABELS[name]
        cells = [ms[s].display(name) for s in Subject]
        rows.append([label, formula, *(c if c == "n/a" else c + "%" for c in cells)])
    parts += ["## Metrics", "", _md_table(["Metric", "Formula", titles[Subject.LLM], titles[Subject.INSTRUCTOR]], rows), ""]

    rows = [[r.problem_id, f"{r.n:,}", *r.percentages()] for r in per_problem_report(ev.records)]
    parts += ["## Per-problem performance", "", _md_table(
        ["Problem", "# of Solutions", "% of Matches", "% of LLM Mismatches", "% of Instructor Mismatches"], rows), ""]
    return "\n".join(parts)


def emit_report(ev: Evaluation, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(ev.to_dict(), indent=2) + "\n"
    if fmt == "markdown":
        return _render_markdown(ev)
    if fmt == "csv":
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PER_PROBLEM_HEADER)
        for row in per_problem_report(ev.records):
            writer.writerow([row.problem_id, row.n, *row.percentages()])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")
