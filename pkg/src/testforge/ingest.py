"""Moodle (CodeRunner) XML and submission CSV ingestion."""
from __future__ import annotations

import csv
import io
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timezone
from html.parser import HTMLParser
from typing import Optional

from .errors import MalformedXml, RowError, SchemaMismatch, UnsupportedQuestionType
from .model import InstructorTest, Problem, ProblemKind, Submission

log = logging.getLogger(__name__)

_IMG_RE = re.compile(
    r"""<\s*(?:img|image)\b(?:[^>"']|"[^"]*"|'[^']*')*>|<\s*/\s*(?:img|image)\s*>""",
    re.IGNORECASE,
)
_SVG_RE = re.compile(r"<\s*svg\b.*?<\s*/\s*svg\s*>", re.IGNORECASE | re.DOTALL)

_FILE_USE = [
    (re.compile(r"\bfopen\s*\("), "fopen"),
    (re.compile(r"\bfreopen\s*\("), "freopen"),
    (re.compile(r"\bFILE\s*\*"), "FILE pointer"),
    (re.compile(r"\bfscanf\s*\(\s*(?!stdin\b)"), "fscanf on a file"),
]


def strip_images(markup: str) -> str:
    """Remove image elements from statement markup, keeping everything else in order."""
    return _IMG_RE.sub("", _SVG_RE.sub("", markup))


_BLOCK_TAGS = {"p", "div", "br", "li", "ul", "ol", "tr", "table", "pre", "h1", "h2", "h3",
               "h4", "h5", "h6", "blockquote", "hr"}


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts = []
        self.pre = 0

    def handle_starttag(self, tag, attrs):
        if tag == "pre":
            self.pre += 1
        if tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag == "pre":
            self.pre = max(0, self.pre - 1)
        if tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if not self.pre:
            data = re.sub(r"[ \t\r\n]+", " ", data)
            if not self.parts or self.parts[-1].endswith("\n"):
                data = data.lstrip(" ")
        self.parts.append(data)


def html_to_text(markup: str) -> str:
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    text = "".join(parser.parts)
    lines = [line.rstrip() for line in text.split("\n")]
    text = "\n".join(line if line.strip() else "" for line in lines)
    return re.sub(r"\n{3,}", "\n\n", text).strip()


def _text_of(elem: Optional[ET.Element]) -> str:
    """CodeRunner exports wrap most values as <x><text>...</text></x>; some are bare."""
    if elem is None:
        return ""
    inner = elem.find("text")
    if inner is not None:
        return inner.text or ""
    return elem.text or ""


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "problem"


def _kind_of(coderunner_type: str) -> Optional[ProblemKind]:
    t = coderunner_type.strip().lower()
    if not t.startswith("c_"):
        return None
    if "function" in t:
        return ProblemKind.FUNCTION
    if "program" in t:
        return ProblemKind.FULL_PROGRAM
    return None


def _file_usage(question: ET.Element, sources: list[tuple[str, str]]) -> Optional[str]:
    if question.find(".//testcase/file") is not None or question.find("./file") is not None:
        return "has attached data files"
    for where, code in sources:
        for pattern, what in _FILE_USE:
            if pattern.search(code):
                return f"uses files ({what} in {where})"
    return None


def parse_moodle_xml(data: bytes, warnings: Optional[list] = None) -> list[Problem]:
    """Parse a Moodle quiz export into problems.

    Only CodeRunner questions with a C prototype are understood; anything
    else is skipped and an :class:`UnsupportedQuestionType` is appended to
    ``warnings``. File-based problems come back with ``excluded=True``.
    """
    if warnings is None:
        warnings = []
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MalformedXml(str(exc), line, col) from None
    if root.tag != "quiz":
        raise MalformedXml(f"root element is <{root.tag}>, expected <quiz>")

    problems = []
    seen_ids = set()
    for n, question in enumerate(root.findall("question"), start=1):
        qtype = question.get("type", "")
        if qtype == "category":
            continue
        name = _text_of(question.find("name")).strip()
        label = name or f"question {n}"
        if qtype != "coderunner":
            _warn(warnings, UnsupportedQuestionType(f"{label}: question type {qtype!r} skipped"))
            continue
        kind = _kind_of(question.findtext("coderunnertype", ""))
        if kind is None:
            _warn(warnings, UnsupportedQuestionType(
                f"{label}: CodeRunner type {question.findtext('coderunnertype', '')!r} skipped"))
            continue
        reference = _text_of(question.find("answer"))
        if not reference.strip():
            _warn(warnings, UnsupportedQuestionType(f"{label}: no reference solution, skipped"))
            continue

        pid = question.findtext("idnumber", "").strip() or _slug(label)
        if pid in seen_ids:
            pid = f"{pid}-{n}"
        seen_ids.add(pid)

        extra = _text_of(question.find("globalextra"))
        tests = []
        for tc in question.findall("testcases/testcase"):
            payload = _text_of(tc.find("stdin" if kind is ProblemKind.FULL_PROGRAM else "testcode"))
            if kind is ProblemKind.FUNCTION and not payload.strip():
                _warn(warnings, UnsupportedQuestionType(f"{label}: empty test code skipped"))
                continue
            tests.append(InstructorTest(payload=payload, expected_output=_text_of(tc.find("expected"))))

        statement = html_to_text(strip_images(_text_of(question.find("questiontext"))))
        sources = [("reference solution", reference), ("extra code", extra)]
        sources += [("instructor test", t.payload) for t in tests]
        reason = _file_usage(question, sources)
        problems.append(Problem(
            id=pid, name=name, kind=kind, statement_text=statement, reference_solution=reference,
            extra_code=extra if extra.strip() else None, instructor_tests=tests,
            excluded=reason is not None, exclusion_reason=reason,
        ))
    return problems


def _warn(warnings, record):
    log.warning("%s", record)
    warnings.append(record)


@dataclass
class CsvColumns:
    code: str = "code"
    student_id: str = "student_id"
    timestamp: str = "timestamp"
    correct: str = "correct"

    @classmethod
    def from_mapping(cls, mapping):
        return cls(**{k: v for k, v in (mapping or {}).items()})


def _parse_timestamp(value: str) -> datetime:
    value = value.strip()
    if re.fullmatch(r"\d+(\.\d+)?", value):
        return datetime.fromtimestamp(float(value), tz=timezone.utc)
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def parse_submissions_csv(data: bytes, problem_id: str, columns: Optional[CsvColumns] = None,
                          errors: Optional[list] = None) -> list[Submission]:
    """One submission per data row, in file order. Bad rows go to ``errors``."""
    columns = columns or CsvColumns()
    if errors is None:
        errors = []
    text = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("empty CSV document") from None
    wanted = [columns.code, columns.student_id, columns.timestamp, columns.correct]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaMismatch(f"missing column(s) {missing}; header is {header}")
    pos = {c: header.index(c) for c in wanted}

    subs = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            flag = row[pos[columns.correct]].strip()
            if flag not in ("0", "1"):
                raise ValueError(f"correctness flag must be 0 or 1, got {flag!r}")
            student = row[pos[columns.student_id]].strip()
            if not student:
                raise ValueError("empty student id")
            stamp = _parse_timestamp(row[pos[columns.timestamp]])
        except ValueError as exc:
            err = RowError(row_no, str(exc))
            log.warning("%s: %s", problem_id, err)
            errors.append(err)
            continue
        subs.append(Submission(
            id=f"{row_no:05d}", student_id=student, submitted_at=stamp,
            code=row[pos[columns.code]], recorded_correct=int(flag),
        ))
    return subs


def write_submissions_csv(submissions: list[Submission], columns: Optional[CsvColumns] = None) -> bytes:
    columns = columns or CsvColumns()
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow([columns.code, columns.student_id, columns.timestamp, columns.correct])
    for s in submissions:
        writer.writerow([s.code, s.student_id, s.submitted_at.isoformat(), s.recorded_correct])
    return buf.getvalue().encode("utf-8")


__all__ = [
    "strip_images", "html_to_text", "parse_moodle_xml", "parse_submissions_csv",
    "write_submissions_csv", "CsvColumns",
]
