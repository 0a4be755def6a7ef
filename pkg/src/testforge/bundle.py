"""Problem bundles: one directory per problem holding a versioned ``bundle.json``.

Layout::

    <bundle>/bundle.json        problem, submissions, suites, grades, artifacts
    <bundle>/annotations.jsonl  append-only mismatch review ledger
    <bundle>/recordings/        replay fixtures for the LLM gateway (optional)
    <bundle>/transcripts/       dumps of failed generations (optional)
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import BundleError, VersionMismatch
from .model import GenerationArtifact, GradeRecord, Problem, Submission, SuiteKind, TestSuite

FORMAT = "testforge-bundle"
FORMAT_VERSION = 1
BUNDLE_FILE = "bundle.json"


@dataclass
class Bundle:
    problem: Problem
    submissions: list[Submission] = field(default_factory=list)
    suites: dict[SuiteKind, TestSuite] = field(default_factory=dict)
    grades: dict[SuiteKind, list[GradeRecord]] = field(default_factory=dict)
    artifact: Optional[GenerationArtifact] = None
    # per-stage input digests, used to skip stages whose inputs are unchanged
    stages: dict[str, str] = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": FORMAT,
            "format_version": FORMAT_VERSION,
            "problem": self.problem.to_dict(),
            "submissions": [s.to_dict() for s in self.submissions],
            "suites": {k.value: s.to_dict() for k, s in sorted(self.suites.items())},
            "grades": {k.value: [g.to_dict() for g in gs] for k, gs in sorted(self.grades.items())},
            "artifact": self.artifact.to_dict() if self.artifact else None,
            "stages": dict(sorted(self.stages.items())),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise VersionMismatch(f"not a bundle document (format={d.get('format')!r})")
        if d.get("format_version") != FORMAT_VERSION:
            raise VersionMismatch(
                f"bundle format version {d.get('format_version')!r}, this build reads {FORMAT_VERSION}")
        return cls(
            problem=Problem.from_dict(d["problem"]),
            submissions=[Submission.from_dict(s) for s in d.get("submissions", [])],
            suites={SuiteKind(k): TestSuite.from_dict(s) for k, s in d.get("suites", {}).items()},
            grades={SuiteKind(k): [GradeRecord.from_dict(g) for g in gs]
                    for k, gs in d.get("grades", {}).items()},
            artifact=GenerationArtifact.from_dict(d["artifact"]) if d.get("artifact") else None,
            stages=dict(d.get("stages", {})),
        )


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_bundle(path, bundle: Bundle) -> Path:
    """Write ``bundle`` into directory ``path`` and return the document path."""
    target = Path(path) / BUNDLE_FILE
    try:
        atomic_write(target, dumps(bundle.to_dict()))
    except OSError as exc:
        raise BundleError(f"cannot write {target}: {exc}") from exc
    return target


def load_bundle(path) -> Bundle:
    path = Path(path)
    doc = path / BUNDLE_FILE if path.is_dir() else path
    try:
        raw = doc.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleError(f"cannot read {doc}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{doc} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise VersionMismatch(f"{doc} is not a bundle document")
    try:
        return Bundle.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{doc} is missing or has invalid fields: {exc}") from None


def is_bundle_dir(path) -> bool:
    return (Path(path) / BUNDLE_FILE).is_file()


def digest(*parts) -> str:
    """Content digest over JSON-serializable parts."""
    h = hashlib.sha256()
    for part in parts:
        h.update(json.dumps(part, sort_keys=True).encode("utf-8", errors="surrogateescape"))
        h.update(b"\x00")
    return h.hexdigest()
