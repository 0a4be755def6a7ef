"""Turn generation artifacts into finished test suites."""
from __future__ import annotations

import json
import logging
import random
import re
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import runner
from .errors import (CompileError, GeneratorFailure, HarnessError, InterpreterMissing, ParseError,
                     ReferenceCompileError, SchemaError)
from .model import (ArtifactKind, GenerationArtifact, Problem, ProblemKind, SuiteKind, Test,
                    TestOrigin, TestSuite, decode_output)

log = logging.getLogger(__name__)

MARKER_RE = re.compile(r"<<TEST (\d+) (BEGIN|END)>>")
RANDOM_TESTS = 100
_LOOP_RE = re.compile(r"\b(for|while)\s*\(")
_RAND_RE = re.compile(r"\brand\s*\(")


def begin_marker(n):
    return f"<<TEST {n} BEGIN>>"


def end_marker(n):
    return f"<<TEST {n} END>>"


def new_separator(rng=None) -> str:
    rng = rng or random.SystemRandom()
    return f"#<ab@{rng.randrange(10**8):08d}#@>#"


def new_seed(rng=None) -> int:
    rng = rng or random.SystemRandom()
    return rng.randrange(1, 2**31)


# -- generator scripts (full-program problems) --------------------------------

def run_generator_script(script_text: str, interpreter: str = "python3", timeout: float = 60.0,
                         workdir=None) -> list[str]:
    """Run a test generator and return the stdin payloads it prints, in order."""
    exe = shutil.which(interpreter)
    if exe is None:
        raise InterpreterMissing(f"interpreter {interpreter!r} not found on PATH")
    scratch = Path(tempfile.mkdtemp(prefix="tf-gen-", dir=workdir))
    try:
        (scratch / "generator.py").write_text(script_text, encoding="utf-8")
        result = runner.execute([exe, "generator.py"], scratch, timeout=timeout, memory_mb=None,
                                output_cap=64 * 1024 * 1024)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    if not result.ok:
        raise GeneratorFailure(f"generator script {result.describe()}",
                               result.stderr.decode("utf-8", errors="replace"))
    return parse_generator_output(result.stdout.decode("utf-8", errors="replace"))


def parse_generator_output(text: str) -> list[str]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"generator output is not JSON: {exc}") from None
    if not isinstance(data, list):
        raise SchemaError(f"generator output is a JSON {type(data).__name__}, expected an array")
    payloads = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"input"}:
            keys = sorted(item) if isinstance(item, dict) else type(item).__name__
            raise SchemaError(f"element {i} must be an object with the single key 'input', got {keys}")
        if not isinstance(item["input"], str):
            raise SchemaError(f"element {i}: 'input' must be a string")
        payloads.append(item["input"])
    return payloads


def tests_from_payloads(payloads: list[str]) -> list[Test]:
    """Edge-case tests come first; a trailing block of 100 is the random batch."""
    n_random = RANDOM_TESTS if len(payloads) > RANDOM_TESTS else 0
    cut = len(payloads) - n_random
    return [Test(index=i, payload=p, origin=TestOrigin.RANDOM if i >= cut else TestOrigin.EDGE_CASE)
            for i, p in enumerate(payloads)]


# -- test scripts (function problems) -----------------------------------------

@dataclass
class ScriptBlock:
    number: int
    begin_line: str
    payload: str
    end_line: str
    begin_lineno: int


@dataclass
class TestScript:
    """A marker-delimited test script split into its pieces.

    ``gaps[i]`` is the text between block ``i`` and block ``i + 1``;
    :meth:`reassemble` puts everything back together byte for byte.
    """

    __test__ = False

    prefix: str
    blocks: list[ScriptBlock] = field(default_factory=list)
    gaps: list[str] = field(default_factory=list)
    suffix: str = ""

    def reassemble(self) -> str:
        out = [self.prefix]
        for i, b in enumerate(self.blocks):
            if i:
                out.append(self.gaps[i - 1])
            out += [b.begin_line, b.payload, b.end_line]
        out.append(self.suffix)
        return "".join(out)

    def test_section(self) -> str:
        full = self.reassemble()
        return full[len(self.prefix):len(full) - len(self.suffix)]


def scan_test_script(script: str) -> TestScript:
    lines = script.splitlines(keepends=True)
    prefix, blocks, gaps = [], [], []
    current, pending = None, []
    last_number = 0
    seen_any = False
    for lineno, line in enumerate(lines, start=1):
        found = MARKER_RE.findall(line)
        if len(found) > 1:
            raise ParseError("more than one marker on a line", lineno)
        if not found:
            if current is not None:
                current["payload"].append(line)
            elif seen_any:
                pending.append(line)
            else:
                prefix.append(line)
            continue
        number, which = int(found[0][0]), found[0][1]
        if which == "BEGIN":
            if current is not None:
                raise ParseError(f"{begin_marker(number)} inside unfinished test {current['n']}", lineno)
            if number <= last_number:
                raise ParseError(f"test {number} begins after test {last_number}", lineno)
            if seen_any:
                gaps.append("".join(pending))
                pending = []
            current = {"n": number, "begin": line, "payload": [], "lineno": lineno}
        else:
            if current is None:
                raise ParseError(f"{end_marker(number)} without a matching begin marker", lineno)
            if number != current["n"]:
                raise ParseError(f"{end_marker(number)} closes test {current['n']}", lineno)
            blocks.append(ScriptBlock(number, current["begin"], "".join(current["payload"]), line,
                                      current["lineno"]))
            last_number = number
            current = None
            seen_any = True
    if current is not None:
        raise ParseError(f"test {current['n']} is never closed", current["lineno"])
    if not blocks:
        raise ParseError("script contains no marked tests")
    return TestScript(prefix="".join(prefix), blocks=blocks, gaps=gaps, suffix="".join(pending))


def is_random_block(payload: str) -> bool:
    return bool(_LOOP_RE.search(payload) and _RAND_RE.search(payload))


def parse_test_script(script_text: str) -> list[Test]:
    """One test per BEGIN/END marker pair; loop blocks that call rand() are random tests."""
    script = scan_test_script(script_text)
    return [
        Test(index=i, payload=b.payload,
             origin=TestOrigin.RANDOM if is_random_block(b.payload) else TestOrigin.EDGE_CASE)
        for i, b in enumerate(script.blocks)
    ]


# -- expected outputs -----------------------------------------------------------

def _reject(test: Test, reason: str) -> Test:
    return replace(test, rejected=True, reject_reason=reason, expected_output=None)


def _run_reference(problem: Problem, suite: TestSuite, limits, toolchain):
    try:
        return runner.run_suite(problem.reference_solution, suite, problem, limits, toolchain,
                                with_results=True)
    except CompileError as exc:
        raise ReferenceCompileError(exc.diagnostics) from None


def materialize_expected_outputs(suite: TestSuite, problem: Problem, limits=None, toolchain=None,
                                 rng=None, max_rounds: Optional[int] = None) -> TestSuite:
    """Run the reference on every test and record its output as expected.

    Tests on which the reference crashes, exits non-zero or times out are
    moved to ``rejected``. The separator is replaced whenever it collides
    with an expected output.
    """
    limits = limits or runner.Limits()
    pending = [replace(t, expected_output=None) for t in suite.tests]
    rejected = list(suite.rejected)
    separator = suite.separator or new_separator(rng)
    rounds = max_rounds or (len(pending) + 10)

    for _ in range(rounds):
        work = replace(suite, tests=pending, rejected=[], separator=separator)
        outputs, results = _run_reference(problem, work, limits, toolchain)

        if problem.kind is ProblemKind.FULL_PROGRAM:
            keep = []
            for test, out, res in zip(pending, outputs, results):
                if out is runner.NO_OUTPUT:
                    rejected.append(_reject(test, f"reference solution {res.describe()}"))
                else:
                    keep.append(replace(test, expected_output=out))
            pending = keep
        else:
            result = results[0]
            parts = runner.split_output(decode_output(result.stdout), separator) if pending else []
            if len(parts) > len(pending):
                separator = new_separator(rng)
                continue
            if pending and (not result.ok or len(parts) < len(pending)):
                bad = len(parts) - 1
                why = result.describe() if not result.ok else "ended the harness early"
                rejected.append(_reject(pending[bad], f"reference solution {why}"))
                pending = pending[:bad] + pending[bad + 1:]
                continue
            pending = [replace(t, expected_output=o) for t, o in zip(pending, outputs)]

        if any(separator in t.expected_output for t in pending):
            separator = new_separator(rng)
            pending = [replace(t, expected_output=None) for t in pending]
            continue
        rejected.sort(key=lambda t: t.index)
        return replace(suite, tests=pending, rejected=rejected, separator=separator)
    raise HarnessError("could not produce a consistent suite from the reference solution")


def regenerate_instructor_outputs(problem: Problem, limits=None, toolchain=None, rng=None) -> TestSuite:
    tests = [Test(index=i, payload=t.payload, origin=TestOrigin.INSTRUCTOR,
                  original_expected=t.expected_output)
             for i, t in enumerate(problem.instructor_tests)]
    suite = TestSuite(problem_id=problem.id, kind=SuiteKind.INSTRUCTOR, tests=tests,
                      separator=new_separator(rng))
    if not tests:
        log.warning("%s: no instructor tests; instructor suite is empty", problem.id)
        return suite
    return materialize_expected_outputs(suite, problem, limits, toolchain, rng)


def build_llm_suite(problem: Problem, artifact: GenerationArtifact, seed: int, limits=None,
                    toolchain=None, interpreter: str = "python3", rng=None,
                    per_test_seeds: bool = False) -> TestSuite:
    """Concrete LLM suite for ``problem`` from its generation artifact."""
    if artifact.kind is ArtifactKind.GENERATOR_SCRIPT:
        gen_timeout = (limits.run_timeout * 12) if limits else 60.0
        tests = tests_from_payloads(run_generator_script(artifact.source_text, interpreter, gen_timeout))
    else:
        tests = parse_test_script(artifact.source_text)
    suite = TestSuite(problem_id=problem.id, kind=SuiteKind.LLM, tests=tests, seed=seed,
                      separator=new_separator(rng), per_test_seeds=per_test_seeds)
    return materialize_expected_outputs(suite, problem, limits, toolchain, rng)
