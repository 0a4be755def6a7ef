import csv
import io
import json
import random
from functools import reduce

import pytest
from conftest import FIXTURES, requires_cc
from hypothesis import given
from hypothesis import strategies as st

from testforge.errors import CompileError, LengthMismatch
from testforge.grader import (FAIL, NO_COMPILE, PASS, Policy, compare_output, export_grades_csv, export_grades_json,
                              grade_batch, grade_solution)
from testforge.ingest import parse_moodle_xml, parse_submissions_csv
from testforge.llm import ReplayProvider
from testforge.model import Submission, SuiteKind, Test, TestOrigin, TestSuite
from testforge.prompts import generate_suite_source
from testforge.suite import build_llm_suite, regenerate_instructor_outputs


def _suite(expected):
    return TestSuite("t", SuiteKind.LLM, [Test(i, "x;\n", TestOrigin.EDGE_CASE, e) for i, e in enumerate(expected)])


# actual, expected, trim_trailing, exact (checked by hand)
POLICY_TABLE = [
    ("a\n", "a\n", True, True),
    ("a", "a\n", True, False),
    ("a\n\n\n", "a", True, False),
    ("a  \nb\t\n", "a\nb\n", True, False),
    ("a\r\n", "a\n", True, False),
    ("  a\n", "a\n", False, False),
    ("a\n\nb\n", "a\nb\n", False, False),
    ("A\n", "a\n", False, False),
    ("", "\n", True, False),
]


class TestCompare:
    @pytest.mark.parametrize("actual,expected,trim,exact", POLICY_TABLE)
    def test_policy_table(self, actual, expected, trim, exact):
        assert compare_output(actual, expected, Policy.TRIM_TRAILING) is trim
        assert compare_output(actual, expected, Policy.EXACT) is exact
        assert compare_output(actual, expected) is trim

    @given(st.text(), st.sampled_from(list(Policy)))
    def test_reflexive(self, x, policy):
        assert compare_output(x, x, policy)

    def test_no_output_never_matches(self):
        assert not compare_output(None, "")
        assert not compare_output("", None)


class TestGradeSolution:
    def test_all_pass(self):
        assert grade_solution(["1", "2"], _suite(["1", "2"])).grade == PASS

    def test_one_fail(self):
        record = grade_solution(["1", "3", None], _suite(["1", "2", "4"]))
        assert record.grade == FAIL
        assert record.per_test == [True, False, False]
        assert record.failed_tests == [1, 2]

    def test_compile_error(self):
        record = grade_solution(CompileError("main.c:3:5: error: expected ';'"), _suite(["1"]), submission_id="7")
        assert record.grade == NO_COMPILE and record.per_test == []
        assert record.diagnostics == "main.c:3:5: error: expected ';'"

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            grade_solution(["1"], _suite(["1", "2"]))

    def test_empty_suite_passes(self):
        assert grade_solution([], _suite([])).grade == PASS

    @given(st.lists(st.booleans(), max_size=12))
    def test_and_oracle(self, outcomes):
        expected = [f"e{i}" for i in range(len(outcomes))]
        outputs = [e if ok else e + "!" for e, ok in zip(expected, outcomes)]
        oracle = PASS if reduce(lambda a, b: a and b, outcomes, True) else FAIL
        assert grade_solution(outputs, _suite(expected)).grade == oracle

    @given(st.lists(st.booleans(), max_size=10), st.booleans())
    def test_appending_a_test_is_monotone(self, outcomes, extra):
        expected = [f"e{i}" for i in range(len(outcomes) + 1)]
        outputs = [e if ok else "x" for e, ok in zip(expected, outcomes + [extra])]
        before = grade_solution(outputs[:-1], _suite(expected[:-1])).grade
        after = grade_solution(outputs, _suite(expected)).grade
        assert not (before == FAIL and after == PASS)
        assert grade_solution(CompileError(""), _suite(expected)).grade == NO_COMPILE


class TestExports:
    def _records(self):
        suite = _suite(["a", "b", "c"])
        return [grade_solution(["a", "b", "c"], suite, submission_id="00001"),
                grade_solution(["a", "x", None], suite, submission_id="00002"),
                grade_solution(CompileError("boom"), suite, submission_id="00003")]

    def test_csv(self):
        text = export_grades_csv(self._records())
        assert text == ("submission_id,suite_kind,grade,failed_tests\n"
                        "00001,llm,1,\n00002,llm,0,2 3\n00003,llm,-1,\n")
        assert len(list(csv.reader(io.StringIO(text)))) == 4

    def test_json(self):
        data = json.loads(export_grades_json(self._records()))
        assert [d["grade"] for d in data] == [1, 0, -1]
        assert data[1]["outputs"] == ["a", "x", None]
        assert data[2]["diagnostics"] == "boom"


@pytest.fixture(scope="module")
def p07():
    (problem,) = parse_moodle_xml((FIXTURES / "p07" / "problem.xml").read_bytes())
    subs = parse_submissions_csv((FIXTURES / "p07" / "submissions.csv").read_bytes(), problem.id)
    artifact = generate_suite_source(problem, ReplayProvider(FIXTURES / "p07" / "recordings"))
    rng = random.Random(7)
    suites = {
        SuiteKind.INSTRUCTOR: regenerate_instructor_outputs(problem, rng=rng),
        SuiteKind.LLM: build_llm_suite(problem, artifact, seed=761177235, rng=rng),
    }
    labels = json.loads((FIXTURES / "p07" / "labels.json").read_text())
    return problem, subs, suites, labels


@requires_cc
class TestBatch:
    @pytest.mark.parametrize("kind", list(SuiteKind))
    def test_fixture_corpus(self, p07, kind):
        problem, subs, suites, labels = p07
        records = grade_batch(subs, suites[kind], problem, workers=2)
        assert [r.submission_id for r in records] == [s.id for s in subs]
        assert [r.grade for r in records] == [labels[s.id][kind.value] for s in subs]
        assert sorted(r.grade for r in records) == [-1, 0, 0] + [1] * 7
        assert "error" in records[4].diagnostics

    def test_workers_do_not_change_results(self, p07):
        problem, subs, suites, _ = p07
        one = grade_batch(subs, suites[SuiteKind.LLM], problem, workers=1)
        eight = grade_batch(subs, suites[SuiteKind.LLM], problem, workers=8)
        assert one == eight
        assert export_grades_json(one) == export_grades_json(eight)

    def test_empty(self, p07):
        problem, _, suites, _ = p07
        assert grade_batch([], suites[SuiteKind.LLM], problem) == []

    def test_bad_worker_count(self, p07):
        problem, subs, suites, _ = p07
        with pytest.raises(ValueError):
            grade_batch(subs, suites[SuiteKind.LLM], problem, workers=0)

    def test_reference_passes_both_suites(self, p07):
        problem, subs, suites, _ = p07
        ref = Submission("ref", "instructor", subs[0].submitted_at, problem.reference_solution, 1)
        for suite in suites.values():
            assert grade_batch([ref], suite, problem)[0].grade == PASS
