import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import pytest
import reference_data as ref
from hypothesis import given
from hypothesis import strategies as st

from testforge.errors import InvalidGrade, NotReviewable, UndefinedMetric, UnresolvedMismatches
from testforge.evaluator import (PER_PROBLEM_HEADER, Annotation, AnnotationLedger, Cause, ConfusionMatrix,
                                 Evaluation, Quadrant, Subject, Validity, annotate, apply_annotations,
                                 confusion_matrix, decide_validity, emit_report, make_record, metrics,
                                 mismatch_table, per_problem_report, quadrant, round_percent, truncate_percent)

GOLDEN = Path(__file__).parent / "golden"
STAMP = "2024-01-01T00:00:00+00:00"


def small_evaluation():
    """Two problems, every quadrant, one annotation of each cause."""
    grades = {"A": [(1, 1)] * 5 + [(0, 0)] * 2 + [(1, 0), (0, 1), (-1, -1)],
              "B": [(1, 1)] * 3 + [(0, 1), (0, 1)]}
    notes = [
        Annotation("A", "00008", Cause.INSTRUCTOR_MISMATCH, Validity.VALID, "instructor tests miss this path", STAMP, "ta"),
        Annotation("A", "00009", Cause.OTHER_MISMATCH, Validity.VALID, "undefined behaviour", STAMP, "ta"),
        Annotation("B", "00004", Cause.LLM_MISMATCH, Validity.VALID, "", STAMP, "ta"),
        Annotation("B", "00005", Cause.INSTRUCTOR_MISMATCH, Validity.INVALID, "", STAMP, "ta"),
    ]
    ev = Evaluation()
    for pid, gs in grades.items():
        llm = {f"{i + 1:05d}": g for i, (g, _) in enumerate(gs)}
        ins = {f"{i + 1:05d}": g for i, (_, g) in enumerate(gs)}
        ev = ev.merged(Evaluation.from_grades(pid, llm, ins, notes))
    return ev


@pytest.fixture(scope="module")
def replication():
    return ref.replication_records()


class TestQuadrants:
    @pytest.mark.parametrize("llm,ins,q,v", [
        (1, 1, Quadrant.BOTH_VALID, Validity.VALID),
        (0, 0, Quadrant.BOTH_INVALID, Validity.INVALID),
        (1, 0, Quadrant.LLM_VALID_INSTR_INVALID, Validity.NEEDS_REVIEW),
        (0, 1, Quadrant.LLM_INVALID_INSTR_VALID, Validity.NEEDS_REVIEW),
        (-1, 1, Quadrant.EXCLUDED_NO_COMPILE, None),
        (1, -1, Quadrant.EXCLUDED_NO_COMPILE, None),
        (-1, -1, Quadrant.EXCLUDED_NO_COMPILE, None),
        (0, -1, Quadrant.EXCLUDED_NO_COMPILE, None),
        (-1, 0, Quadrant.EXCLUDED_NO_COMPILE, None),
    ])
    def test_all_pairs(self, llm, ins, q, v):
        assert quadrant(llm, ins) is q
        record = make_record("p", "s", llm, ins)
        assert record.quadrant is q and record.validity is v
        if v is not None:
            assert decide_validity(llm, ins) is v

    @pytest.mark.parametrize("pair", [(2, 1), (1, True), (None, 0)])
    def test_invalid_grade(self, pair):
        with pytest.raises(InvalidGrade):
            quadrant(*pair)

    def test_validity_of_non_compiling(self):
        with pytest.raises(InvalidGrade):
            decide_validity(-1, 1)


class TestAnnotations:
    def test_annotate_mismatch(self, tmp_path):
        ledger = AnnotationLedger(tmp_path / "annotations.jsonl")
        rec = annotate(make_record("p", "s", 0, 1), Cause.INSTRUCTOR_MISMATCH, Validity.INVALID,
                       "edge case the instructor never tried", "ta", ledger, STAMP)
        assert rec.validity is Validity.INVALID and rec.annotation.cause is Cause.INSTRUCTOR_MISMATCH
        (entry,) = ledger.entries()
        assert entry == rec.annotation and entry.timestamp == STAMP
        # an instructor-cause invalid solution counts as an instructor false positive
        assert confusion_matrix([rec], Subject.INSTRUCTOR) == ConfusionMatrix(0, 1, 0, 0)

    @pytest.mark.parametrize("pair", [(1, 1), (0, 0), (-1, 1)])
    def test_not_reviewable(self, pair):
        with pytest.raises(NotReviewable):
            annotate(make_record("p", "s", *pair), Cause.LLM_MISMATCH, Validity.VALID)

    def test_cannot_resolve_to_needs_review(self):
        with pytest.raises(ValueError):
            annotate(make_record("p", "s", 1, 0), Cause.LLM_MISMATCH, Validity.NEEDS_REVIEW)

    def test_other_is_excluded(self):
        rec = annotate(make_record("p", "s", 1, 0), Cause.OTHER_MISMATCH, Validity.VALID)
        assert not rec.included
        for subject in Subject:
            assert confusion_matrix([rec], subject).n == 0

    def test_ledger_latest_wins_and_is_append_only(self, tmp_path):
        path = tmp_path / "a.jsonl"
        ledger = AnnotationLedger(path)
        rec = make_record("p", "s", 1, 0)
        annotate(rec, Cause.LLM_MISMATCH, Validity.INVALID, ledger=ledger, timestamp="t1")
        first = path.read_text()
        annotate(rec, Cause.INSTRUCTOR_MISMATCH, Validity.VALID, ledger=ledger, timestamp="t2")
        assert path.read_text().startswith(first)
        assert len(ledger.entries()) == 2
        (applied,) = apply_annotations([rec], ledger.entries())
        assert applied.annotation.cause is Cause.INSTRUCTOR_MISMATCH and applied.validity is Validity.VALID
        assert apply_annotations(apply_annotations([rec], ledger.entries()), ledger.entries()) == [applied]

    def test_annotations_do_not_touch_agreeing_records(self):
        rec = make_record("p", "s", 1, 1)
        ann = Annotation("p", "s", Cause.LLM_MISMATCH, Validity.INVALID)
        assert apply_annotations([rec], [ann]) == [rec]


class TestMatrices:
    def test_llm_matrix(self, replication):
        cm = confusion_matrix(replication, Subject.LLM)
        assert cm == ConfusionMatrix(**ref.LLM_MATRIX)
        assert cm.n == 25736

    def test_instructor_matrix(self, replication):
        assert confusion_matrix(replication, Subject.INSTRUCTOR) == ConfusionMatrix(**ref.INSTRUCTOR_MATRIX)

    def test_corpus_accounting(self, replication):
        ev = Evaluation(replication)
        counts = ev.quadrant_counts()
        assert len(replication) == 33749
        assert counts["excluded_no_compile"] == 6962
        assert ev.other_mismatches() == 1051

    def test_one_unresolved(self, replication):
        records = replication + [make_record("P99", "00001", 1, 0)]
        with pytest.raises(UnresolvedMismatches) as info:
            confusion_matrix(records, Subject.LLM)
        assert info.value.count == 1
        assert confusion_matrix(records, Subject.LLM, allow_partial=True) == ConfusionMatrix(**ref.LLM_MATRIX)

    @given(st.lists(st.tuples(st.sampled_from([1, 0, -1]), st.sampled_from([1, 0, -1]),
                              st.sampled_from(list(Cause)), st.sampled_from([Validity.VALID, Validity.INVALID])),
                    max_size=60))
    def test_brute_force_tally(self, rows):
        records = []
        for i, (llm, ins, cause, validity) in enumerate(rows):
            rec = make_record("p", str(i), llm, ins)
            if rec.quadrant in (Quadrant.LLM_VALID_INSTR_INVALID, Quadrant.LLM_INVALID_INSTR_VALID):
                rec = annotate(rec, cause, validity, timestamp="t")
            records.append(rec)
        for subject in Subject:
            tally = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
            for rec in records:
                if -1 in (rec.llm_grade, rec.instructor_grade):
                    continue
                if rec.annotation is not None and rec.annotation.cause is Cause.OTHER_MISMATCH:
                    continue
                grade = rec.llm_grade if subject is Subject.LLM else rec.instructor_grade
                if rec.llm_grade == rec.instructor_grade:
                    actual = rec.llm_grade == 1
                else:
                    actual = rec.annotation.resolved_validity is Validity.VALID
                key = ("t" if grade == actual else "f") + ("p" if grade == 1 else "n")
                tally[key] += 1
            cm = confusion_matrix(records, subject)
            assert cm == ConfusionMatrix(**tally)
            assert cm.n == sum(r.included for r in records)

    @given(st.lists(st.tuples(st.sampled_from([1, 0, -1]), st.sampled_from([1, 0, -1])), max_size=80))
    def test_quadrants_partition(self, pairs):
        ev = Evaluation([make_record("p", str(i), a, b) for i, (a, b) in enumerate(pairs)])
        assert sum(ev.quadrant_counts().values()) == len(pairs)


class TestMetrics:
    def test_llm_metrics(self, replication):
        m = metrics(confusion_matrix(replication, Subject.LLM))
        assert m.precision == Fraction(15907, 15930)
        assert m.recall == Fraction(15907, 17141)
        assert m.false_positive_rate == Fraction(23, 8595)
        assert m.accuracy == Fraction(24479, 25736)
        assert abs(float(m.precision) - 0.99856) < 1e-5
        assert abs(float(m.recall) - 0.92801) < 1e-5
        assert abs(float(m.false_positive_rate) - 0.00268) < 1e-5
        assert abs(float(m.accuracy) - 0.95116) < 1e-5
        assert {k: m.display(k) for k in ref.LLM_DISPLAY} == ref.LLM_DISPLAY

    def test_instructor_metrics(self, replication):
        m = metrics(confusion_matrix(replication, Subject.INSTRUCTOR))
        assert m.recall == 1
        assert m.precision == Fraction(17141, 18401)
        assert m.false_positive_rate == Fraction(1260, 8595)
        assert m.accuracy == Fraction(24476, 25736)
        # the quoted decimals are cut to five places
        assert abs(float(m.precision) - 0.93152) < 1e-5
        assert abs(float(m.false_positive_rate) - 0.14660) < 1e-5
        assert abs(float(m.accuracy) - 0.95104) < 1e-5
        assert {k: m.display(k) for k in ref.INSTRUCTOR_DISPLAY} == ref.INSTRUCTOR_DISPLAY

    def test_undefined(self):
        with pytest.raises(UndefinedMetric) as info:
            metrics(ConfusionMatrix(3, 0, 1, 0))
        assert info.value.metric == "false_positive_rate"
        assert metrics(ConfusionMatrix(3, 0, 1, 0), strict=False).false_positive_rate is None

    @given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
    def test_formulas(self, tp, fp, fn, tn):
        m = metrics(ConfusionMatrix(tp, fp, fn, tn), strict=False)
        n = tp + fp + fn + tn
        assert m.accuracy == (Fraction(tp + tn, n) if n else None)
        assert m.precision == (Fraction(tp, tp + fp) if tp + fp else None)
        assert m.recall == (Fraction(tp, tp + fn) if tp + fn else None)
        assert m.false_positive_rate == (Fraction(fp, fp + tn) if fp + tn else None)
        for name in ("accuracy", "precision", "recall", "false_positive_rate"):
            value = getattr(m, name)
            if value is not None:
                assert 0 <= value <= 1

    def test_truncation_and_rounding(self):
        assert truncate_percent(Fraction(23, 8595)) == "0.2"
        assert truncate_percent(Fraction(1)) == "100.0"
        assert round_percent(Fraction(1, 8)) == "12.50"
        assert round_percent(Fraction(861, 976)) == "88.22"
        assert round_percent(Fraction(1, 800)) == "0.13"


class TestPerProblem:
    def test_published_table(self, replication):
        rows = per_problem_report(replication)
        got = [(int(r.problem_id[1:]), r.n, *r.percentages()) for r in rows]
        assert got == ref.PER_PROBLEM

    def test_single_rows(self, replication):
        rows = {r.problem_id: r for r in per_problem_report(replication)}
        assert (rows["P11"].n, rows["P11"].percentages()) == (991, ("100.00", "0.00", "0.00"))
        assert (rows["P16"].n, rows["P16"].llm_mismatches) == (976, 861)
        assert rows["P16"].percentages()[1] == "88.22"

    def test_empty_group_warns(self):
        warnings = []
        rows = per_problem_report([make_record("A", "1", 1, 1), make_record("B", "1", -1, 0)], ["A", "B", "C"], warnings)
        assert [r.problem_id for r in rows] == ["A"]
        assert len(warnings) == 2 and warnings[0].startswith("B:")

    def test_mismatch_table_counts_other(self, replication):
        table = mismatch_table(replication)
        assert table["P19"]["n"] == 186 + 757
        assert table["P19"]["other_mismatch:llm_invalid_instr_valid"] == 757
        assert sum(row["n"] for row in table.values()) == 26787


class TestReports:
    def test_markdown_golden(self):
        text = emit_report(small_evaluation(), "markdown")
        assert text == (GOLDEN / "small_report.md").read_text()
        assert "| Accuracy | (TP + TN) / n | 92.3% | 84.6% |" in text

    def test_csv_golden(self):
        text = emit_report(small_evaluation(), "csv")
        assert text == (GOLDEN / "small_per_problem.csv").read_text()
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == PER_PROBLEM_HEADER and len(rows) == 3

    def test_json_round_trip(self):
        ev = small_evaluation()
        doc = json.loads(emit_report(ev, "json"))
        assert Evaluation.from_dict(doc) == ev
        assert doc["confusion_matrices"]["llm"] == {"tp": 9, "fp": 0, "fn": 1, "tn": 3, "n": 13}
        assert doc["metrics"]["instructor"]["false_positive_rate"]["fraction"] == "1/3"

    def test_pending_review_report(self):
        ev = Evaluation([make_record("A", "1", 1, 0)])
        doc = json.loads(emit_report(ev, "json"))
        assert doc["needs_review"] == 1 and "metrics" not in doc
        assert "still need review" in emit_report(ev, "markdown")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(small_evaluation(), "pdf")

    def test_replication_markdown(self, replication):
        text = emit_report(Evaluation(replication), "markdown")
        assert "## Confusion matrix: LLM Test Suite (n = 25,736)" in text
        assert "| Valid | 15,907 | 23 |" in text
        assert "| Precision | TP / (TP + FP) | 99.8% | 93.1% |" in text
