"""Command-line interface.

Exit codes: 0 success, 1 pipeline error, 2 usage or configuration error.
Errors are summarized as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import difflib
import io
import json
import logging
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from . import __version__, runner
from .bundle import Bundle, atomic_write, digest, is_bundle_dir, load_bundle, save_bundle
from .config import Config
from .errors import GenerationFailed, TestforgeError, UsageError
from .evaluator import (
    AnnotationLedger, Cause, Evaluation, Validity, annotate, emit_report,
)
from .grader import Policy, export_grades_csv, export_grades_json, grade_batch
from .ingest import parse_moodle_xml, parse_submissions_csv
from .llm import FixtureStore, LiveProvider, RecordingProvider, ReplayProvider, TokenLedger
from .model import SuiteKind, display_text
from .prompts import Transcript, generate_suite_source
from .suite import build_llm_suite, new_seed, regenerate_instructor_outputs

log = logging.getLogger("testforge")

ANNOTATIONS_FILE = "annotations.jsonl"
EVALUATION_FILE = "evaluation.json"
RECORDINGS_DIR = "recordings"
TRANSCRIPTS_DIR = "transcripts"


def _out(obj):
    print(json.dumps(obj, indent=2, ensure_ascii=False))


def _templates_digest():
    root = resources.files("testforge")
    names = sorted(p.name for p in root.joinpath("prompt_templates").iterdir())
    texts = [root.joinpath("prompt_templates", n).read_text() for n in names]
    return digest(names, texts, runner.load_template())


def _limits_key(cfg: Config):
    return [asdict(cfg.toolchain), asdict(cfg.limits)]


# -- stages ---------------------------------------------------------------------------

def stage_regen_instructor(path: Path, bundle: Bundle, cfg: Config, force=False) -> str:
    key = digest(bundle.problem.to_dict(), _limits_key(cfg))
    if not force and bundle.stages.get("regen-instructor") == key and SuiteKind.INSTRUCTOR in bundle.suites:
        return "skipped"
    suite = regenerate_instructor_outputs(bundle.problem, cfg.limits, cfg.toolchain)
    bundle.suites[SuiteKind.INSTRUCTOR] = suite
    bundle.stages["regen-instructor"] = key
    save_bundle(path, bundle)
    stale = sum(1 for t in suite.tests if t.original_expected is not None and t.original_expected != t.expected_output)
    if stale:
        log.warning("%s: %d stored instructor output(s) differed from the reference", bundle.problem.id, stale)
    return "done"


def make_provider(args, cfg: Config, path: Path):
    fixtures = Path(args.fixtures) if getattr(args, "fixtures", None) else path / RECORDINGS_DIR
    if getattr(args, "replay", False):
        return ReplayProvider(FixtureStore(fixtures))
    live = LiveProvider(base_url=cfg.base_url)
    if getattr(args, "record", False):
        return RecordingProvider(live, FixtureStore(fixtures))
    return live


def stage_gen_suite(path: Path, bundle: Bundle, cfg: Config, args, force=False) -> str:
    problem = bundle.problem
    if problem.excluded:
        log.info("%s: excluded (%s); no suite generated", problem.id, problem.exclusion_reason)
        return "excluded"
    gen_key = digest(problem.to_dict(), cfg.model_id, cfg.temperature, _templates_digest())
    if force or bundle.artifact is None or bundle.stages.get("gen-suite") != gen_key:
        provider = make_provider(args, cfg, path)
        ledger = TokenLedger()
        transcript = Transcript(problem.id)
        try:
            artifact = generate_suite_source(problem, provider, ledger, cfg.model_id, cfg.temperature, transcript)
        except GenerationFailed as exc:
            dump = path / TRANSCRIPTS_DIR / f"{problem.id}.json"
            atomic_write(dump, json.dumps(transcript.to_dict(), indent=2) + "\n")
            exc.args = (f"{exc.args[0]} (transcript: {dump})",)
            raise
        bundle.artifact = artifact
        bundle.stages["gen-suite"] = gen_key
        bundle.stages.pop("llm-suite", None)
        save_bundle(path, bundle)

    existing = bundle.suites.get(SuiteKind.LLM)
    seed = getattr(args, "seed", None) or cfg.seeds.get(problem.id) or (existing.seed if existing else None)
    seed = seed or new_seed()
    suite_key = digest(bundle.artifact.to_dict(), seed, cfg.per_test_seeds, cfg.interpreter, _limits_key(cfg))
    if not force and existing is not None and bundle.stages.get("llm-suite") == suite_key:
        return "skipped"
    suite = build_llm_suite(problem, bundle.artifact, seed, cfg.limits, cfg.toolchain, cfg.interpreter,
                            per_test_seeds=cfg.per_test_seeds)
    bundle.suites[SuiteKind.LLM] = suite
    bundle.stages["llm-suite"] = suite_key
    save_bundle(path, bundle)
    return "done"


def stage_grade(path: Path, bundle: Bundle, cfg: Config, kinds, force=False) -> dict:
    status = {}
    subs = [s.to_dict() for s in bundle.submissions]
    for kind in kinds:
        suite = bundle.suites.get(kind)
        if suite is None:
            raise UsageError(f"{bundle.problem.id}: no {kind.value} suite; build it before grading")
        key = digest(suite.to_dict(), subs, cfg.policy.value, _limits_key(cfg))
        stage = f"grade-{kind.value}"
        if not force and bundle.stages.get(stage) == key and kind in bundle.grades:
            status[kind.value] = "skipped"
        else:
            bundle.grades[kind] = grade_batch(bundle.submissions, suite, bundle.problem, cfg.limits,
                                              cfg.policy, cfg.workers, cfg.toolchain, cfg.work_root)
            bundle.stages[stage] = key
            save_bundle(path, bundle)
            status[kind.value] = "done"
        atomic_write(path / f"grades-{kind.value}.csv", export_grades_csv(bundle.grades[kind]))
        atomic_write(path / f"grades-{kind.value}.json", export_grades_json(bundle.grades[kind]))
    return status


def evaluation_for(path: Path, bundle: Bundle) -> Evaluation:
    missing = [k.value for k in SuiteKind if k not in bundle.grades]
    if missing:
        raise UsageError(f"{bundle.problem.id}: not graded by {', '.join(missing)} suite; run grade first")
    by_kind = {k: {g.submission_id: g.grade for g in bundle.grades[k]} for k in SuiteKind}
    notes = AnnotationLedger(path / ANNOTATIONS_FILE).entries()
    return Evaluation.from_grades(bundle.problem.id, by_kind[SuiteKind.LLM], by_kind[SuiteKind.INSTRUCTOR], notes)


def stage_evaluate(path: Path, bundle: Bundle) -> Evaluation:
    ev = evaluation_for(path, bundle)
    atomic_write(path / EVALUATION_FILE, emit_report(ev, "json"))
    return ev


def _summary(bundle: Bundle, ev: Evaluation) -> dict:
    return {"problem_id": bundle.problem.id, "quadrants": ev.quadrant_counts(),
            "needs_review": len(ev.needs_review())}


# -- commands -------------------------------------------------------------------------

def _bundles(paths):
    for p in paths:
        path = Path(p)
        if not is_bundle_dir(path):
            raise UsageError(f"{path} is not a bundle directory")
        yield path, load_bundle(path)


def cmd_ingest(args, cfg: Config):
    xml_path = Path(args.xml)
    try:
        data = xml_path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {xml_path}: {exc}") from None
    warnings = []
    problems = parse_moodle_xml(data, warnings)
    csv_for = {}
    for spec in args.submissions or []:
        pid, sep, file = spec.partition("=")
        if not sep:
            raise UsageError(f"--submissions expects PROBLEM_ID=FILE, got {spec!r}")
        csv_for[pid] = Path(file)
    if args.csv:
        if len(problems) != 1:
            raise UsageError("--csv needs exactly one problem in the XML; use --submissions ID=FILE")
        csv_for[problems[0].id] = Path(args.csv)
    unknown = set(csv_for) - {p.id for p in problems}
    if unknown:
        raise UsageError(f"submissions given for unknown problem(s): {sorted(unknown)}")

    out_root = Path(args.out)
    report = []
    for problem in problems:
        row_errors = []
        subs = []
        if problem.id in csv_for:
            try:
                raw = csv_for[problem.id].read_bytes()
            except OSError as exc:
                raise UsageError(f"cannot read {csv_for[problem.id]}: {exc}") from None
            subs = parse_submissions_csv(raw, problem.id, cfg.csv_columns, row_errors)
        target = out_root / problem.id if len(problems) > 1 or args.per_problem_dirs else out_root
        bundle = Bundle(problem=problem, submissions=subs)
        if is_bundle_dir(target):
            old = load_bundle(target)
            if old.problem.to_dict() == problem.to_dict() and [s.to_dict() for s in old.submissions] == \
                    [s.to_dict() for s in subs]:
                bundle = old
        save_bundle(target, bundle)
        report.append({"problem_id": problem.id, "bundle": str(target), "kind": problem.kind.value,
                       "excluded": problem.excluded, "exclusion_reason": problem.exclusion_reason,
                       "submissions": len(subs), "row_errors": [str(e) for e in row_errors]})
    _out({"problems": report, "warnings": [str(w) for w in warnings]})
    return 0


def cmd_regen_instructor(args, cfg):
    for path, bundle in _bundles(args.bundles):
        _out({"problem_id": bundle.problem.id,
              "status": stage_regen_instructor(path, bundle, cfg, args.force)})
    return 0


def cmd_gen_suite(args, cfg):
    if args.replay and args.record:
        raise UsageError("--replay and --record are mutually exclusive")
    for path, bundle in _bundles(args.bundles):
        status = stage_gen_suite(path, bundle, cfg, args, args.force)
        suite = bundle.suites.get(SuiteKind.LLM)
        _out({"problem_id": bundle.problem.id, "status": status,
              "tests": len(suite.tests) if suite else 0,
              "rejected": len(suite.rejected) if suite else 0,
              "seed": suite.seed if suite else None})
    return 0


def _kinds(choice):
    return list(SuiteKind) if choice == "both" else [SuiteKind(choice)]


def cmd_grade(args, cfg):
    for path, bundle in _bundles(args.bundles):
        status = stage_grade(path, bundle, cfg, _kinds(args.suite), args.force)
        counts = {k.value: {g: sum(1 for r in bundle.grades[k] if r.grade == g) for g in (1, 0, -1)}
                  for k in _kinds(args.suite)}
        _out({"problem_id": bundle.problem.id, "status": status, "grades": counts})
    return 0


def cmd_evaluate(args, cfg):
    for path, bundle in _bundles(args.bundles):
        _out(_summary(bundle, stage_evaluate(path, bundle)))
    return 0


def _diff_lines(bundle: Bundle, submission_id: str, limit=3):
    lines = []
    for kind in SuiteKind:
        suite = bundle.suites.get(kind)
        rec = next((g for g in bundle.grades.get(kind, []) if g.submission_id == submission_id), None)
        if suite is None or rec is None or rec.grade != 0:
            continue
        failed = rec.failed_tests
        lines.append(f"  {kind.value} suite: {len(failed)} of {len(suite.tests)} test(s) failed")
        for i in failed[:limit]:
            test = suite.tests[i]
            actual = rec.outputs[i] if i < len(rec.outputs) else None
            lines.append(f"  test {i + 1} input: {display_text(test.payload)[:200]!r}")
            if actual is None:
                lines.append("    (no output: the program crashed, timed out or stopped early)")
                continue
            diff = difflib.unified_diff(display_text(test.expected_output).splitlines(),
                                        display_text(actual).splitlines(),
                                        "expected", "actual", lineterm="", n=1)
            lines += ["    " + d for d in list(diff)[:40]]
    return lines


def _pending(path, bundle):
    return {r.submission_id: r for r in evaluation_for(path, bundle).needs_review()}


def cmd_review(args, cfg):
    path = Path(args.bundle)
    _, bundle = next(_bundles([path]))
    ledger = AnnotationLedger(path / ANNOTATIONS_FILE)
    if args.submission:
        if not (args.cause and args.validity):
            raise UsageError("--submission needs --cause and --validity")
        ev = evaluation_for(path, bundle)
        rec = next((r for r in ev.records if r.submission_id == args.submission), None)
        if rec is None:
            raise UsageError(f"no submission {args.submission!r} in {bundle.problem.id}")
        annotate(rec, Cause(args.cause), Validity(args.validity), args.note or "", args.annotator or "", ledger)
        _out(_summary(bundle, stage_evaluate(path, bundle)))
        return 0

    pending = _pending(path, bundle)
    interactive = not args.list and sys.stdin.isatty()
    if not interactive:
        _out([{"submission_id": r.submission_id, "quadrant": r.quadrant.value,
               "llm_grade": r.llm_grade, "instructor_grade": r.instructor_grade,
               "diff": _diff_lines(bundle, r.submission_id)} for r in pending.values()])
        return 0

    causes = {"l": Cause.LLM_MISMATCH, "i": Cause.INSTRUCTOR_MISMATCH, "o": Cause.OTHER_MISMATCH}
    validities = {"v": Validity.VALID, "i": Validity.INVALID}
    for rec in pending.values():
        print(f"\n{bundle.problem.id}/{rec.submission_id}: LLM grade {rec.llm_grade}, "
              f"instructor grade {rec.instructor_grade}")
        print("\n".join(_diff_lines(bundle, rec.submission_id)))
        cause = input("cause [l]lm / [i]nstructor / [o]ther, [s]kip, [q]uit: ").strip().lower()[:1]
        if cause == "q":
            break
        if cause not in causes:
            continue
        validity = input("solution is [v]alid / [i]nvalid: ").strip().lower()[:1]
        if validity not in validities:
            continue
        note = input("note: ").strip()
        annotate(rec, causes[cause], validities[validity], note, args.annotator or "", ledger)
    _out(_summary(bundle, stage_evaluate(path, bundle)))
    return 0


def cmd_report(args, cfg):
    ev = Evaluation()
    for path, bundle in _bundles(args.bundles):
        ev = ev.merged(evaluation_for(path, bundle))
    text = emit_report(ev, args.format)
    if args.out:
        atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_pipeline(args, cfg):
    path = Path(args.problem)
    if not is_bundle_dir(path):
        xml = path / "problem.xml"
        if not xml.is_file():
            raise UsageError(f"{path} has neither bundle.json nor problem.xml")
        csv_file = path / "submissions.csv"
        ns = argparse.Namespace(xml=str(xml), submissions=None, out=str(path), per_problem_dirs=False,
                                csv=str(csv_file) if csv_file.is_file() else None)
        with contextlib.redirect_stdout(io.StringIO()):
            cmd_ingest(ns, cfg)
    _, bundle = next(_bundles([path]))
    result = {"problem_id": bundle.problem.id}
    if bundle.problem.excluded:
        result["status"] = "excluded"
        result["reason"] = bundle.problem.exclusion_reason
        _out(result)
        return 0
    result["regen-instructor"] = stage_regen_instructor(path, bundle, cfg, args.force)
    result["gen-suite"] = stage_gen_suite(path, bundle, cfg, args, args.force)
    result["grade"] = stage_grade(path, bundle, cfg, list(SuiteKind), args.force)
    result.update(_summary(bundle, stage_evaluate(path, bundle)))
    _out(result)
    return 0


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="testforge", description="Generate C autograder test suites with an LLM and compare them with instructor suites.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--workers", type=int, help="parallel grading workers")
    p.add_argument("--policy", choices=[x.value for x in Policy], help="output comparison policy")
    p.add_argument("--model", dest="model_id", help="LLM model identifier")
    p.add_argument("--temperature", type=float)
    p.add_argument("--cc", help="C compiler")
    p.add_argument("--work-root", help="directory for scratch build directories")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse a Moodle XML export and submission CSVs into bundles")
    s.add_argument("--xml", required=True)
    s.add_argument("--csv", help="submission CSV for a single-problem export")
    s.add_argument("--submissions", action="append", metavar="PROBLEM_ID=FILE")
    s.add_argument("--out", required=True, help="bundle directory (one subdirectory per problem if several)")
    s.add_argument("--per-problem-dirs", action="store_true")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("regen-instructor", help="recompute instructor expected outputs from the reference")
    s.add_argument("bundles", nargs="+")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_regen_instructor)

    def llm_flags(s):
        mode = s.add_mutually_exclusive_group()
        mode.add_argument("--replay", action="store_true", help="answer LLM calls from recorded fixtures only")
        mode.add_argument("--record", action="store_true", help="call the live provider and record fixtures")
        s.add_argument("--fixtures", help="fixture directory (default: <bundle>/recordings)")
        s.add_argument("--seed", type=int, help="srand seed for the LLM suite")
        s.add_argument("--force", action="store_true", help="rerun stages even if inputs are unchanged")

    s = sub.add_parser("gen-suite", help="generate and materialize the LLM test suite")
    s.add_argument("bundles", nargs="+")
    llm_flags(s)
    s.set_defaults(func=cmd_gen_suite)

    s = sub.add_parser("grade", help="grade every submission against a suite")
    s.add_argument("bundles", nargs="+")
    s.add_argument("--suite", choices=["instructor", "llm", "both"], default="both")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_grade)

    s = sub.add_parser("evaluate", help="assign grade quadrants and validity")
    s.add_argument("bundles", nargs="+")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("review", help="list or annotate mismatches that need review")
    s.add_argument("bundle")
    s.add_argument("--list", action="store_true", help="print pending mismatches as JSON and exit")
    s.add_argument("--submission")
    s.add_argument("--cause", choices=[c.value for c in Cause])
    s.add_argument("--validity", choices=[Validity.VALID.value, Validity.INVALID.value])
    s.add_argument("--note")
    s.add_argument("--annotator")
    s.set_defaults(func=cmd_review)

    s = sub.add_parser("report", help="emit the evaluation report for one or more bundles")
    s.add_argument("bundles", nargs="+")
    s.add_argument("--format", choices=["json", "csv", "markdown"], default="markdown")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("pipeline", help="run every stage on one problem directory")
    s.add_argument("--problem", required=True)
    llm_flags(s)
    s.set_defaults(func=cmd_pipeline)
    return p


def load_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    overrides = {k: getattr(args, k) for k in ("workers", "model_id", "temperature", "work_root")
                 if getattr(args, k) is not None}
    for k, v in overrides.items():
        setattr(cfg, k, v)
    if args.policy:
        cfg.policy = Policy(args.policy)
    if args.cc:
        cfg.toolchain = runner.Toolchain(cc=args.cc, cflags=cfg.toolchain.cflags, ldflags=cfg.toolchain.ldflags)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        exc.stage = exc.stage or args.command
        print(json.dumps(exc.summary()), file=sys.stderr)
        return 2
    except TestforgeError as exc:
        exc.stage = exc.stage or args.command
        print(json.dumps(exc.summary()), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
