import re
import threading

import pytest
from conftest import requires_cc
from hypothesis import given, settings
from hypothesis import strategies as st
from reference_data import SEPARATOR, TABLE2_OUTPUTS, TABLE2_RAW

from testforge import runner
from testforge.errors import CompileError, TemplateSlotMissing
from testforge.model import (Problem, ProblemKind, SuiteKind, Test, TestOrigin, TestSuite, decode_output,
                             encode_output)

HELLO = '#include <stdio.h>\nint main(void) { printf("hello, world\\n"); return 0; }\n'
TIMES_TWO = ('#include <stdio.h>\nint main(void) { int v; scanf("%d", &v); '
             'printf("%d x 2 = %d\\n", v, v * 2); return 0; }\n')

separators = st.integers(0, 99_999_999).map(lambda n: f"#<ab@{n:08d}#@>#")


def _suite(kind, payloads, seed=None, separator=SEPARATOR):
    tests = [Test(index=i, payload=p, origin=TestOrigin.INSTRUCTOR) for i, p in enumerate(payloads)]
    return TestSuite(problem_id="t", kind=kind, tests=tests, seed=seed, separator=separator)


def _function_problem(reference, extra=None):
    return Problem(id="t", kind=ProblemKind.FUNCTION, statement_text="", reference_solution=reference,
                   extra_code=extra, instructor_tests=[])


class TestSplit:
    def test_published_stream_gives_six_outputs(self):
        parts = runner.split_output(TABLE2_RAW, SEPARATOR)
        assert len(parts) == 6
        assert parts[0] == "The words differ by just one character"
        assert parts[-1] == "The words differ by just one character"
        assert parts == TABLE2_OUTPUTS

    def test_no_separator_is_one_segment(self):
        assert runner.split_output("a\nb\n", SEPARATOR) == ["a\nb\n"]

    def test_only_one_newline_is_absorbed(self):
        raw = f"x\n\n\n{SEPARATOR}\n\ny"
        assert runner.split_output(raw, SEPARATOR) == ["x\n\n", "\ny"]

    @settings(max_examples=300)
    @given(st.lists(st.text(alphabet=st.characters(blacklist_categories=("Cs",))), min_size=1, max_size=12),
           separators)
    def test_round_trip(self, outputs, sep):
        outputs = [o.replace(sep, "") for o in outputs]
        assert runner.split_output(runner.join_outputs(outputs, sep), sep) == outputs


class TestHarness:
    def test_six_scopes_and_five_separator_prints(self):
        suite = _suite(SuiteKind.INSTRUCTOR, [f'printf("{i}");\n' for i in range(6)])
        src = runner.assemble_function_harness("int f(void) { return 1; }\n", suite)
        body = src[src.index("int main(void)"):]
        assert body.count(f'"{SEPARATOR}"') == 5
        assert len(re.findall(r"^    \{$", body, re.M)) == 6
        assert "int f(void) { return 1; }" in src
        assert '#include "solution.c"' not in src

    def test_seed_before_every_scope(self):
        suite = _suite(SuiteKind.LLM, ['printf("%d\\n", rand());\n'] * 7, seed=761177235)
        src = runner.assemble_function_harness("", suite)
        lines = src.splitlines()
        scopes = [i for i, line in enumerate(lines) if line == "    {"]
        assert len(scopes) == 7
        assert all(lines[i - 1] == "    srand(761177235u);" for i in scopes)
        assert '#include "solution.c"' in src
        assert "#include <time.h>" in src and "#include <limits.h>" in src

    def test_per_test_seeds(self):
        suite = _suite(SuiteKind.LLM, ["x;\n"] * 3, seed=5)
        suite.per_test_seeds = True
        seeds = re.findall(r"srand\((\d+)u\)", runner.assemble_function_harness("", suite))
        assert len(seeds) == 3 and len(set(seeds)) == 3
        assert seeds == re.findall(r"srand\((\d+)u\)", runner.assemble_function_harness("", suite))

    def test_extra_code_is_placed_before_solution(self):
        suite = _suite(SuiteKind.INSTRUCTOR, ["x;\n"])
        src = runner.assemble_function_harness("SOLUTION", suite, "#define WORD_LENGTH 5")
        assert src.index("#define WORD_LENGTH 5") < src.index("SOLUTION") < src.index("int main")

    def test_template_without_slot_is_rejected(self):
        suite = _suite(SuiteKind.INSTRUCTOR, ["x;\n"])
        with pytest.raises(TemplateSlotMissing):
            runner.assemble_function_harness("", suite, template="$headers $extra_code $solution_slot")

    @requires_cc
    def test_zero_tests_compiles_and_prints_nothing(self, tmp_path):
        suite = _suite(SuiteKind.INSTRUCTOR, [])
        src = runner.assemble_function_harness("", suite)
        binary = runner.compile(src, tmp_path)
        result = runner.run_full_program(binary, "")
        assert result.ok and result.stdout == b""


@requires_cc
class TestCompileAndRun:
    def test_hello(self, tmp_path):
        result = runner.run_full_program(runner.compile(HELLO, tmp_path), "")
        assert result.ok and result.stdout == b"hello, world\n"

    def test_times_two(self, tmp_path):
        result = runner.run_full_program(runner.compile(TIMES_TWO, tmp_path), "7\n")
        assert result.stdout.decode() == "7 x 2 = 14\n"

    def test_missing_semicolon(self, tmp_path):
        with pytest.raises(CompileError) as info:
            runner.compile("int main(void) { return 0 }\n", tmp_path)
        assert "main.c:1:" in info.value.diagnostics
        assert "error" in info.value.diagnostics

    def test_math_library_links(self, tmp_path):
        src = ('#include <stdio.h>\n#include <math.h>\nint main(void) { double r; scanf("%lf", &r); '
               'printf("%.2f\\n", M_PI * pow(r, 2.0) - sqrt(r) + sqrt(r)); return 0; }\n')
        tc = runner.Toolchain(cflags=["-std=gnu11", "-Wall"])
        result = runner.run_full_program(runner.compile(src, tmp_path, tc), "2\n")
        assert result.stdout == b"12.57\n"

    def test_timeout(self, tmp_path):
        binary = runner.compile("int main(void) { for (;;) {} }\n", tmp_path)
        result = runner.run_full_program(binary, "", runner.Limits(run_timeout=0.5))
        assert result.kind is runner.ExitKind.TIMED_OUT
        assert not result.ok
        assert result.wall_time < 3

    def test_output_cap(self, tmp_path):
        binary = runner.compile('#include <stdio.h>\nint main(void) { for (;;) puts("spam"); }\n', tmp_path)
        result = runner.run_full_program(binary, "", runner.Limits(output_cap=4096))
        assert result.output_limited and not result.ok
        assert 0 < len(result.stdout) <= 4096
        assert result.stdout.startswith(b"spam\n")

    def test_nonzero_exit_and_signal(self, tmp_path):
        r1 = runner.run_full_program(runner.compile("int main(void) { return 3; }\n", tmp_path / "a"), "")
        r2 = runner.run_full_program(runner.compile(
            "#include <stdlib.h>\nint main(void) { abort(); }\n", tmp_path / "b"), "")
        assert (r1.kind, r1.code) == (runner.ExitKind.EXITED, 3)
        assert r2.kind is runner.ExitKind.SIGNALED and "SIGABRT" in r2.describe()

    def test_invalid_utf8_kept_exactly(self, tmp_path):
        src = '#include <stdio.h>\nint main(void) { fputs("\\xff\\xfe ok", stdout); return 0; }\n'
        result = runner.run_full_program(runner.compile(src, tmp_path), "")
        text = decode_output(result.stdout)
        assert encode_output(text) == b"\xff\xfe ok"


REVERSE = """void Reverse(int *v, int n)
{
    for (int i = 0; i < n / 2; i++) {
        int t = v[i];
        v[i] = v[n - 1 - i];
        v[n - 1 - i] = t;
    }
}
"""


@requires_cc
class TestRunSuite:
    def _tests(self):
        return [
            "int v[3] = {1, 2, 3};\nReverse(v, 3);\nprintf(\"%d %d %d\\n\", v[0], v[1], v[2]);\n",
            "int v[1] = {9};\nReverse(v, 1);\nprintf(\"%d\\n\", v[0]);\n",
            "int v[2] = {4, 5};\nReverse(v, 2);\nprintf(\"%d %d\\n\", v[0], v[1]);\n",
        ]

    def test_reference_outputs(self):
        suite = _suite(SuiteKind.INSTRUCTOR, self._tests())
        outputs = runner.run_suite(REVERSE, suite, _function_problem(REVERSE))
        assert outputs == ["3 2 1\n", "9\n", "5 4\n"]

    def test_crash_mid_harness(self):
        crashing = REVERSE.replace("{\n    for", "{\n    if (n == 1) { int *p = 0; *p = 1; }\n    for")
        suite = _suite(SuiteKind.INSTRUCTOR, self._tests())
        outputs = runner.run_suite(crashing, suite, _function_problem(REVERSE))
        assert outputs == ["3 2 1\n", None, None]

    def test_solution_printing_the_separator_voids_everything(self):
        sneaky = REVERSE.replace("{\n    for", '{\n    printf("\\n' + SEPARATOR + '\\n");\n    for')
        suite = _suite(SuiteKind.INSTRUCTOR, self._tests())
        assert runner.run_suite(sneaky, suite, _function_problem(REVERSE)) == [None] * 3

    def test_llm_suite_is_deterministic(self):
        tests = ["for (int i = 0; i < 100; i++) {\n    printf(\"%d \", rand() % 1000);\n}\n"] * 2
        suite = _suite(SuiteKind.LLM, tests, seed=761177235)
        problem = _function_problem(REVERSE)
        first = runner.run_suite(REVERSE, suite, problem)
        assert first == runner.run_suite(REVERSE, suite, problem)
        # same seed before each scope: identical random sequences
        assert first[0] == first[1]

    def test_full_program_suite(self):
        problem = Problem(id="t", kind=ProblemKind.FULL_PROGRAM, statement_text="",
                          reference_solution=TIMES_TWO, instructor_tests=[])
        suite = _suite(SuiteKind.INSTRUCTOR, ["7\n", "-1\n", ""])
        assert runner.run_suite(TIMES_TWO, suite, problem)[:2] == ["7 x 2 = 14\n", "-1 x 2 = -2\n"]

    def test_concurrent_runs_do_not_interfere(self):
        suite = _suite(SuiteKind.INSTRUCTOR, self._tests())
        problem = _function_problem(REVERSE)
        results = [None] * 4

        def work(i):
            results[i] = runner.run_suite(REVERSE, suite, problem)

        threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(r == ["3 2 1\n", "9\n", "5 4\n"] for r in results)


def test_limits_validation():
    with pytest.raises(ValueError):
        runner.Limits(run_timeout=0)
