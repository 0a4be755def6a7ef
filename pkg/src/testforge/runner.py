"""Compile C sources, assemble function harnesses and run programs under limits."""
from __future__ import annotations

import enum
import os
import resource
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Optional

from .errors import CompileError, HarnessError, TemplateSlotMissing, ToolchainMissing
from .model import Problem, ProblemKind, SuiteKind, TestSuite, decode_output

BASE_HEADERS = ("stdio.h", "stdlib.h", "string.h", "math.h")
EXTENDED_HEADERS = BASE_HEADERS + ("time.h", "limits.h", "ctype.h", "stdbool.h", "stdint.h", "float.h")
TEMPLATE_SLOTS = ("headers", "extra_code", "solution_slot", "tests_block")
SOLUTION_FILE = "solution.c"

# Placeholder for a test whose output was lost to a crash, timeout or cap.
NO_OUTPUT = None


@dataclass
class Limits:
    compile_timeout: float = 10.0
    run_timeout: float = 5.0
    memory_mb: int = 256
    output_cap: int = 8 * 1024 * 1024

    def __post_init__(self):
        if self.compile_timeout <= 0 or self.run_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.memory_mb <= 0 or self.output_cap <= 0:
            raise ValueError("memory and output limits must be positive")


@dataclass
class Toolchain:
    cc: str = "gcc"
    cflags: list[str] = field(default_factory=lambda: ["-std=c11", "-Wall"])
    ldflags: list[str] = field(default_factory=lambda: ["-lm"])


class ExitKind(str, enum.Enum):
    EXITED = "exited"
    SIGNALED = "signaled"
    TIMED_OUT = "timed_out"


@dataclass
class RunResult:
    stdout: bytes
    kind: ExitKind
    code: Optional[int]  # exit code or signal number
    wall_time: float
    stderr: bytes = b""
    output_limited: bool = False

    @property
    def ok(self):
        return self.kind is ExitKind.EXITED and self.code == 0

    def describe(self):
        if self.kind is ExitKind.TIMED_OUT:
            return f"timed out after {self.wall_time:.1f}s"
        if self.kind is ExitKind.SIGNALED:
            try:
                name = signal.Signals(self.code).name
            except ValueError:
                name = str(self.code)
            extra = " (output limit exceeded)" if self.output_limited else ""
            return f"killed by {name}{extra}"
        return f"exited with status {self.code}"


def _limit_child(memory_mb, output_cap, cpu_seconds):
    def apply():
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
        if memory_mb:
            mem = memory_mb * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (mem, mem))
        if output_cap:
            resource.setrlimit(resource.RLIMIT_FSIZE, (output_cap, output_cap))
        if cpu_seconds:
            resource.setrlimit(resource.RLIMIT_CPU, (cpu_seconds, cpu_seconds + 1))
        signal.signal(signal.SIGXFSZ, signal.SIG_DFL)

    return apply


def execute(argv, cwd, stdin: bytes = b"", timeout: float = 5.0, memory_mb: Optional[int] = 256,
            output_cap: Optional[int] = 8 * 1024 * 1024, env=None) -> RunResult:
    """Run ``argv`` in ``cwd`` with stdin fed once and stdout captured to a capped file.

    The child gets its own session so a timeout kills everything it spawned.
    """
    cwd = Path(cwd)
    with tempfile.TemporaryDirectory(dir=cwd, prefix=".io-") as io_dir:
        in_path = Path(io_dir, "stdin")
        out_path = Path(io_dir, "stdout")
        err_path = Path(io_dir, "stderr")
        in_path.write_bytes(stdin)
        start = time.monotonic()
        with open(in_path, "rb") as fin, open(out_path, "wb") as fout, open(err_path, "wb") as ferr:
            proc = subprocess.Popen(
                argv, cwd=cwd, stdin=fin, stdout=fout, stderr=ferr, env=env,
                start_new_session=True,
                preexec_fn=_limit_child(memory_mb, output_cap, int(timeout) + 1),
            )
            timed_out = False
            try:
                proc.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                timed_out = True
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                proc.wait()
        elapsed = time.monotonic() - start
        stdout = out_path.read_bytes()
        stderr = err_path.read_bytes()[:65536]

    if timed_out:
        return RunResult(stdout, ExitKind.TIMED_OUT, None, elapsed, stderr)
    if proc.returncode < 0:
        sig = -proc.returncode
        limited = sig == signal.SIGXFSZ
        if sig == signal.SIGXCPU:
            return RunResult(stdout, ExitKind.TIMED_OUT, None, elapsed, stderr)
        return RunResult(stdout, ExitKind.SIGNALED, sig, elapsed, stderr, output_limited=limited)
    return RunResult(stdout, ExitKind.EXITED, proc.returncode, elapsed, stderr)


def compile(c_source: str, workdir, toolchain: Optional[Toolchain] = None,
            limits: Optional[Limits] = None, filename: str = "main.c") -> Path:
    """Compile ``c_source`` inside ``workdir`` and return the binary path.

    The compiler runs with relative paths and ``LC_ALL=C`` so diagnostics do
    not depend on the scratch directory or the locale.
    """
    toolchain = toolchain or Toolchain()
    limits = limits or Limits()
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    if shutil.which(toolchain.cc) is None:
        raise ToolchainMissing(f"C compiler {toolchain.cc!r} not found on PATH")
    Path(workdir, filename).write_text(c_source, encoding="utf-8", errors="surrogateescape")
    binary = workdir / "prog"
    argv = [toolchain.cc, *toolchain.cflags, filename, "-o", binary.name, *toolchain.ldflags]
    env = dict(os.environ, LC_ALL="C", LANG="C")
    try:
        proc = subprocess.run(argv, cwd=workdir, capture_output=True, timeout=limits.compile_timeout, env=env)
    except subprocess.TimeoutExpired:
        raise CompileError(f"compilation timed out after {limits.compile_timeout:g}s") from None
    if proc.returncode != 0 or not binary.exists():
        diagnostics = decode_output(proc.stderr + proc.stdout)
        raise CompileError(diagnostics or f"compiler exited with status {proc.returncode}")
    return binary


def run_full_program(binary, stdin_text: str, limits: Optional[Limits] = None) -> RunResult:
    limits = limits or Limits()
    binary = Path(binary)
    return execute(
        [str(binary.resolve())], binary.parent,
        stdin=stdin_text.encode("utf-8", errors="surrogateescape"),
        timeout=limits.run_timeout, memory_mb=limits.memory_mb, output_cap=limits.output_cap,
    )


def split_output(raw: str, separator: str) -> list[str]:
    """Split a combined harness stream into per-test outputs.

    The separator is printed on its own line, so at most one newline
    immediately before and after each separator belongs to the separator
    line rather than to either neighbouring output.
    """
    parts = raw.split(separator)
    out = []
    last = len(parts) - 1
    for i, part in enumerate(parts):
        if i > 0 and part.startswith("\n"):
            part = part[1:]
        if i < last and part.endswith("\n"):
            part = part[:-1]
        out.append(part)
    return out


def join_outputs(outputs: list[str], separator: str) -> str:
    """Inverse of :func:`split_output` for outputs not containing the separator."""
    return f"\n{separator}\n".join(outputs)


def _c_string(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def load_template() -> str:
    return resources.files("testforge").joinpath("harness/function_template.c").read_text()


def assemble_function_harness(solution_source: str, suite: TestSuite, extra_code: Optional[str] = None,
                              template: Optional[str] = None) -> str:
    """Build the combined test program for a function-implementation suite.

    Each test body goes into its own scope; a separator line is printed
    between scopes. LLM suites reseed ``rand`` before every scope and pull
    the solution in from ``solution.c``; instructor suites embed it inline.
    """
    template = template if template is not None else load_template()
    for slot in TEMPLATE_SLOTS:
        if f"${slot}" not in template and f"${{{slot}}}" not in template:
            raise TemplateSlotMissing(f"template has no ${slot} slot")

    llm = suite.kind is SuiteKind.LLM
    headers = "\n".join(f"#include <{h}>" for h in (EXTENDED_HEADERS if llm else BASE_HEADERS))
    solution_slot = f'#include "{SOLUTION_FILE}"' if llm else solution_source

    sep_print = f"    printf(\"\\n%s\\n\", {_c_string(suite.separator)});\n    fflush(stdout);\n"
    blocks = []
    for pos, test in enumerate(suite.tests):
        block = ""
        if pos:
            block += sep_print
        seed = suite.test_seed(pos) if llm else None
        if seed is not None:
            block += f"    srand({seed}u);\n"
        body = test.payload if test.payload.endswith("\n") else test.payload + "\n"
        block += "    {\n" + body + "    }\n"
        blocks.append(block)

    try:
        return Template(template).substitute(
            headers=headers,
            extra_code=extra_code or "",
            solution_slot=solution_slot,
            tests_block="".join(blocks),
        )
    except (KeyError, ValueError) as exc:
        raise TemplateSlotMissing(f"template substitution failed: {exc}") from None


def outputs_from_harness_run(result: RunResult, separator: str, n_tests: int) -> list[Optional[str]]:
    """Map one combined run to per-test outputs.

    If the run did not finish cleanly, every test from the first incomplete
    scope onwards gets ``NO_OUTPUT``.
    """
    if n_tests == 0:
        return []
    parts = split_output(decode_output(result.stdout), separator)
    if len(parts) > n_tests:
        # the program printed the separator itself; nothing can be trusted
        return [NO_OUTPUT] * n_tests
    if result.ok:
        return parts + [NO_OUTPUT] * (n_tests - len(parts))
    completed = len(parts) - 1
    return parts[:completed] + [NO_OUTPUT] * (n_tests - completed)


def run_suite(solution_source: str, suite: TestSuite, problem: Problem, limits: Optional[Limits] = None,
              toolchain: Optional[Toolchain] = None, workdir=None, with_results: bool = False):
    """Run a solution on every test of ``suite``.

    Returns one output per test (``NO_OUTPUT`` where the run crashed). With
    ``with_results`` also returns the raw :class:`RunResult` objects, which
    suite materialization uses to decide rejections. Raises CompileError.
    """
    limits = limits or Limits()
    own_dir = workdir is None
    tmp = tempfile.mkdtemp(prefix="tf-run-") if own_dir else None
    workdir = Path(tmp) if own_dir else Path(workdir)
    try:
        if problem.kind is ProblemKind.FULL_PROGRAM:
            binary = compile(solution_source, workdir, toolchain, limits)
            results = [run_full_program(binary, t.payload, limits) for t in suite.tests]
            outputs = [decode_output(r.stdout) if r.ok else NO_OUTPUT for r in results]
        else:
            if suite.tests and not suite.separator:
                raise HarnessError("suite has no separator")
            source = assemble_function_harness(solution_source, suite, problem.extra_code)
            if suite.kind is SuiteKind.LLM:
                Path(workdir).mkdir(parents=True, exist_ok=True)
                Path(workdir, SOLUTION_FILE).write_text(solution_source, encoding="utf-8",
                                                        errors="surrogateescape")
            binary = compile(source, workdir, toolchain, limits)
            result = run_full_program(binary, "", limits)
            results = [result]
            outputs = outputs_from_harness_run(result, suite.separator, len(suite.tests))
    finally:
        if own_dir:
            shutil.rmtree(tmp, ignore_errors=True)
    if len(outputs) != len(suite.tests):
        raise HarnessError("output count does not match test count")
    return (outputs, results) if with_results else outputs
