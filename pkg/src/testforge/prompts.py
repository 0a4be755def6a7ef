"""Two-prompt generation pipeline: detailed statement, then test generation."""
from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Optional

from . import runner
from .errors import GenerationFailed, MalformedArtifact, MissingSection, NotJson, ParseError
from .llm import DEFAULT_MODEL, DEFAULT_TEMPERATURE, JSON_OBJECT, TEXT, ChatRequest, TokenLedger, complete_chat
from .model import ArtifactKind, DetailedStatement, GenerationArtifact, Problem, ProblemKind, TokenUsage
from .suite import scan_test_script

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)

PROMPT1_LABEL = "detailed_statement"
PROMPT2_LABEL = "test_generation"


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return resources.files("testforge").joinpath(f"prompt_templates/{name}.txt").read_text()


def _render(name: str, **values) -> str:
    return Template(load_prompt(name)).substitute(**values)


def build_detailed_statement_prompt(problem: Problem, model_id: str = DEFAULT_MODEL,
                                    temperature: float = DEFAULT_TEMPERATURE) -> ChatRequest:
    if problem.excluded:
        raise ValueError(f"problem {problem.id} is excluded: {problem.exclusion_reason}")
    extra = ""
    if problem.extra_code and problem.extra_code.strip():
        extra = _render("extra_code_section", extra_code=problem.extra_code.strip("\n"))
    user = _render("detailed_user", statement=problem.statement_text,
                   reference_solution=problem.reference_solution.strip("\n"), extra_code_section=extra)
    return ChatRequest(
        messages=(("system", load_prompt("detailed_system")), ("user", user)),
        model_id=model_id, temperature=temperature, response_format=JSON_OBJECT,
    )


def strip_fences(text: str) -> str:
    """Return the body of the first fenced block, or the text itself if unfenced."""
    m = _FENCE_RE.search(text)
    return m.group(2) if m else text.strip()


def parse_detailed_statement(response_text: str) -> DetailedStatement:
    try:
        data = json.loads(strip_fences(response_text))
    except json.JSONDecodeError as exc:
        raise NotJson(f"detailed statement is not JSON: {exc}") from None
    if not isinstance(data, dict):
        raise NotJson("detailed statement JSON is not an object")
    by_key = {str(k).strip().lower(): v for k, v in data.items()}
    values = {}
    for section in DetailedStatement.SECTIONS:
        if section.lower() not in by_key:
            raise MissingSection(section)
        value = by_key[section.lower()]
        if isinstance(value, list):
            value = "\n".join(v if isinstance(v, str) else json.dumps(v) for v in value)
        elif not isinstance(value, str):
            value = json.dumps(value, ensure_ascii=False)
        if not value.strip() and section != "Example":
            raise MissingSection(section)
        values[section.lower()] = value
    return DetailedStatement(**values)


def render_detailed(detailed: DetailedStatement) -> str:
    return "\n\n".join(f"{s}:\n{getattr(detailed, s.lower()).strip()}" for s in DetailedStatement.SECTIONS)


def harness_contract(problem: Problem) -> str:
    """The code template the model adds function tests to."""
    headers = "\n".join(f"#include <{h}>" for h in runner.EXTENDED_HEADERS)
    return Template(runner.load_template()).substitute(
        headers=headers,
        extra_code=(problem.extra_code or "").strip("\n"),
        solution_slot=f'#include "{runner.SOLUTION_FILE}"',
        tests_block="    // Add the tests here\n",
    )


def build_testgen_prompt(problem: Problem, detailed: DetailedStatement, contract: Optional[str] = None,
                         model_id: str = DEFAULT_MODEL, temperature: float = DEFAULT_TEMPERATURE) -> ChatRequest:
    reference = problem.reference_solution.strip("\n")
    if problem.kind is ProblemKind.FULL_PROGRAM:
        system = load_prompt("full_program_system")
        user = _render("full_program_user", detailed=render_detailed(detailed), reference_solution=reference)
    else:
        system = load_prompt("function_system")
        user = _render("function_user", detailed=render_detailed(detailed), reference_solution=reference,
                       template=(contract if contract is not None else harness_contract(problem)).rstrip("\n"))
    return ChatRequest(messages=(("system", system), ("user", user)), model_id=model_id,
                       temperature=temperature, response_format=TEXT)


def extract_artifact(problem: Problem, response_text: str) -> tuple[ArtifactKind, str]:
    """Pull the generator or test script out of a Prompt-2 response.

    Raises MalformedArtifact when the response holds no usable code.
    """
    blocks = _FENCE_RE.findall(response_text)
    if problem.kind is ProblemKind.FULL_PROGRAM:
        candidates = [b for lang, b in blocks if lang.lower() in ("python", "python3", "py")]
        candidates += [b for lang, b in blocks if not lang]
        source = candidates[0] if candidates else response_text
        try:
            ast.parse(source)
        except SyntaxError as exc:
            raise MalformedArtifact(f"response is not a Python script ({exc.msg}, line {exc.lineno})") from None
        if "print" not in source:
            raise MalformedArtifact("generator script never prints the tests")
        return ArtifactKind.GENERATOR_SCRIPT, source
    candidates = [b for lang, b in blocks if lang.lower() in ("c", "")]
    source = candidates[0] if candidates else response_text
    try:
        scan_test_script(source)
    except ParseError as exc:
        raise MalformedArtifact(f"test script has no usable test markers: {exc}") from None
    return ArtifactKind.TEST_SCRIPT, source


@dataclass
class Transcript:
    problem_id: str
    exchanges: list[dict] = field(default_factory=list)

    def add(self, label, request: ChatRequest, response_text=None, error=None):
        self.exchanges.append({"label": label, "request": request.to_dict(),
                               "response": response_text, "error": error})

    def to_dict(self):
        return {"problem_id": self.problem_id, "exchanges": self.exchanges}


def _ask(label, request, provider, ledger, transcript, parse, retries=1):
    """Send ``request`` and parse the reply, retrying once with a corrective note."""
    usage = TokenUsage()
    for attempt in range(retries + 1):
        response = complete_chat(request, provider, ledger, label=label)
        usage = usage + response.usage
        try:
            parsed = parse(response.text)
        except (NotJson, MissingSection, MalformedArtifact) as exc:
            transcript.add(label, request, response.text, f"{type(exc).__name__}: {exc}")
            log.warning("%s: unusable %s response (%s)", transcript.problem_id, label, exc)
            if attempt == retries:
                raise GenerationFailed(
                    f"{transcript.problem_id}: {label} response unusable after {retries + 1} attempt(s): {exc}",
                    transcript.exchanges) from None
            request = request.with_message("user", _render("corrective", reason=str(exc)))
            continue
        transcript.add(label, request, response.text)
        return parsed, usage


def generate_suite_source(problem: Problem, provider, ledger: Optional[TokenLedger] = None,
                          model_id: str = DEFAULT_MODEL, temperature: float = DEFAULT_TEMPERATURE,
                          transcript: Optional[Transcript] = None) -> GenerationArtifact:
    """Run Prompt 1 then Prompt 2 for ``problem`` and return the generated script."""
    transcript = transcript if transcript is not None else Transcript(problem.id)
    req1 = build_detailed_statement_prompt(problem, model_id, temperature)
    detailed, usage1 = _ask(PROMPT1_LABEL, req1, provider, ledger, transcript, parse_detailed_statement)
    req2 = build_testgen_prompt(problem, detailed, model_id=model_id, temperature=temperature)
    (kind, source), usage2 = _ask(PROMPT2_LABEL, req2, provider, ledger, transcript,
                                  lambda text: extract_artifact(problem, text))
    return GenerationArtifact(kind=kind, source_text=source, token_usage=usage1 + usage2, detailed=detailed)


__all__ = [
    "build_detailed_statement_prompt", "parse_detailed_statement", "build_testgen_prompt",
    "generate_suite_source", "harness_contract", "extract_artifact", "Transcript",
]
