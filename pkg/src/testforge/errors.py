"""Exception hierarchy shared by every stage of the toolchain."""


class TestforgeError(Exception):
    """Base class; ``stage`` is filled in by the CLI for error summaries."""

    stage = None

    def summary(self):
        return {"error": type(self).__name__, "stage": self.stage, "message": str(self)}


# ingest
class MalformedXml(TestforgeError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class UnsupportedQuestionType(TestforgeError):
    pass


class SchemaMismatch(TestforgeError):
    pass


class RowError(TestforgeError):
    def __init__(self, row, message):
        self.row = row
        self.message = message
        super().__init__(f"row {row}: {message}")


class VersionMismatch(TestforgeError):
    pass


class BundleError(TestforgeError):
    pass


# llm gateway
class AuthMissing(TestforgeError):
    pass


class RateLimited(TestforgeError):
    pass


class TransientProviderError(TestforgeError):
    pass


class ProviderError(TestforgeError):
    """Non-retryable provider failure (bad request, malformed reply)."""


class FixtureMiss(TestforgeError):
    def __init__(self, digest):
        self.digest = digest
        super().__init__(f"no recording for request digest {digest}")


# prompt pipeline
class NotJson(TestforgeError):
    pass


class MissingSection(TestforgeError):
    def __init__(self, section):
        self.section = section
        super().__init__(f"missing section {section!r}")


class MalformedArtifact(TestforgeError):
    pass


class GenerationFailed(TestforgeError):
    def __init__(self, message, transcript=None):
        self.transcript = transcript or []
        super().__init__(message)


# suite builder
class InterpreterMissing(TestforgeError):
    pass


class GeneratorFailure(TestforgeError):
    def __init__(self, message, stderr=""):
        self.stderr = stderr
        super().__init__(f"{message}\n{stderr}" if stderr else message)


class SchemaError(TestforgeError):
    pass


class ParseError(TestforgeError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ReferenceCompileError(TestforgeError):
    pass


# runner
class CompileError(TestforgeError):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__(diagnostics)


class ToolchainMissing(TestforgeError):
    pass


class HarnessError(TestforgeError):
    pass


class TemplateSlotMissing(TestforgeError):
    pass


# grader
class LengthMismatch(TestforgeError):
    pass


# evaluator
class InvalidGrade(TestforgeError):
    pass


class NotReviewable(TestforgeError):
    pass


class UnresolvedMismatches(TestforgeError):
    def __init__(self, count):
        self.count = count
        super().__init__(f"{count} mismatch record(s) still need review")


class UndefinedMetric(TestforgeError):
    def __init__(self, metric):
        self.metric = metric
        super().__init__(f"{metric} is undefined (zero denominator)")


# cli
class UsageError(TestforgeError):
    pass
