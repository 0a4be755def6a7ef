"""Operator configuration: one JSON document, overridden by CLI flags."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .errors import UsageError
from .grader import Policy
from .ingest import CsvColumns
from .llm import DEFAULT_MODEL, DEFAULT_TEMPERATURE
from .runner import Limits, Toolchain


@dataclass
class Config:
    work_root: Optional[str] = None
    toolchain: Toolchain = field(default_factory=Toolchain)
    interpreter: str = "python3"
    model_id: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    base_url: str = "https://api.openai.com/v1"
    limits: Limits = field(default_factory=Limits)
    policy: Policy = Policy.TRIM_TRAILING
    workers: int = 4
    seeds: dict[str, int] = field(default_factory=dict)
    per_test_seeds: bool = False
    csv_columns: CsvColumns = field(default_factory=CsvColumns)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        if not 0 <= self.temperature <= 2:
            raise UsageError("temperature must be within [0, 2]")
        try:
            Limits(**asdict(self.limits))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        self.policy = Policy(self.policy)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        if "api_key" in d:
            raise UsageError("API keys are read from the environment only")
        kwargs = dict(d)
        try:
            if "toolchain" in kwargs:
                kwargs["toolchain"] = Toolchain(**kwargs["toolchain"])
            if "limits" in kwargs:
                kwargs["limits"] = Limits(**kwargs["limits"])
            if "csv_columns" in kwargs:
                kwargs["csv_columns"] = CsvColumns(**kwargs["csv_columns"])
            if "policy" in kwargs:
                kwargs["policy"] = Policy(kwargs["policy"])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid config: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {path} must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        d = asdict(self)
        d["policy"] = self.policy.value
        return d
