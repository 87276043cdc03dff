"""Machine readable reports for verify, survey and selftest.

Everything a report holds is deterministic for fixed inputs and settings,
except the ``timings`` block, which is excluded from the JSON payload unless
asked for.
"""

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from . import __version__

SCHEMA_VERSION = 1

VERIFIED = "verified"
HYPOTHESIS_FAILURE = "hypothesis_failure"
COMPUTATION_FAILURE = "computation_failure"
VIOLATED = "violated"

Status = Literal["verified", "hypothesis_failure", "computation_failure", "violated"]

EXIT_CODES: dict[str, int] = {
    VERIFIED: 0,
    HYPOTHESIS_FAILURE: 2,
    COMPUTATION_FAILURE: 3,
    VIOLATED: 4,
}


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class HypothesisResult(BaseModel):
    name: str
    passed: bool
    detail: str


class VerificationReport(BaseModel):
    """Outcome of one (curve, m, phi) verification."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    version: str = __version__
    config_fingerprint: str

    curve: str
    a_invariants: list[int]
    conductor: int
    m: int
    r: int | None = None
    phi: str = "0,1,0"

    hypotheses: list[HypothesisResult] = Field(default_factory=list)
    relaxed_primes: list[int] = Field(default_factory=list)

    precision: int
    u: str | None = None
    c_valuation: int | None = None
    t: int | None = None
    measure_rho: str | None = None
    measure_sigma: str | None = None
    r_rho: str | None = None
    r_sigma: str | None = None
    integral: bool | None = None
    difference_valuation: int | None = None

    residuals: dict[str, float | None] = Field(default_factory=dict)

    status: Status
    failed_stage: str | None = None
    error: str | None = None

    timings: dict[str, float] = Field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    @property
    def failed_conditions(self) -> list[str]:
        return [h.name for h in self.hypotheses if not h.passed]

    def payload(self, include_timings: bool = False) -> dict:
        exclude = None if include_timings else {"timings"}
        return self.model_dump(mode="json", by_alias=True, exclude=exclude)

    def to_json(self, include_timings: bool = False) -> str:
        """Sorted-key JSON; byte-identical across runs unless timings are included."""
        return _dumps(self.payload(include_timings))

    def summary_line(self) -> str:
        head = f"{self.curve} m={self.m} phi={self.phi}: {self.status}"
        if self.status in (VERIFIED, VIOLATED):
            return f"{head} (v3(R(rho) - R(sigma)) = {self.difference_valuation})"
        if self.status == HYPOTHESIS_FAILURE:
            return f"{head} ({', '.join(self.failed_conditions) or self.error})"
        return f"{head} at {self.failed_stage}: {self.error}"


class SkippedPair(BaseModel):
    curve: str
    m: int
    reasons: list[str]


class SurveySummary(BaseModel):
    pairs: int
    admissible: int
    verified: int
    violated: int
    computation_failures: int
    message: str


class SurveyReport(BaseModel):
    """One row per admissible (curve, m) pair plus the skipped pairs."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    rows: list[VerificationReport] = Field(default_factory=list)
    skipped: list[SkippedPair] = Field(default_factory=list)
    summary: SurveySummary

    @property
    def exit_code(self) -> int:
        """Worst row status: a violation outranks a computation failure."""
        codes = [row.exit_code for row in self.rows]
        if EXIT_CODES[VIOLATED] in codes:
            return EXIT_CODES[VIOLATED]
        return max(codes, default=0)

    def to_json(self, include_timings: bool = False) -> str:
        payload = self.model_dump(mode="json", by_alias=True, exclude={"rows"})
        payload["rows"] = [row.payload(include_timings) for row in self.rows]
        return _dumps(payload)


class SuiteResult(BaseModel):
    name: str
    status: Literal["passed", "failed", "skipped"]
    detail: str = ""


class SelftestReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    precision: int
    suites: list[SuiteResult]

    @property
    def passed(self) -> bool:
        return all(suite.status != "failed" for suite in self.suites)

    def to_json(self) -> str:
        return _dumps(self.model_dump(mode="json", by_alias=True))


class LValueReport(BaseModel):
    """One approximate functional equation evaluation; numbers as decimal strings."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    name: str
    s: str
    value: str
    sign: str
    fe_residual: str
    terms: int
    digits: int

    def to_json(self) -> str:
        return _dumps(self.model_dump(mode="json", by_alias=True))


class PeriodsReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    curve: str
    conductor: int
    omega_plus: str
    omega_minus: str
    digits: int

    def to_json(self) -> str:
        return _dumps(self.model_dump(mode="json", by_alias=True))
