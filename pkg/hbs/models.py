from enum import Enum
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dt: float = Field(gt=0)
    t_end: float = Field(gt=0)
    event_tol: float = Field(default=1e-10, gt=0)
    max_impacts: int = Field(default=10000, gt=0)
    min_impact_separation: float = Field(default=1e-9, gt=0)
    sample_stride: int = Field(default=1, gt=0)


class Mode(str, Enum):
    RUN = "run"
    CLASSIFY = "classify"
    VERIFY = "verify"


class SystemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    params: Dict[str, float] = Field(default_factory=dict)


class SymmetrySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # coordinate names or indices; "none" for no symmetry, None for the system default
    coordinates: Union[Literal["none"], List[Union[str, int]], None] = None


class GuardSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["coordinate", "pendulum-cart-horizontal", "builtin"]
    label: Optional[str] = None
    crossing: Literal["decreasing", "increasing", "both"] = "both"
    # coordinate guards: h = q[index] - value
    index: Optional[Union[int, str]] = None
    value: float = 0.0
    # pendulum-cart-horizontal: h = (m l/(M+m)) sin(theta) + x - level
    level: float = 0.0
    # builtin guards by name, e.g. "interior", "exterior", "horizontal"
    builtin: Optional[str] = None
    exterior: Optional[bool] = None

    @model_validator(mode="after")
    def check_kind_fields(self):
        if self.kind == "coordinate" and self.index is None:
            raise ValueError("coordinate guards need an index")
        if self.kind == "builtin" and not self.builtin:
            raise ValueError("builtin guards need a builtin name")
        return self


class InitialState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    q: List[float]
    v: Optional[List[float]] = None
    p: Optional[List[float]] = None

    @model_validator(mode="after")
    def exactly_one_of_v_p(self):
        if (self.v is None) == (self.p is None):
            raise ValueError("give exactly one of v or p")
        other = self.v if self.v is not None else self.p
        if len(other) != len(self.q):
            raise ValueError(f"q has {len(self.q)} entries but v/p has {len(other)}")
        return self


class ClassifySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    samples: int = Field(default=16, ge=1)
    class_tol: float = Field(default=1e-8, gt=0)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trajectory: str = "trajectory.csv"
    report: str = "report.json"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "run"
    mode: Mode = Mode.RUN
    system: SystemSpec
    symmetry: SymmetrySpec = Field(default_factory=SymmetrySpec)
    guards: List[GuardSpec] = Field(default_factory=list)
    initial: InitialState
    integrator: IntegratorConfig
    classify: ClassifySpec = Field(default_factory=ClassifySpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("name")
    @classmethod
    def name_is_filename_safe(cls, v: str) -> str:
        if not v or any(c in v for c in "/\\"):
            raise ValueError("name must be a non-empty file-name-safe string")
        return v


class EventRecord(BaseModel):
    index: int
    t_star: float
    guard: str
    alpha: float
    delta_h: float
    delta_mu: List[float]
    mu_pre: List[float]
    mu_post: List[float]
    connection_pre: List[float]
    connection_post: List[float]
    verdict: str
    shape_velocity_delta: Optional[float] = None


class GuardClassRecord(BaseModel):
    guard: str
    kind: str
    impact: str
    consistent: bool
    samples: int
    max_vertical_residual: float
    max_horizontal_residual: float


class CheckRecord(BaseModel):
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


class RunReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    name: str
    mode: str
    system: str
    params: Dict[str, float]
    termination: Optional[str] = None
    error: Optional[str] = None
    events: List[EventRecord] = Field(default_factory=list)
    classifications: List[GuardClassRecord] = Field(default_factory=list)
    checks: List[CheckRecord] = Field(default_factory=list)
    passed: Optional[bool] = None
    files: List[str] = Field(default_factory=list)
