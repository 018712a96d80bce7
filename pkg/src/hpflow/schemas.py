"""Request/response models and the on-disk run configuration format.

A run configuration is a YAML key-value tree with four sections::

    system:                  # exactly one of preset / inline expressions
      preset: rigid_body.case1       # or case2 / case3
      inertia: [4, 1.5, 1]           # preset parameter, i1 > i2 > i3 > 0
      m0: 0.489                      # case3 target magnitude
      dissipation: true              # false integrates the free flow
      # -- or inline --
      # variables: [x1, x2, x3]
      # poisson:                     # n x n matrix of expressions
      #   - ["0", "-x3", "x2"]
      #   - ["x3", "0", "-x1"]
      #   - ["-x2", "x1", "0"]
      # hamiltonian: "0.5*(x1^2/4 + x2^2/1.5 + x3^2)"
      # casimir: "0.5*(x1^2 + x2^2 + x3^2)"
    initial_state: [-0.1, 0.2, 0.175]
    integrator:
      t_end: 2000
      rel_tol: 1.0e-10
      abs_tol: 1.0e-10
      sample_interval: 1.0           # optional, default t_end / 2000
    analysis:                        # all entries optional
      certificate:
        psi: "(C - 0.0299)^2 + C - 1*H"   # expression in H and C
        equilibrium: [0, 0, 0.2445]
      predicted_limit_branch: 1      # +1 / -1, preset cases 1 and 2 only
      convergence:
        eps: 1.0e-4
        window_fraction: 0.1
    output:
      directory: out
      trajectory: trajectory.csv
      report: report.json
      plot_data: true

The same models are the request bodies of the HTTP service, so validation
behaves identically for files and API calls.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .expressions import ExpressionError, parse

__all__ = [
    "ConfigError",
    "SystemConfig",
    "IntegratorConfig",
    "CertificateConfig",
    "ConvergenceConfig",
    "AnalysisConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "TrajectoryData",
    "IntegrationData",
    "InvariantData",
    "EquilibriumData",
    "CertificateData",
    "LimitData",
    "SimulationResult",
    "VerifyRequest",
    "StructureData",
    "IdentitySamplingData",
    "VerifyResult",
    "PresetInfo",
    "PresetsResponse",
    "HealthInfo",
]

PRESET_NAMES = ("rigid_body.case1", "rigid_body.case2", "rigid_body.case3")


class ConfigError(ValueError):
    """Configuration file could not be parsed or validated."""


class SystemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    inertia: Optional[List[float]] = None
    m0: Optional[float] = None
    variables: Optional[List[str]] = None
    poisson: Optional[List[List[str]]] = None
    hamiltonian: Optional[str] = None
    casimir: Optional[str] = None
    dissipation: bool = True

    @property
    def dimension(self) -> int:
        return 3 if self.preset is not None else len(self.variables or ())

    @model_validator(mode="after")
    def _validate(self):
        inline_given = any(
            v is not None
            for v in (self.variables, self.poisson, self.hamiltonian, self.casimir)
        )
        if self.preset is not None and inline_given:
            raise ValueError(
                "system: give either 'preset' or inline expressions, not both"
            )
        if self.preset is None and not inline_given:
            raise ValueError(
                "system: one of 'preset' or inline expressions is required"
            )
        if self.preset is not None:
            self._validate_preset()
        else:
            self._validate_inline()
        return self

    def _validate_preset(self):
        if self.preset not in PRESET_NAMES:
            raise ValueError(
                f"system.preset: unknown preset {self.preset!r}; "
                f"expected one of {list(PRESET_NAMES)}"
            )
        if self.inertia is None:
            raise ValueError("system.inertia is required for rigid-body presets")
        if len(self.inertia) != 3:
            raise ValueError("system.inertia must have exactly 3 entries")
        i1, i2, i3 = self.inertia
        if not (i1 > i2 > i3 > 0):
            raise ValueError(
                f"system.inertia: ordering i1 > i2 > i3 > 0 violated by "
                f"({i1}, {i2}, {i3})"
            )
        if self.preset == "rigid_body.case3":
            if self.m0 is None or self.m0 == 0:
                raise ValueError("system.m0 must be nonzero for rigid_body.case3")

    def _validate_inline(self):
        for name in ("variables", "poisson", "hamiltonian", "casimir"):
            if getattr(self, name) is None:
                raise ValueError(f"system.{name} is required for inline systems")
        n = len(self.variables)
        if n == 0:
            raise ValueError("system.variables must be nonempty")
        if len(set(self.variables)) != n:
            raise ValueError("system.variables contains duplicates")
        if len(self.poisson) != n or any(len(row) != n for row in self.poisson):
            raise ValueError(f"system.poisson must be a {n}x{n} matrix of expressions")
        for i, row in enumerate(self.poisson):
            for j, entry in enumerate(row):
                self._parse_field(f"poisson[{i}][{j}]", entry, self.variables)
        self._parse_field("hamiltonian", self.hamiltonian, self.variables)
        self._parse_field("casimir", self.casimir, self.variables)

    @staticmethod
    def _parse_field(name, source, variables):
        try:
            parse(source, variables)
        except ExpressionError as exc:
            raise ValueError(f"system.{name}: {exc}") from exc


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_end: float = Field(gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)
    abs_tol: float = Field(default=1e-10, gt=0)
    sample_interval: Optional[float] = Field(default=None, gt=0)


class CertificateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    psi: str
    equilibrium: List[float]

    @model_validator(mode="after")
    def _validate(self):
        try:
            parse(self.psi, ("H", "C"))
        except ExpressionError as exc:
            raise ValueError(f"analysis.certificate.psi: {exc}") from exc
        return self


class ConvergenceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eps: float = Field(default=1e-4, gt=0)
    window_fraction: float = Field(default=0.1, gt=0, lt=1)


class AnalysisConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    certificate: Optional[CertificateConfig] = None
    predicted_limit_branch: Optional[int] = None
    convergence: ConvergenceConfig = ConvergenceConfig()

    @model_validator(mode="after")
    def _validate(self):
        if self.predicted_limit_branch not in (None, 1, -1):
            raise ValueError(
                "analysis.predicted_limit_branch must be +1 or -1"
            )
        return self


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "out"
    trajectory: str = "trajectory.csv"
    report: str = "report.json"
    plot_data: bool = True


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: SystemConfig
    initial_state: List[float]
    integrator: IntegratorConfig
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _validate(self):
        n = self.system.dimension
        if len(self.initial_state) != n:
            raise ValueError(
                f"initial_state has {len(self.initial_state)} entries but the "
                f"system dimension is {n}"
            )
        cert = self.analysis.certificate
        if cert is not None and len(cert.equilibrium) != n:
            raise ValueError(
                f"analysis.certificate.equilibrium has {len(cert.equilibrium)} "
                f"entries but the system dimension is {n}"
            )
        if self.analysis.predicted_limit_branch is not None:
            if self.system.preset not in ("rigid_body.case1", "rigid_body.case2"):
                raise ValueError(
                    "analysis.predicted_limit_branch requires preset "
                    "rigid_body.case1 or rigid_body.case2"
                )
        return self


def load_config(path) -> RunConfig:
    """Load and fully validate a YAML run configuration.

    Raises :class:`ConfigError` with the YAML line on parse problems and
    with the offending field path on validation problems.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Response payloads
# ---------------------------------------------------------------------------


class TrajectoryData(BaseModel):
    times: List[float]
    states: List[List[float]]
    h_values: List[float]
    c_values: List[float]


class IntegrationData(BaseModel):
    accepted: int
    rejected: int
    max_error_estimate: float
    failure: Optional[str] = None
    completed: bool
    t_final: float


class InvariantData(BaseModel):
    max_h_drift: float
    h_threshold: float
    h_passed: bool
    max_c_drift: float
    c_increase_count: int
    max_c_increase: float
    max_c_violation: float
    c_passed: bool
    passed: bool


class EquilibriumData(BaseModel):
    point: List[float]
    field_residual: float
    free_field_residual: float
    residual_scale: float
    gradients_dependent: bool
    in_dissipated_equilibria: bool
    in_free_equilibria: bool
    in_casimir_critical: bool
    tolerance: float


class CertificateData(BaseModel):
    psi: str
    equilibrium: List[float]
    gradient_residual: float
    hessian: List[List[float]]
    smallest_eigenvalue: float
    casimir_sensitivity: float
    positive_definite: bool
    verdict: str
    valid: bool


class LimitData(BaseModel):
    detected: Optional[List[float]] = None
    predicted: Optional[List[float]] = None
    distance: Optional[float] = None
    converged: bool = False
    eps: float
    window: float


class SimulationResult(BaseModel):
    config: RunConfig
    variables: List[str]
    trajectory: TrajectoryData
    integration: IntegrationData
    invariants: InvariantData
    equilibrium: Optional[EquilibriumData] = None
    certificate: Optional[CertificateData] = None
    limits: Optional[LimitData] = None
    success: bool


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: SystemConfig
    samples: int = Field(default=1000, gt=0, le=1_000_000)
    seed: int = 0
    box: float = Field(default=1.0, gt=0)


class StructureData(BaseModel):
    n_samples: int
    antisymmetry_residual: float
    casimir_residual: float
    tolerance: float
    passed: bool


class IdentitySamplingData(BaseModel):
    n_samples: int
    max_grad_h_residual: float
    max_casimir_quad_form: float
    tolerance: float
    passed: bool


class VerifyResult(BaseModel):
    structure: StructureData
    identities: IdentitySamplingData
    passed: bool


class PresetInfo(BaseModel):
    name: str
    description: str
    parameters: List[str]


class PresetsResponse(BaseModel):
    presets: List[PresetInfo]


class HealthInfo(BaseModel):
    status: str
    version: str
