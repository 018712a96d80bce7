"""Drive a configured run end to end and export its artifacts.

All numeric output files use 17 significant digits so reparsed values match
the in-memory ones exactly; tolerances measured downstream are never masked
by formatting.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from . import rigid_body
from .analysis import build_certificate, classify_point, predict_limit
from .dissipation import DissipatedField
from .expressions import ScalarField, parse
from .integrators import Trajectory, detect_convergence, integrate_adaptive, monitor
from .schemas import (
    CertificateData,
    EquilibriumData,
    IntegrationData,
    InvariantData,
    LimitData,
    RunConfig,
    SimulationResult,
    StructureData,
    SystemConfig,
    IdentitySamplingData,
    TrajectoryData,
    VerifyRequest,
    VerifyResult,
)
from .systems import PoissonSystem, verify_structure

__all__ = [
    "BuiltSystem",
    "build_system",
    "execute",
    "run_verification",
    "write_trajectory_csv",
    "write_report_json",
    "write_plot_data",
    "read_trajectory_csv",
]

IDENTITY_SAMPLING_TOL = 1e-12


class BuiltSystem:
    """A system plus its dissipated field, assembled from configuration."""

    def __init__(
        self,
        system: PoissonSystem,
        field: DissipatedField,
        dissipation: bool,
        case: Optional[rigid_body.RigidBodyCase] = None,
    ):
        self.system = system
        self.field = field
        self.dissipation = dissipation
        self.case = case
        self.variables = list(system.variables or
                              (f"x{i + 1}" for i in range(system.n)))

    def rhs(self, x):
        if self.dissipation:
            return self.field.field_at(x)
        return self.system.hamiltonian_field_at(x)


def build_system(cfg: SystemConfig) -> BuiltSystem:
    """Construct the preset or inline system described by ``cfg``."""
    if cfg.preset is not None:
        case_id = int(cfg.preset.rsplit("case", 1)[1])
        system = rigid_body.make_system(cfg.inertia)
        case = rigid_body.make_case(system, case_id, m0=cfg.m0)
        return BuiltSystem(system, case.field, cfg.dissipation, case)
    variables = list(cfg.variables)
    n = len(variables)
    pi = tuple(
        tuple(parse(entry, variables) for entry in row) for row in cfg.poisson
    )
    hamiltonian = ScalarField(parse(cfg.hamiltonian, variables), n, variables)
    casimir = ScalarField(parse(cfg.casimir, variables), n, variables)
    system = PoissonSystem(
        n, pi, hamiltonian, casimirs=(casimir,), variables=variables
    )
    field = DissipatedField(system, casimir)
    return BuiltSystem(system, field, cfg.dissipation)


def _trajectory_data(traj: Trajectory) -> TrajectoryData:
    return TrajectoryData(
        times=traj.times.tolist(),
        states=traj.states.tolist(),
        h_values=traj.h_values.tolist(),
        c_values=traj.c_values.tolist(),
    )


def _certificate_data(cert) -> CertificateData:
    return CertificateData(
        psi=cert.psi_source,
        equilibrium=cert.equilibrium.tolist(),
        gradient_residual=float(cert.gradient_residual),
        hessian=cert.hessian.tolist(),
        smallest_eigenvalue=float(cert.smallest_eigenvalue),
        casimir_sensitivity=float(cert.casimir_sensitivity),
        positive_definite=cert.positive_definite,
        verdict=cert.verdict,
        valid=cert.valid,
    )


def _equilibrium_data(report) -> EquilibriumData:
    return EquilibriumData(
        point=report.point.tolist(),
        field_residual=float(report.field_residual),
        free_field_residual=float(report.free_field_residual),
        residual_scale=float(report.residual_scale),
        gradients_dependent=report.gradients_dependent,
        in_dissipated_equilibria=report.in_dissipated_equilibria,
        in_free_equilibria=report.in_free_equilibria,
        in_casimir_critical=report.in_casimir_critical,
        tolerance=float(report.tolerance),
    )


def execute(config: RunConfig) -> SimulationResult:
    """Integrate, monitor and analyze one configured run.

    Certificate inputs are validated before integration starts so bad
    requests fail fast; integration failures are recorded in the result
    with the partial trajectory retained, not raised.
    """
    built = build_system(config.system)
    df = built.field
    x0 = np.asarray(config.initial_state, dtype=float)

    certificate = None
    equilibrium = None
    cert_cfg = config.analysis.certificate
    if cert_cfg is not None:
        psi = parse(cert_cfg.psi, ("H", "C"))
        x_e = np.asarray(cert_cfg.equilibrium, dtype=float)
        equilibrium = classify_point(df, x_e)
        cert = build_certificate(df, psi, x_e)  # raises for non-equilibria
        certificate = _certificate_data(cert)

    traj = integrate_adaptive(
        built.rhs,
        x0,
        config.integrator.t_end,
        rel_tol=config.integrator.rel_tol,
        abs_tol=config.integrator.abs_tol,
        sample_interval=config.integrator.sample_interval,
        h_eval=df.hamiltonian_at,
        c_eval=df.casimir_at,
    )
    invariants = monitor(traj)

    conv = config.analysis.convergence
    span = float(traj.times[-1] - traj.times[0]) if len(traj) > 1 else 0.0
    window = conv.window_fraction * span
    detected = None
    if span > 0 and window > 0:
        detected = detect_convergence(traj, conv.eps, window)

    predicted = None
    branch = config.analysis.predicted_limit_branch
    if branch is not None and built.case is not None:
        predicted = rigid_body.predicted_limit(built.case, x0, branch)

    distance = None
    if detected is not None and predicted is not None:
        distance = float(np.linalg.norm(detected - predicted))
    limits = LimitData(
        detected=detected.tolist() if detected is not None else None,
        predicted=predicted.tolist() if predicted is not None else None,
        distance=distance,
        converged=detected is not None,
        eps=conv.eps,
        window=window,
    )

    if equilibrium is None and detected is not None:
        equilibrium = classify_point(df, detected)

    success = (
        invariants.passed
        and traj.diagnostics.completed
        and (certificate is None or certificate.valid)
    )
    return SimulationResult(
        config=config,
        variables=built.variables,
        trajectory=_trajectory_data(traj),
        integration=IntegrationData(
            accepted=traj.diagnostics.accepted,
            rejected=traj.diagnostics.rejected,
            max_error_estimate=float(traj.diagnostics.max_error_estimate),
            failure=traj.diagnostics.failure,
            completed=traj.diagnostics.completed,
            t_final=float(traj.times[-1]),
        ),
        invariants=InvariantData(
            max_h_drift=invariants.max_h_drift,
            h_threshold=invariants.h_threshold,
            h_passed=invariants.h_passed,
            max_c_drift=invariants.max_c_drift,
            c_increase_count=invariants.c_increase_count,
            max_c_increase=invariants.max_c_increase,
            max_c_violation=invariants.max_c_violation,
            c_passed=invariants.c_passed,
            passed=invariants.passed,
        ),
        equilibrium=_equilibrium_data(equilibrium) if equilibrium else None,
        certificate=certificate,
        limits=limits,
        success=success,
    )


def run_verification(request: VerifyRequest) -> VerifyResult:
    """Sample structural identities and the dissipation identities."""
    built = build_system(request.system)
    n = built.system.n
    rng = np.random.default_rng(request.seed)
    samples = rng.uniform(-request.box, request.box, size=(request.samples, n))
    extra = (
        () if built.field.casimir in built.system.casimirs
        else (built.field.casimir,)
    )
    structure = verify_structure(built.system, samples, extra_casimirs=extra)

    worst_gh = 0.0
    worst_quad = 0.0
    df = built.field
    for x in samples:
        gh = df.grad_h_at(x)
        gc = df.grad_c_at(x)
        nh = float(np.linalg.norm(gh))
        nc = float(np.linalg.norm(gc))
        res = df.identity_residuals(x)
        worst_gh = max(worst_gh, res.grad_h_residual / (1.0 + nh ** 3))
        worst_quad = max(
            worst_quad, res.casimir_quad_form / (1.0 + (nc * nh) ** 2)
        )
    identities = IdentitySamplingData(
        n_samples=request.samples,
        max_grad_h_residual=worst_gh,
        max_casimir_quad_form=worst_quad,
        tolerance=IDENTITY_SAMPLING_TOL,
        passed=worst_gh <= IDENTITY_SAMPLING_TOL
        and worst_quad <= IDENTITY_SAMPLING_TOL,
    )
    return VerifyResult(
        structure=StructureData(
            n_samples=structure.n_samples,
            antisymmetry_residual=structure.antisymmetry_residual,
            casimir_residual=structure.casimir_residual,
            tolerance=structure.tolerance,
            passed=structure.passed,
        ),
        identities=identities,
        passed=structure.passed and identities.passed,
    )


# ---------------------------------------------------------------------------
# File export
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trajectory_csv(result: SimulationResult, path) -> Path:
    """Delimited text: header ``t,<variables...>,H,C`` and one row per sample."""
    path = Path(path)
    traj = result.trajectory
    header = ",".join(["t", *result.variables, "H", "C"])
    lines = [header]
    for t, state, h, c in zip(traj.times, traj.states, traj.h_values, traj.c_values):
        row = [_fmt(t), *(_fmt(v) for v in state), _fmt(h), _fmt(c)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trajectory_csv(path):
    """Reparse an exported trajectory: (header fields, data array)."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, data


def write_report_json(result: SimulationResult, path) -> Path:
    """Structured report (everything except the bulk trajectory samples)."""
    path = Path(path)
    payload = result.model_dump(mode="json", exclude={"trajectory"})
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def write_plot_data(result: SimulationResult, directory) -> list[Path]:
    """Plot-ready delimited files: the state-space polyline and one time
    series per state component."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    traj = result.trajectory
    written = []

    polyline = directory / "polyline.csv"
    lines = [",".join(result.variables)]
    for state in traj.states:
        lines.append(",".join(_fmt(v) for v in state))
    polyline.write_text("\n".join(lines) + "\n")
    written.append(polyline)

    for i, name in enumerate(result.variables):
        series = directory / f"series_{name}.csv"
        lines = [f"t,{name}"]
        for t, state in zip(traj.times, traj.states):
            lines.append(f"{_fmt(t)},{_fmt(state[i])}")
        series.write_text("\n".join(lines) + "\n")
        written.append(series)
    return written
