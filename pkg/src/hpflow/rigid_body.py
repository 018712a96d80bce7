"""Torque-controlled rigid body presets (Euler equations in momentum form).

State is the body-frame angular momentum (x1, x2, x3) with principal
moments of inertia I1 > I2 > I3 > 0.  The free rotation is the Hamiltonian
flow of the kinetic energy under the cross-product Poisson tensor; the
presets add the energy-preserving torque u = G grad C for three choices of
the Casimir C:

  case 1: the standard Casimir (half the squared momentum norm); the flow
      spins up the short axis, with closed-form limit on the x3 axis.
  case 2: the negated standard Casimir; the flow spins up the long axis,
      with closed-form limit on the x1 axis.
  case 3: a quartic function of the standard Casimir built around a target
      momentum magnitude m0, attracting to the x1 axis near (m0, 0, 0).

Long-axis and short-axis rotations of the free body are stable, middle-axis
rotations are not; the torques render the stable families asymptotically
attracting on their energy level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analysis
from .dissipation import DissipatedField
from .expressions import Const, Expr, Neg, ScalarField, Var
from .systems import PoissonSystem

__all__ = [
    "InertiaTriple",
    "make_system",
    "RigidBodyCase",
    "make_case",
    "AxisFamily",
    "analytic_equilibria",
    "predicted_limit",
    "lyapunov_psi",
    "analytic_certificate_hessian",
    "case3_lyapunov",
    "Case3Lyapunov",
    "torque_standard_casimir",
    "standard_casimir_expr",
    "VARIABLES",
]

VARIABLES = ("x1", "x2", "x3")


@dataclass(frozen=True)
class InertiaTriple:
    """Principal moments of inertia, strictly ordered i1 > i2 > i3 > 0."""

    i1: float
    i2: float
    i3: float

    def __post_init__(self):
        if not (self.i1 > self.i2 > self.i3 > 0):
            raise ValueError(
                f"inertia ordering violated: need i1 > i2 > i3 > 0, got "
                f"({self.i1}, {self.i2}, {self.i3})"
            )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.i1, self.i2, self.i3)


def _as_inertia(inertia) -> InertiaTriple:
    if isinstance(inertia, InertiaTriple):
        return inertia
    return InertiaTriple(*inertia)


def standard_casimir_expr() -> Expr:
    """Half the squared momentum norm."""
    x1, x2, x3 = Var(0), Var(1), Var(2)
    return 0.5 * (x1 ** 2 + x2 ** 2 + x3 ** 2)


def _energy_expr(inertia: InertiaTriple) -> Expr:
    x1, x2, x3 = Var(0), Var(1), Var(2)
    return 0.5 * (x1 ** 2 / inertia.i1 + x2 ** 2 / inertia.i2 + x3 ** 2 / inertia.i3)


def make_system(inertia) -> PoissonSystem:
    """Angular momentum system: cross-product tensor, kinetic energy, and
    the standard Casimir registered."""
    inertia = _as_inertia(inertia)
    x1, x2, x3 = Var(0), Var(1), Var(2)
    zero = Const(0.0)
    pi = (
        (zero, Neg(x3), x2),
        (x3, zero, Neg(x1)),
        (Neg(x2), x1, zero),
    )
    hamiltonian = ScalarField(_energy_expr(inertia), 3, VARIABLES)
    c0 = ScalarField(standard_casimir_expr(), 3, VARIABLES)
    return PoissonSystem(
        3,
        pi,
        hamiltonian,
        casimirs=(c0,),
        variables=VARIABLES,
        metadata={"inertia": inertia.as_tuple(), "preset": "rigid_body"},
    )


def _case_casimir(case_id: int, m0: Optional[float], inertia: InertiaTriple) -> Expr:
    c0 = standard_casimir_expr()
    if case_id == 1:
        return c0
    if case_id == 2:
        return Neg(c0)
    if case_id == 3:
        if m0 is None or m0 == 0:
            raise ValueError("case 3 requires a nonzero target magnitude m0")
        # Quartic in the standard Casimir, centered so (m0, 0, 0) is the
        # certified equilibrium; the inner factor 2*C0 - m0^2 makes the
        # certificate Hessian come out diag(8 m0^2, 1/I2 - 1/I1, 1/I3 - 1/I1).
        return (2.0 * c0 - m0 ** 2) ** 2 - c0 / inertia.i1
    raise ValueError(f"unknown case id {case_id}; expected 1, 2 or 3")


@dataclass(frozen=True)
class RigidBodyCase:
    """One preset torque choice, with its Casimir and assembled field."""

    case_id: int
    inertia: InertiaTriple
    m0: Optional[float]
    casimir: ScalarField
    field: DissipatedField
    system: PoissonSystem

    def torque_at(self, x) -> np.ndarray:
        """The applied torque G(x) grad C(x)."""
        return self.field.dissipation_at(x)


def make_case(system: PoissonSystem, case_id: int, m0: Optional[float] = None) -> RigidBodyCase:
    """Assemble the dissipated field for one preset case.

    ``system`` must come from :func:`make_system` (the inertia triple is
    read back from its metadata).
    """
    inertia_tuple = system.metadata.get("inertia")
    if inertia_tuple is None:
        raise ValueError("system was not built by make_system (missing inertia)")
    inertia = InertiaTriple(*inertia_tuple)
    casimir = ScalarField(_case_casimir(case_id, m0, inertia), 3, VARIABLES)
    field = DissipatedField(system, casimir)
    return RigidBodyCase(
        case_id=case_id,
        inertia=inertia,
        m0=m0 if case_id == 3 else None,
        casimir=casimir,
        field=field,
        system=system,
    )


def torque_standard_casimir(inertia, x) -> np.ndarray:
    """Closed-form torque for the standard Casimir (case 1), componentwise

        u_i = x_i * sum_{j != i} (1/I_i - 1/I_j) x_j^2 / I_j.

    Case 2's torque is the negative of this.
    """
    inertia = _as_inertia(inertia)
    i1, i2, i3 = inertia.as_tuple()
    x1, x2, x3 = (float(v) for v in x)
    return np.array(
        [
            x1 * ((1 / i1 - 1 / i2) * x2 ** 2 / i2 + (1 / i1 - 1 / i3) * x3 ** 2 / i3),
            x2 * ((1 / i2 - 1 / i1) * x1 ** 2 / i1 + (1 / i2 - 1 / i3) * x3 ** 2 / i3),
            x3 * ((1 / i3 - 1 / i1) * x1 ** 2 / i1 + (1 / i3 - 1 / i2) * x2 ** 2 / i2),
        ]
    )


@dataclass(frozen=True)
class AxisFamily:
    """One coordinate axis of equilibria of the free rotation."""

    axis: int
    label: str
    stable: bool

    def point(self, m0: float) -> np.ndarray:
        out = np.zeros(3)
        out[self.axis] = m0
        return out

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        others = [i for i in range(3) if i != self.axis]
        return bool(np.all(np.abs(x[others]) <= tol))


def analytic_equilibria(system: PoissonSystem) -> tuple[AxisFamily, AxisFamily, AxisFamily]:
    """The three coordinate-axis families of free equilibria.

    Long-axis (x1) and short-axis (x3) rotations are stable; middle-axis
    (x2) rotations with nonzero magnitude are not.
    """
    if system.metadata.get("preset") != "rigid_body":
        raise ValueError("analytic equilibria are only known for the rigid-body preset")
    return (
        AxisFamily(axis=0, label="long axis", stable=True),
        AxisFamily(axis=1, label="middle axis", stable=False),
        AxisFamily(axis=2, label="short axis", stable=True),
    )


def predicted_limit(case: RigidBodyCase, x0, branch: int = 1) -> np.ndarray:
    """Closed-form asymptotic limit for cases 1 and 2.

    The limit conserves the initial energy h: case 1 tends to
    (0, 0, s*sqrt(2 I3 h)) and case 2 to (s*sqrt(2 I1 h), 0, 0), with the
    axis branch s chosen by the caller.  Case 3 attracts to the x1 axis but
    has no closed-form limit point here.
    """
    if branch not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch}")
    if case.case_id not in (1, 2):
        raise ValueError(
            f"closed-form limit is unsupported for case {case.case_id}; "
            "only the attracting axis is known"
        )
    h = case.field.hamiltonian_at(np.asarray(x0, dtype=float))
    if case.case_id == 1:
        magnitude = math.sqrt(2.0 * case.inertia.i3 * h)
        return np.array([0.0, 0.0, branch * magnitude])
    magnitude = math.sqrt(2.0 * case.inertia.i1 * h)
    return np.array([branch * magnitude, 0.0, 0.0])


def lyapunov_psi(case_id: int, m0: float, inertia) -> Expr:
    """The two-variable certificate function psi(H, C) for each case.

    Variable 0 is the energy value, variable 1 the case's own Casimir
    value.
    """
    inertia = _as_inertia(inertia)
    h, c = Var(0), Var(1)
    if case_id == 1:
        return (c - 0.5 * m0 ** 2) ** 2 + c - inertia.i3 * h
    if case_id == 2:
        return h + (c + 0.5 * m0 ** 2) ** 2 + c / inertia.i1
    if case_id == 3:
        return h + c
    raise ValueError(f"unknown case id {case_id}; expected 1, 2 or 3")


def analytic_certificate_hessian(case_id: int, m0: float, inertia) -> np.ndarray:
    """Closed-form composed Hessian of the certificate at its equilibrium."""
    inertia = _as_inertia(inertia)
    i1, i2, i3 = inertia.as_tuple()
    if case_id == 1:
        return np.diag([1 - i3 / i1, 1 - i3 / i2, 2 * m0 ** 2])
    if case_id == 3:
        return np.diag([8 * m0 ** 2, 1 / i2 - 1 / i1, 1 / i3 - 1 / i1])
    raise ValueError(f"no closed-form certificate Hessian for case {case_id}")


@dataclass(frozen=True)
class Case3Lyapunov:
    certificate: analysis.LyapunovCertificate
    analytic_hessian: np.ndarray
    psi: Expr
    equilibrium: np.ndarray


def case3_lyapunov(m0: float, inertia) -> Case3Lyapunov:
    """Build case 3 around (m0, 0, 0) and certify it with psi(H, C) = H + C."""
    inertia = _as_inertia(inertia)
    if m0 == 0:
        raise ValueError("m0 must be nonzero")
    system = make_system(inertia)
    case = make_case(system, 3, m0=m0)
    psi = lyapunov_psi(3, m0, inertia)
    x_e = np.array([m0, 0.0, 0.0])
    certificate = analysis.build_certificate(case.field, psi, x_e)
    return Case3Lyapunov(
        certificate=certificate,
        analytic_hessian=analytic_certificate_hessian(3, m0, inertia),
        psi=psi,
        equilibrium=x_e,
    )
