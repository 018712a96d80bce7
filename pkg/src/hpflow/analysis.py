"""Equilibrium classification, Lyapunov certificates and limit prediction.

Equilibria of the dissipated flow are exactly the points where the energy
and Casimir gradients align (when the Casimir gradient is nonzero), and
every such point is also an equilibrium of the unperturbed flow.  At a
certified equilibrium, a composite function psi(H, C) whose derivative in C
is positive and whose composed Hessian is positive definite guarantees that
nearby solutions approach the union of the equilibrium set and the Casimir
critical set; on a fixed energy level with a unique candidate, the limit
point itself is determined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .dissipation import DissipatedField, gradients_dependent
from .expressions import Expr, ScalarField, differentiate, substitute, to_source

__all__ = [
    "EquilibriumReport",
    "classify_point",
    "LyapunovCertificate",
    "build_certificate",
    "predict_limit",
    "positive_definite",
]

CLASSIFY_TOL = 1e-9
GRADIENT_RESIDUAL_TOL = 1e-10
PIVOT_TOL = 1e-12
LEVEL_SET_TOL = 1e-9


@dataclass(frozen=True)
class EquilibriumReport:
    """Pointwise classification against the three distinguished sets.

    ``residual_scale`` is 1 + ||Pi||_F ||grad H|| + ||grad H||^2 ||grad C||,
    the natural magnitude of the two field contributions; both residual
    tests compare against ``tolerance * residual_scale``.
    """

    point: np.ndarray
    field_residual: float
    free_field_residual: float
    residual_scale: float
    gradients_dependent: bool
    in_dissipated_equilibria: bool
    in_free_equilibria: bool
    in_casimir_critical: bool
    tolerance: float


def classify_point(df: DissipatedField, x, tol: float = CLASSIFY_TOL) -> EquilibriumReport:
    """Classify ``x`` as equilibrium of the dissipated / free flow and as a
    Casimir critical point."""
    x = np.asarray(x, dtype=float)
    gh = df.grad_h_at(x)
    gc = df.grad_c_at(x)
    pi = df.system.pi_at(x)
    field_residual = float(np.linalg.norm(df.field_at(x)))
    free_residual = float(np.linalg.norm(df.conservative_at(x)))
    nh = float(np.linalg.norm(gh))
    nc = float(np.linalg.norm(gc))
    scale = 1.0 + float(np.linalg.norm(pi)) * nh + nh * nh * nc
    return EquilibriumReport(
        point=x,
        field_residual=field_residual,
        free_field_residual=free_residual,
        residual_scale=scale,
        gradients_dependent=gradients_dependent(gc, gh),
        in_dissipated_equilibria=field_residual <= tol * scale,
        in_free_equilibria=free_residual <= tol * scale,
        in_casimir_critical=nc <= tol,
        tolerance=tol,
    )


@dataclass(frozen=True)
class LyapunovCertificate:
    """Second-order certificate for psi(H, C) at an equilibrium.

    ``verdict`` is "valid" when the composed gradient vanishes, the composed
    Hessian is positive definite and the derivative of psi in its Casimir
    argument is positive at the equilibrium; "inconclusive" when the Hessian
    is only semidefinite (the second-order test cannot decide); otherwise
    "invalid".
    """

    psi_source: str
    equilibrium: np.ndarray
    gradient_residual: float
    hessian: np.ndarray
    smallest_eigenvalue: float
    casimir_sensitivity: float
    positive_definite: bool
    verdict: str

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"


def positive_definite(matrix: np.ndarray, pivot_tol: float = PIVOT_TOL) -> bool:
    """Cholesky-style factorization with pivots required above
    ``pivot_tol * trace``."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    threshold = pivot_tol * abs(np.trace(a))
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - np.sum(low[j, :j] ** 2)
        if d <= threshold:
            return False
        low[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            low[i, j] = (a[i, j] - np.sum(low[i, :j] * low[j, :j])) / low[j, j]
    return True


def compose_lyapunov(df: DissipatedField, psi: Expr) -> ScalarField:
    """L(x) = psi(H(x), C(x)) as a scalar field via exact substitution.

    ``psi`` is an expression in two variables: index 0 is the energy value,
    index 1 the Casimir value.  The additive normalization constant does not
    affect derivatives and is left to the caller.
    """
    composed = substitute(psi, [df.system.hamiltonian.expr, df.casimir.expr])
    return ScalarField(composed, df.n, df.system.variables)


def build_certificate(df: DissipatedField, psi: Expr, x_e) -> LyapunovCertificate:
    """Certify asymptotic attraction near ``x_e`` using psi(H, C).

    ``x_e`` must classify as an equilibrium of the dissipated flow; other
    points are rejected.  The composed gradient and Hessian are exact
    (symbolic substitution followed by symbolic differentiation), evaluated
    at ``x_e``.
    """
    x_e = np.asarray(x_e, dtype=float)
    report = classify_point(df, x_e)
    if not report.in_dissipated_equilibria:
        raise ValueError(
            f"x_e={x_e.tolist()} is not an equilibrium of the dissipated flow "
            f"(field residual {report.field_residual:.3e})"
        )
    composed = compose_lyapunov(df, psi)
    grad = composed.gradient_at(x_e)
    hess = composed.hessian_at(x_e)
    hess = 0.5 * (hess + hess.T)  # exact up to roundoff; symmetrize for eigh
    gradient_residual = float(np.linalg.norm(grad))
    h_e = df.hamiltonian_at(x_e)
    c_e = df.casimir_at(x_e)
    sensitivity = float(differentiate(psi, 1).eval((h_e, c_e)))
    pd = positive_definite(hess)
    smallest = float(np.linalg.eigvalsh(hess)[0])
    grad_ok = gradient_residual <= GRADIENT_RESIDUAL_TOL
    if grad_ok and pd and sensitivity > 0:
        verdict = "valid"
    elif (
        grad_ok
        and sensitivity > 0
        and smallest >= -PIVOT_TOL * max(1.0, abs(np.trace(hess)))
    ):
        verdict = "inconclusive"
    else:
        verdict = "invalid"
    return LyapunovCertificate(
        psi_source=to_source(psi, ("H", "C")),
        equilibrium=x_e,
        gradient_residual=gradient_residual,
        hessian=hess,
        smallest_eigenvalue=smallest,
        casimir_sensitivity=sensitivity,
        positive_definite=pd,
        verdict=verdict,
    )


def predict_limit(
    df: DissipatedField,
    x0,
    candidate_resolver: Callable[[float], Iterable[Sequence[float]]],
    level_tol: float = LEVEL_SET_TOL,
) -> Optional[np.ndarray]:
    """The unique candidate limit on the energy level of ``x0``, if any.

    ``candidate_resolver`` maps the conserved energy value h = H(x0) to the
    candidate limit points (equilibria and Casimir critical points) on that
    level set near the region of interest.  Candidates off the level set
    (checked against ``level_tol * (1 + |h|)``) are discarded; duplicates
    within the same tolerance count once.  Returns ``None`` unless exactly
    one candidate survives.
    """
    x0 = np.asarray(x0, dtype=float)
    h = df.hamiltonian_at(x0)
    survivors: list[np.ndarray] = []
    for cand in candidate_resolver(h):
        cand = np.asarray(cand, dtype=float)
        if abs(df.hamiltonian_at(cand) - h) > level_tol * (1.0 + abs(h)):
            continue
        if any(np.linalg.norm(cand - s) <= level_tol for s in survivors):
            continue
        survivors.append(cand)
    if len(survivors) == 1:
        return survivors[0]
    return None
